//! Layout evaluation against ground truth: per-class precision and recall,
//! AP at IoU 0.5, line detection and reading-order accuracy.
//!
//! Matching is greedy in descending score order. Score ties go to the
//! prediction with the larger best IoU, then to input order. Each ground-truth
//! item is matched at most once, and only by a prediction of its own class
//! whose IoU reaches the threshold.
//!
//! Reading order is scored as pairwise order accuracy: the fraction of line
//! pairs whose ground-truth relative order survives in the prediction, i.e.
//! one minus the normalized Kendall tau distance.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout_model::{linearize, polygon_iou, LayoutError, Page, Polygon, RegionClass, TextRegion};
use crate::par::{try_map_ordered, Execution};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum LayoutEvalError {
    #[error("IoU threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("prediction {0} has no score")]
    MissingScores(usize),
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: RegionClass,
    pub polygon: Polygon,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl Detection {
    pub fn new(class: RegionClass, polygon: Polygon, score: Option<f64>) -> Self {
        Self { class, polygon, score }
    }

    fn effective_score(&self) -> f64 {
        self.score.unwrap_or(1.0)
    }
}

impl From<&TextRegion> for Detection {
    fn from(r: &TextRegion) -> Self {
        Detection {
            class: r.class,
            polygon: r.polygon.clone(),
            score: r.score,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub prediction: usize,
    pub ground_truth: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub n_gt: usize,
    pub n_pred: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl ClassCounts {
    /// `TP / (TP + FP)`; reported as 0 when there are no predictions.
    pub fn precision(&self) -> f64 {
        let d = self.true_positives + self.false_positives;
        if d == 0 {
            0.0
        } else {
            self.true_positives as f64 / d as f64
        }
    }

    /// False when there were no predictions and precision is undefined.
    pub fn precision_defined(&self) -> bool {
        self.true_positives + self.false_positives > 0
    }

    /// `TP / (TP + FN)`; 0 when there is no ground truth.
    pub fn recall(&self) -> f64 {
        let d = self.true_positives + self.false_negatives;
        if d == 0 {
            0.0
        } else {
            self.true_positives as f64 / d as f64
        }
    }

    fn add(&mut self, o: &ClassCounts) {
        self.n_gt += o.n_gt;
        self.n_pred += o.n_pred;
        self.true_positives += o.true_positives;
        self.false_positives += o.false_positives;
        self.false_negatives += o.false_negatives;
    }
}

/// Outcome of one prediction in greedy order, kept for AP computation.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Ranked {
    score: f64,
    best_iou: f64,
    true_positive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub matches: Vec<Match>,
    pub per_class: BTreeMap<RegionClass, ClassCounts>,
    ranked: BTreeMap<RegionClass, Vec<Ranked>>,
}

impl MatchResult {
    pub fn precision(&self, class: RegionClass) -> f64 {
        self.per_class.get(&class).map_or(0.0, ClassCounts::precision)
    }

    pub fn recall(&self, class: RegionClass) -> f64 {
        self.per_class.get(&class).map_or(0.0, ClassCounts::recall)
    }
}

fn check_threshold(t: f64) -> Result<(), LayoutEvalError> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(LayoutEvalError::InvalidThreshold(t))
    }
}

struct Greedy {
    /// Prediction indices in the order they were matched.
    order: Vec<usize>,
    /// Matched ground truth and IoU per prediction.
    assigned: Vec<Option<(usize, f64)>>,
    /// Best IoU of each prediction against any ground truth.
    best: Vec<f64>,
}

/// Greedy one-to-one matching of `pred` onto `gt`, class-agnostic.
fn greedy(gt: &[&Polygon], pred: &[(&Polygon, f64)], threshold: f64) -> Result<Greedy, LayoutEvalError> {
    let mut ious = vec![0.0; gt.len() * pred.len()];
    let mut best = vec![0.0f64; pred.len()];
    for (p, (pp, _)) in pred.iter().enumerate() {
        for (g, gp) in gt.iter().enumerate() {
            let iou = polygon_iou(gp, pp)?;
            ious[p * gt.len() + g] = iou;
            best[p] = best[p].max(iou);
        }
    }
    let mut order: Vec<usize> = (0..pred.len()).collect();
    order.sort_by(|&a, &b| {
        pred[b]
            .1
            .total_cmp(&pred[a].1)
            .then(best[b].total_cmp(&best[a]))
            .then(a.cmp(&b))
    });
    let mut taken = vec![false; gt.len()];
    let mut assigned = vec![None; pred.len()];
    for &p in &order {
        let mut choice: Option<(usize, f64)> = None;
        for g in 0..gt.len() {
            let iou = ious[p * gt.len() + g];
            if taken[g] || iou < threshold {
                continue;
            }
            if choice.is_none_or(|(_, b)| iou > b) {
                choice = Some((g, iou));
            }
        }
        if let Some((g, iou)) = choice {
            taken[g] = true;
            assigned[p] = Some((g, iou));
        }
    }
    Ok(Greedy { order, assigned, best })
}

/// Per-class greedy matching of predictions against ground-truth regions.
pub fn match_detections(
    gt: &[TextRegion],
    pred: &[Detection],
    iou_threshold: f64,
) -> Result<MatchResult, LayoutEvalError> {
    check_threshold(iou_threshold)?;
    let mut classes: Vec<RegionClass> = gt.iter().map(|r| r.class).chain(pred.iter().map(|d| d.class)).collect();
    classes.sort();
    classes.dedup();

    let mut matches = Vec::new();
    let mut per_class = BTreeMap::new();
    let mut ranked = BTreeMap::new();
    for class in classes {
        let gt_idx: Vec<usize> = (0..gt.len()).filter(|&i| gt[i].class == class).collect();
        let pred_idx: Vec<usize> = (0..pred.len()).filter(|&i| pred[i].class == class).collect();
        let gt_polys: Vec<&Polygon> = gt_idx.iter().map(|&i| &gt[i].polygon).collect();
        let pred_polys: Vec<(&Polygon, f64)> = pred_idx
            .iter()
            .map(|&i| (&pred[i].polygon, pred[i].effective_score()))
            .collect();
        let Greedy { order, assigned, best } = greedy(&gt_polys, &pred_polys, iou_threshold)?;
        let tp = assigned.iter().filter(|a| a.is_some()).count();
        for (p, a) in assigned.iter().enumerate() {
            if let Some((g, iou)) = a {
                matches.push(Match {
                    prediction: pred_idx[p],
                    ground_truth: gt_idx[*g],
                    iou: *iou,
                });
            }
        }
        per_class.insert(
            class,
            ClassCounts {
                n_gt: gt_idx.len(),
                n_pred: pred_idx.len(),
                true_positives: tp,
                false_positives: pred_idx.len() - tp,
                false_negatives: gt_idx.len() - tp,
            },
        );
        ranked.insert(
            class,
            order
                .iter()
                .map(|&p| Ranked {
                    score: pred_polys[p].1,
                    best_iou: best[p],
                    true_positive: assigned[p].is_some(),
                })
                .collect(),
        );
    }
    matches.sort_by_key(|m| m.prediction);
    Ok(MatchResult {
        matches,
        per_class,
        ranked,
    })
}

/// All-points interpolated area under the precision-recall curve.
/// `ranked` must already be in descending score order.
fn area_under_pr(ranked: &[Ranked], n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    let mut recall = vec![0.0];
    let mut precision = vec![0.0];
    let mut tp = 0usize;
    for (k, r) in ranked.iter().enumerate() {
        if r.true_positive {
            tp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    recall.push(1.0);
    precision.push(0.0);
    for i in (0..precision.len() - 1).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    for i in 0..recall.len() - 1 {
        if recall[i + 1] != recall[i] {
            ap += (recall[i + 1] - recall[i]) * precision[i + 1];
        }
    }
    Some(ap)
}

fn merge_ranked(lists: Vec<Vec<Ranked>>) -> Vec<Ranked> {
    // Page order then in-page order is the final tie-break, which a stable
    // sort over the concatenation preserves.
    let mut all: Vec<Ranked> = lists.into_iter().flatten().collect();
    all.sort_by(|a, b| b.score.total_cmp(&a.score).then(b.best_iou.total_cmp(&a.best_iou)));
    all
}

/// AP at IoU 0.5 for every class present in ground truth or predictions.
/// Classes without ground truth get `None`.
pub fn average_precision_50(
    gt: &[TextRegion],
    pred: &[Detection],
) -> Result<BTreeMap<RegionClass, Option<f64>>, LayoutEvalError> {
    if let Some(i) = pred.iter().position(|d| d.score.is_none()) {
        return Err(LayoutEvalError::MissingScores(i));
    }
    let m = match_detections(gt, pred, DEFAULT_IOU_THRESHOLD)?;
    Ok(m.per_class
        .iter()
        .map(|(class, counts)| (*class, area_under_pr(&m.ranked[class], counts.n_gt)))
        .collect())
}

/// Mean of the per-class APs over classes present in ground truth.
pub fn mean_average_precision(aps: &BTreeMap<RegionClass, Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = aps.values().flatten().copied().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReadingOrderScore {
    /// Fraction of ground-truth-ordered pairs kept in order; 1 when fewer
    /// than two lines are comparable.
    pub score: f64,
    pub compared: usize,
    pub pairs: u64,
    pub concordant: u64,
    pub missing_from_prediction: usize,
    pub extra_in_prediction: usize,
}

fn count_inversions(v: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            merged.push(v[i]);
            i += 1;
        } else {
            merged.push(v[j]);
            inv += (mid - i) as u64;
            j += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    inv
}

/// Pairwise order accuracy of `pred_order` against `gt_order`. Ids missing
/// on either side are dropped and counted; repeated ids count once.
pub fn reading_order_score<S: AsRef<str>>(gt_order: &[S], pred_order: &[S]) -> ReadingOrderScore {
    let mut pred_pos: HashMap<&str, usize> = HashMap::new();
    for (i, id) in pred_order.iter().enumerate() {
        pred_pos.entry(id.as_ref()).or_insert(i);
    }
    let mut seen = std::collections::HashSet::new();
    let mut seq = Vec::new();
    let mut missing = 0;
    for id in gt_order {
        let id = id.as_ref();
        if !seen.insert(id) {
            continue;
        }
        match pred_pos.get(id) {
            Some(&p) => seq.push(p),
            None => missing += 1,
        }
    }
    let extra = pred_pos.keys().filter(|k| !seen.contains(*k)).count();
    let n = seq.len() as u64;
    let pairs = n * n.saturating_sub(1) / 2;
    let inversions = count_inversions(&mut seq);
    let concordant = pairs - inversions;
    ReadingOrderScore {
        score: if pairs == 0 {
            1.0
        } else {
            concordant as f64 / pairs as f64
        },
        compared: n as usize,
        pairs,
        concordant,
        missing_from_prediction: missing,
        extra_in_prediction: extra,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub precision: f64,
    pub precision_defined: bool,
    pub recall: f64,
    /// `None` without ground truth or without prediction scores.
    pub ap50: Option<f64>,
    #[serde(flatten)]
    pub counts: ClassCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub pages: usize,
    pub iou_threshold: f64,
    pub per_class: BTreeMap<RegionClass, ClassReport>,
    pub map50: Option<f64>,
    pub line_precision: f64,
    pub line_recall: f64,
    pub line_ap50: Option<f64>,
    pub lines: ClassCounts,
    pub reading_order_score: f64,
    pub reading_order: ReadingOrderScore,
    /// False when some prediction lacked a score; AP figures are then absent.
    pub scores_present: bool,
}

impl DetectionReport {
    /// Per-class table in the `class,precision,recall,map50` layout, with
    /// line detection and reading order rows appended.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.3}"));
        let mut out = String::from("class,precision,recall,map50\n");
        for class in RegionClass::ALL {
            if let Some(r) = self.per_class.get(&class) {
                out.push_str(&format!(
                    "{},{:.3},{:.3},{}\n",
                    class.label(),
                    r.precision,
                    r.recall,
                    fmt(r.ap50)
                ));
            }
        }
        out.push_str(&format!(
            "Line detection,{:.3},{:.3},{}\n",
            self.line_precision,
            self.line_recall,
            fmt(self.line_ap50)
        ));
        out.push_str(&format!("Reading order,{:.3},,\n", self.reading_order_score));
        out
    }
}

struct PageOutcome {
    regions: MatchResult,
    line_counts: ClassCounts,
    line_ranked: Vec<Ranked>,
    order: ReadingOrderScore,
}

fn evaluate_page(gt: &Page, pred: &Page, threshold: f64) -> Result<PageOutcome, LayoutEvalError> {
    let detections: Vec<Detection> = pred.regions.iter().map(Detection::from).collect();
    let regions = match_detections(&gt.regions, &detections, threshold)?;

    let gt_lines: Vec<(&str, &Polygon)> = gt
        .regions
        .iter()
        .flat_map(|r| &r.lines)
        .filter_map(|l| l.polygon.as_ref().map(|p| (l.id.as_str(), p)))
        .collect();
    let pred_lines: Vec<(&str, &Polygon, f64)> = pred
        .regions
        .iter()
        .flat_map(|r| &r.lines)
        .filter_map(|l| l.polygon.as_ref().map(|p| (l.id.as_str(), p, l.score.unwrap_or(1.0))))
        .collect();
    let gt_polys: Vec<&Polygon> = gt_lines.iter().map(|(_, p)| *p).collect();
    let pred_polys: Vec<(&Polygon, f64)> = pred_lines.iter().map(|(_, p, s)| (*p, *s)).collect();
    let Greedy { order, assigned, best } = greedy(&gt_polys, &pred_polys, threshold)?;
    let tp = assigned.iter().filter(|a| a.is_some()).count();
    let line_counts = ClassCounts {
        n_gt: gt_lines.len(),
        n_pred: pred_lines.len(),
        true_positives: tp,
        false_positives: pred_lines.len() - tp,
        false_negatives: gt_lines.len() - tp,
    };
    let line_ranked = order
        .iter()
        .map(|&p| Ranked {
            score: pred_polys[p].1,
            best_iou: best[p],
            true_positive: assigned[p].is_some(),
        })
        .collect();

    // Predicted lines matched geometrically take the id of their
    // ground-truth partner; the rest keep their own id.
    let rename: HashMap<&str, &str> = pred_lines
        .iter()
        .zip(&assigned)
        .filter_map(|((id, _, _), a)| a.map(|(g, _)| (*id, gt_lines[g].0)))
        .collect();
    let gt_order: Vec<String> = linearize(gt).into_iter().map(|l| l.line_id).collect();
    let pred_order: Vec<String> = linearize(pred)
        .into_iter()
        .map(|l| {
            rename
                .get(l.line_id.as_str())
                .map_or(l.line_id.clone(), |s| (*s).to_owned())
        })
        .collect();
    let order = reading_order_score(&gt_order, &pred_order);
    Ok(PageOutcome {
        regions,
        line_counts,
        line_ranked,
        order,
    })
}

/// Evaluates predicted pages against ground-truth pages, pooling counts and
/// ranked predictions across pages.
pub fn evaluate_layout(
    pages: &[(Page, Page)],
    iou_threshold: f64,
    execution: Execution,
) -> Result<DetectionReport, LayoutEvalError> {
    check_threshold(iou_threshold)?;
    let outcomes = try_map_ordered(execution, pages, |(gt, pred)| evaluate_page(gt, pred, iou_threshold))?;
    let scores_present = pages.iter().all(|(_, pred)| {
        pred.regions
            .iter()
            .all(|r| r.score.is_some() && r.lines.iter().all(|l| l.polygon.is_none() || l.score.is_some()))
    });

    let mut counts: BTreeMap<RegionClass, ClassCounts> = BTreeMap::new();
    let mut ranked: BTreeMap<RegionClass, Vec<Vec<Ranked>>> = BTreeMap::new();
    let mut lines = ClassCounts::default();
    let mut line_ranked = Vec::new();
    let mut order = ReadingOrderScore::default();
    for o in outcomes {
        for (class, c) in &o.regions.per_class {
            counts.entry(*class).or_default().add(c);
        }
        for (class, r) in o.regions.ranked {
            ranked.entry(class).or_default().push(r);
        }
        lines.add(&o.line_counts);
        line_ranked.push(o.line_ranked);
        order.compared += o.order.compared;
        order.pairs += o.order.pairs;
        order.concordant += o.order.concordant;
        order.missing_from_prediction += o.order.missing_from_prediction;
        order.extra_in_prediction += o.order.extra_in_prediction;
    }
    order.score = if order.pairs == 0 {
        1.0
    } else {
        order.concordant as f64 / order.pairs as f64
    };

    let per_class: BTreeMap<RegionClass, ClassReport> = counts
        .iter()
        .map(|(class, c)| {
            let ap50 = if scores_present {
                let r = merge_ranked(ranked.remove(class).unwrap_or_default());
                area_under_pr(&r, c.n_gt)
            } else {
                None
            };
            (
                *class,
                ClassReport {
                    precision: c.precision(),
                    precision_defined: c.precision_defined(),
                    recall: c.recall(),
                    ap50,
                    counts: *c,
                },
            )
        })
        .collect();
    let map50 = if scores_present {
        let aps: Vec<f64> = per_class
            .values()
            .filter(|r| r.counts.n_gt > 0)
            .filter_map(|r| r.ap50)
            .collect();
        (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64)
    } else {
        None
    };
    let line_ap50 = if scores_present {
        area_under_pr(&merge_ranked(line_ranked), lines.n_gt)
    } else {
        None
    };
    Ok(DetectionReport {
        pages: pages.len(),
        iou_threshold,
        per_class,
        map50,
        line_precision: lines.precision(),
        line_recall: lines.recall(),
        line_ap50,
        lines,
        reading_order_score: order.score,
        reading_order: order,
        scores_present,
    })
}
