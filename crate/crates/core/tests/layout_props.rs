mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;

use pg_forge_core::layout_eval::{
    average_precision_50, evaluate_layout, match_detections, reading_order_score, Detection,
};
use pg_forge_core::layout_model::{
    filter_relevant, linearize, load_page, parse_page_xml, polygon_iou, write_page_xml, Page, Polygon, RegionClass,
    TextRegion,
};
use pg_forge_core::par::Execution;

fn contains(poly: &Polygon, x: f64, y: f64) -> bool {
    let v = poly.vertices();
    let mut inside = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (xi, yi) = v[i];
        let (xj, yj) = v[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// IoU by sampling cell centres of a 0.25 grid over the canvas.
fn raster_iou(a: &Polygon, b: &Polygon) -> f64 {
    let (mut inter, mut union) = (0u64, 0u64);
    let step = 0.25;
    for i in 0..520 {
        for j in 0..520 {
            let (x, y) = ((i as f64 + 0.5) * step, (j as f64 + 0.5) * step);
            let (ia, ib) = (contains(a, x, y), contains(b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    inter as f64 / union as f64
}

fn region(class: RegionClass, polygon: Polygon) -> TextRegion {
    TextRegion {
        id: "r".into(),
        class,
        polygon,
        lines: vec![],
        reading_index: 0,
        score: None,
    }
}

fn pair_count_oracle(gt: &[usize], pred: &[usize]) -> f64 {
    let pos = |x: usize| pred.iter().position(|&p| p == x);
    let kept: Vec<usize> = gt.iter().copied().filter(|&x| pos(x).is_some()).collect();
    let (mut good, mut total) = (0, 0);
    for i in 0..kept.len() {
        for j in i + 1..kept.len() {
            total += 1;
            if pos(kept[i]) < pos(kept[j]) {
                good += 1;
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        good as f64 / total as f64
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn reading_order_matches_pair_count_on_all_permutations() {
    for n in 0..=6 {
        let gt: Vec<usize> = (0..n).collect();
        let ids: Vec<String> = gt.iter().map(|i| format!("l{i}")).collect();
        for p in permutations(n) {
            let pred: Vec<String> = p.iter().map(|i| format!("l{i}")).collect();
            assert_eq!(
                reading_order_score(&ids, &pred).score,
                pair_count_oracle(&gt, &p),
                "{p:?}"
            );
            // Dropping the last predicted line counts only surviving pairs.
            if let Some((_, rest)) = p.split_last() {
                let pred: Vec<String> = rest.iter().map(|i| format!("l{i}")).collect();
                assert_eq!(reading_order_score(&ids, &pred).score, pair_count_oracle(&gt, rest));
            }
        }
    }
}

#[test]
fn fixture_page_has_every_class_and_filters_to_two() {
    let parsed = load_page(&fixture("pages/p001_eight_classes.xml")).unwrap();
    let classes: BTreeSet<RegionClass> = parsed.page.regions.iter().map(|r| r.class).collect();
    assert_eq!(classes.len(), 8);
    let kept = filter_relevant(&parsed.page);
    let kept_classes: Vec<RegionClass> = kept.regions.iter().map(|r| r.class).collect();
    assert_eq!(
        kept_classes,
        [RegionClass::MainTextTitle, RegionClass::MainTextColGreek]
    );
    let ids: Vec<String> = linearize(&kept).into_iter().map(|l| l.line_id).collect();
    assert_eq!(ids, ["l_title", "l_g1", "l_g2", "l_g3", "l_g4", "l_g5"]);
}

#[test]
fn fixture_round_trips_through_writer() {
    let page = load_page(&fixture("pages/p001_eight_classes.xml")).unwrap().page;
    let again = parse_page_xml(&write_page_xml(&page)).unwrap().page;
    assert_eq!(again, page);
    let json = Page::from_json(&page.to_json()).unwrap();
    assert_eq!(json, page);
}

#[test]
fn page_evaluation_against_itself_is_perfect() {
    let mut pred = load_page(&fixture("pages/p001_eight_classes.xml")).unwrap().page;
    let gt = pred.clone();
    for r in &mut pred.regions {
        r.score = Some(0.9);
        for l in &mut r.lines {
            l.score = Some(0.8);
        }
    }
    let r = evaluate_layout(&[(gt, pred)], 0.5, Execution::Sequential).unwrap();
    assert_eq!(r.map50, Some(1.0));
    assert_eq!(r.line_precision, 1.0);
    assert_eq!(r.line_recall, 1.0);
    assert_eq!(r.reading_order_score, 1.0);
    for c in r.per_class.values() {
        assert_eq!((c.precision, c.recall), (1.0, 1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn iou_matches_raster_on_rectangles(a in rect(), b in rect()) {
        // Integer corners make cell-centre sampling exact.
        let exact = polygon_iou(&a, &b).unwrap();
        prop_assert!((exact - raster_iou(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn iou_matches_raster_on_star_polygons(a in star_polygon(), b in star_polygon()) {
        let exact = polygon_iou(&a, &b).unwrap();
        prop_assert!((exact - raster_iou(&a, &b)).abs() < 0.03, "exact {} raster {}", exact, raster_iou(&a, &b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn iou_symmetric_and_bounded(a in star_polygon(), b in star_polygon()) {
        let ab = polygon_iou(&a, &b).unwrap();
        let ba = polygon_iou(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((polygon_iou(&a, &a).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn iou_invariant_under_translation_and_scale(a in star_polygon(), b in star_polygon(), dx in -500.0f64..500.0, dy in -500.0f64..500.0, sx in 0.1f64..10.0, sy in 0.1f64..10.0) {
        let base = polygon_iou(&a, &b).unwrap();
        let moved = polygon_iou(&a.translated(dx, dy), &b.translated(dx, dy)).unwrap();
        let scaled = polygon_iou(&a.scaled(sx, sy), &b.scaled(sx, sy)).unwrap();
        prop_assert!((base - moved).abs() < 1e-9);
        prop_assert!((base - scaled).abs() < 1e-9);
    }

    #[test]
    fn matching_is_one_to_one(gt in prop::collection::vec(rect(), 0..6), pred in prop::collection::vec((rect(), 0.0f64..1.0), 0..6)) {
        let gt: Vec<TextRegion> = gt.into_iter().map(|p| region(RegionClass::MainTextColGreek, p)).collect();
        let dets: Vec<Detection> = pred.into_iter().map(|(p, s)| Detection::new(RegionClass::MainTextColGreek, p, Some(s))).collect();
        let m = match_detections(&gt, &dets, 0.5).unwrap();
        let gts: BTreeSet<usize> = m.matches.iter().map(|x| x.ground_truth).collect();
        prop_assert_eq!(gts.len(), m.matches.len());
        for x in &m.matches {
            prop_assert!(x.iou >= 0.5);
        }
        let ap = average_precision_50(&gt, &dets).unwrap();
        if let Some(Some(v)) = ap.get(&RegionClass::MainTextColGreek) {
            prop_assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn ap_properties(gt in prop::collection::vec(rect(), 1..6), scores in prop::collection::vec(0.01f64..1.0, 6), fp in prop::collection::vec(rect(), 0..4)) {
        let class = RegionClass::Marginalia;
        let gt_regions: Vec<TextRegion> = gt.iter().cloned().map(|p| region(class, p)).collect();
        // Exact copies of the ground truth are a perfect detector.
        let perfect: Vec<Detection> = gt.iter().zip(&scores).map(|(p, &s)| Detection::new(class, p.clone(), Some(s))).collect();
        prop_assert_eq!(average_precision_50(&gt_regions, &perfect).unwrap()[&class], Some(1.0));
        // Detections ranked below every true positive never lower AP.
        let far: Vec<Detection> = fp.iter().map(|p| Detection::new(class, p.translated(1000.0, 1000.0), Some(0.001))).collect();
        let with_fp: Vec<Detection> = perfect.iter().cloned().chain(far.iter().cloned()).collect();
        prop_assert_eq!(average_precision_50(&gt_regions, &with_fp).unwrap()[&class], Some(1.0));
        // Detections that match nothing give zero.
        if !far.is_empty() {
            prop_assert_eq!(average_precision_50(&gt_regions, &far).unwrap()[&class], Some(0.0));
        }
        // Monotone rescaling of scores keeps AP.
        let squashed: Vec<Detection> = with_fp.iter().map(|d| Detection::new(class, d.polygon.clone(), d.score.map(|s| s * s))).collect();
        prop_assert_eq!(
            average_precision_50(&gt_regions, &squashed).unwrap(),
            average_precision_50(&gt_regions, &with_fp).unwrap()
        );
    }

    #[test]
    fn reading_order_bounds(n in 0usize..30, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let gt: Vec<String> = (0..n).map(|i| format!("l{i}")).collect();
        let mut pred = gt.clone();
        pred.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let s = reading_order_score(&gt, &pred);
        prop_assert!((0.0..=1.0).contains(&s.score));
        let mut rev = gt.clone();
        rev.reverse();
        if n >= 2 {
            prop_assert_eq!(reading_order_score(&gt, &rev).score, 0.0);
        }
        prop_assert_eq!(reading_order_score(&gt, &gt).score, 1.0);
    }
}
