//! Unit-cost edit-distance alignment.
//!
//! The dynamic program is restricted to a diagonal band `|i - j| <= k`. If the
//! banded distance is at most `k` it is exact, because every optimal path
//! stays within `distance` of the main diagonal; otherwise the band is doubled
//! and the pass repeated. Only backtrace directions are stored (one byte per
//! banded cell) with two rolling rows of costs.
//!
//! Backtrace tie-breaking, applied from the end of both sequences: diagonal
//! (match or substitute) before delete before insert. Decisions on optimal
//! cells are identical to those of an unbanded full-matrix pass.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Match,
    Substitute,
    Insert,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOp<T> {
    pub kind: EditKind,
    pub reference: Option<T>,
    pub hypothesis: Option<T>,
}

/// Tallies of edit operations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCounts {
    pub matches: u64,
    pub substitutions: u64,
    pub insertions: u64,
    pub deletions: u64,
}

impl EditCounts {
    /// Substitutions + insertions + deletions.
    pub fn errors(&self) -> u64 {
        self.substitutions + self.insertions + self.deletions
    }

    /// Length of the reference side.
    pub fn reference_len(&self) -> u64 {
        self.matches + self.substitutions + self.deletions
    }

    pub fn add(&mut self, other: &EditCounts) {
        self.matches += other.matches;
        self.substitutions += other.substitutions;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment<T> {
    ops: Vec<EditOp<T>>,
}

impl<T: Clone> Alignment<T> {
    pub fn ops(&self) -> &[EditOp<T>] {
        &self.ops
    }

    /// Number of substitutions, insertions and deletions.
    pub fn cost(&self) -> usize {
        self.ops.iter().filter(|o| o.kind != EditKind::Match).count()
    }

    pub fn counts(&self) -> EditCounts {
        let mut c = EditCounts::default();
        for op in &self.ops {
            match op.kind {
                EditKind::Match => c.matches += 1,
                EditKind::Substitute => c.substitutions += 1,
                EditKind::Insert => c.insertions += 1,
                EditKind::Delete => c.deletions += 1,
            }
        }
        c
    }

    /// Reference sequence reconstructed from the ops.
    pub fn reference(&self) -> Vec<T> {
        self.ops.iter().filter_map(|o| o.reference.clone()).collect()
    }

    /// Hypothesis sequence reconstructed from the ops.
    pub fn hypothesis(&self) -> Vec<T> {
        self.ops.iter().filter_map(|o| o.hypothesis.clone()).collect()
    }

    /// `(reference, hypothesis)` pairs of substitution ops.
    pub fn substitutions(&self) -> impl Iterator<Item = (&T, &T)> + '_ {
        self.ops
            .iter()
            .filter_map(|o| match (o.kind, &o.reference, &o.hypothesis) {
                (EditKind::Substitute, Some(r), Some(h)) => Some((r, h)),
                _ => None,
            })
    }
}

const DIAG: u8 = 0;
const UP: u8 = 1;
const LEFT: u8 = 2;
const INF: u32 = u32::MAX / 2;

struct Band {
    k: usize,
    width: usize,
    dirs: Vec<u8>,
}

/// Fills the diagonal band of half-width `k` and returns the bottom-right
/// cell. With `RECORD`, `dirs` receives one backtrace step per cell, row by
/// row; column `c` of row `i` holds `j = i + c - k`.
fn fill_band<T: PartialEq, const RECORD: bool>(a: &[T], b: &[T], k: usize, dirs: &mut Vec<u8>) -> u32 {
    let n = a.len();
    let m = b.len();
    let width = 2 * k + 1;
    if RECORD {
        dirs.clear();
        dirs.resize((n + 1) * width, LEFT);
    }
    // Offset by one so c - 1 and c + 1 are always addressable.
    let mut prev = vec![INF; width + 2];
    let mut cur = vec![INF; width + 2];
    for (c, slot) in prev[k + 1..=(2 * k).min(k + m) + 1].iter_mut().enumerate() {
        *slot = c as u32;
    }
    for i in 1..=n {
        cur.fill(INF);
        let row = i * width;
        let j_lo = i.saturating_sub(k);
        let j_hi = (i + k).min(m);
        if j_lo > j_hi {
            std::mem::swap(&mut prev, &mut cur);
            continue;
        }
        let mut j_start = j_lo;
        if j_lo == 0 {
            cur[k - i + 1] = i as u32;
            if RECORD {
                dirs[row + k - i] = UP;
            }
            j_start = 1;
        }
        if j_start <= j_hi {
            let c0 = j_start + k - i;
            let len = j_hi - j_start + 1;
            let ai = &a[i - 1];
            let (before, out) = cur.split_at_mut(c0 + 1);
            let mut left = before[c0];
            let cells = prev[c0 + 1..c0 + 1 + len]
                .iter()
                .zip(&prev[c0 + 2..c0 + 2 + len])
                .zip(&b[j_start - 1..j_hi])
                .zip(&mut out[..len])
                .enumerate();
            for (off, (((&diag, &up), bj), slot)) in cells {
                let sub = diag + u32::from(ai != bj);
                let del = up + 1;
                let ins = left + 1;
                let best = if RECORD {
                    let (best, dir) = if sub <= del && sub <= ins {
                        (sub, DIAG)
                    } else if del <= ins {
                        (del, UP)
                    } else {
                        (ins, LEFT)
                    };
                    dirs[row + c0 + off] = dir;
                    best
                } else {
                    sub.min(del).min(ins)
                };
                *slot = best;
                left = best;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m + k - n + 1]
}

/// Smallest band that provably contains an optimal path, found by doubling
/// with distance-only passes: a band result `d <= k` is exact.
fn band_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let full = a.len().max(b.len());
    let mut k = (a.len().abs_diff(b.len()) + 8).min(full);
    loop {
        let d = fill_band::<T, false>(a, b, k, &mut Vec::new()) as usize;
        if d <= k || k >= full {
            return d;
        }
        k = (k * 2).min(full);
    }
}

fn band_for<T: PartialEq>(a: &[T], b: &[T]) -> Band {
    // Any path of cost d stays within d of the main diagonal.
    let k = band_distance(a, b).max(a.len().abs_diff(b.len()));
    let mut dirs = Vec::new();
    fill_band::<T, true>(a, b, k, &mut dirs);
    Band {
        k,
        width: 2 * k + 1,
        dirs,
    }
}

/// Edit distance with unit costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    band_distance(a, b)
}

/// Minimal-cost alignment of `reference` against `hypothesis`.
pub fn align<T: PartialEq + Clone>(reference: &[T], hypothesis: &[T]) -> Alignment<T> {
    let band = band_for(reference, hypothesis);
    let mut ops = Vec::with_capacity(reference.len().max(hypothesis.len()));
    let (mut i, mut j) = (reference.len(), hypothesis.len());
    while i > 0 || j > 0 {
        let c = j + band.k - i;
        let dir = if i == 0 {
            LEFT
        } else if j == 0 {
            UP
        } else {
            band.dirs[i * band.width + c]
        };
        match dir {
            DIAG => {
                let (r, h) = (&reference[i - 1], &hypothesis[j - 1]);
                let kind = if r == h { EditKind::Match } else { EditKind::Substitute };
                ops.push(EditOp {
                    kind,
                    reference: Some(r.clone()),
                    hypothesis: Some(h.clone()),
                });
                i -= 1;
                j -= 1;
            }
            UP => {
                ops.push(EditOp {
                    kind: EditKind::Delete,
                    reference: Some(reference[i - 1].clone()),
                    hypothesis: None,
                });
                i -= 1;
            }
            _ => {
                ops.push(EditOp {
                    kind: EditKind::Insert,
                    reference: None,
                    hypothesis: Some(hypothesis[j - 1].clone()),
                });
                j -= 1;
            }
        }
    }
    ops.reverse();
    Alignment { ops }
}

/// Codepoint-level alignment.
pub fn align_chars(reference: &str, hypothesis: &str) -> Alignment<char> {
    let r: Vec<char> = reference.chars().collect();
    let h: Vec<char> = hypothesis.chars().collect();
    align(&r, &h)
}
