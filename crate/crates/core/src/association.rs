//! Frame-to-frame association: base-vector correction of backward
//! vectors, the backward and forward cost matrices, their element-wise
//! minimum, the adaptive gate and greedy matching.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::flow::DisplacementSet;
use crate::geometry::Vec2;
use crate::{Error, Result};

/// Cost for a detection that has no backward vector. Loses to any real cost.
pub const ABSENT_COST: f64 = f64::MAX;

/// Row-major `rows x cols` matrix of non-negative pixel distances.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CostMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        CostMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub track: usize,
    pub det: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchPlan {
    /// In commit order, so costs are non-decreasing.
    pub pairs: Vec<MatchPair>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_dets: Vec<usize>,
}

/// Mean matched backward displacement of the previous frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BaseVector(pub Option<Vec2>);

/// Pulls a backward vector towards the base vector by its cosine
/// agreement `w`: `w * d + |1 - w| * base`.
pub fn correct_with_base(d: Vec2, base: BaseVector) -> Vec2 {
    let Some(b) = base.0 else { return d };
    let (nd, nb) = (d.norm(), b.norm());
    if nb == 0.0 {
        return d;
    }
    if nd == 0.0 {
        return b;
    }
    let w = b.dot(d) / (nb * nd);
    d * w + b * libm::fabs(1.0 - w)
}

/// Backward cost `|p_i(t-1) - (p_j(t) + d_j)|`.
pub fn cost_ct(tracked: &[Vec2], dets: &[Vec2], backward: &DisplacementSet) -> CostMatrix {
    CostMatrix::from_fn(tracked.len(), dets.len(), |i, j| match backward.get(j) {
        Some(d) => tracked[i].distance(dets[j] + d),
        None => ABSENT_COST,
    })
}

/// Forward cost `|p_j(t) - (p_i(t-1) + d_i)|`.
pub fn cost_sort(tracked: &[Vec2], dets: &[Vec2], forward: &[Vec2]) -> CostMatrix {
    CostMatrix::from_fn(tracked.len(), dets.len(), |i, j| dets[j].distance(tracked[i] + forward[i]))
}

pub fn fuse_min(ct: &CostMatrix, sort: &CostMatrix) -> Result<CostMatrix> {
    if ct.shape() != sort.shape() {
        return Err(Error::ShapeMismatch { left: ct.shape(), right: sort.shape() });
    }
    Ok(CostMatrix {
        rows: ct.rows,
        cols: ct.cols,
        data: ct.data.iter().zip(&sort.data).map(|(a, b)| a.min(*b)).collect(),
    })
}

/// Mean nearest-neighbour distance between detection centres of one
/// frame, or `fallback` with fewer than two detections.
pub fn adaptive_threshold(centers: &[Vec2], fallback: f64) -> f64 {
    if centers.len() < 2 {
        return fallback;
    }
    let mut total = 0.0;
    for (i, a) in centers.iter().enumerate() {
        let mut nearest = f64::INFINITY;
        for (j, b) in centers.iter().enumerate() {
            if i != j {
                nearest = nearest.min(a.distance(*b));
            }
        }
        total += nearest;
    }
    total / centers.len() as f64
}

/// Commits the globally cheapest remaining entry until nothing at or below
/// `gate` is left. Ties resolve to the lowest `(row, col)`.
pub fn greedy_match(m: &CostMatrix, gate: f64) -> MatchPlan {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for r in 0..m.rows {
        for c in 0..m.cols {
            let v = m.get(r, c);
            if v <= gate {
                candidates.push((v, r, c));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut row_used = alloc::vec![false; m.rows];
    let mut col_used = alloc::vec![false; m.cols];
    let mut pairs = Vec::new();
    for (cost, r, c) in candidates {
        if row_used[r] || col_used[c] {
            continue;
        }
        row_used[r] = true;
        col_used[c] = true;
        pairs.push(MatchPair { track: r, det: c, cost });
    }
    MatchPlan {
        pairs,
        unmatched_tracks: (0..m.rows).filter(|r| !row_used[*r]).collect(),
        unmatched_dets: (0..m.cols).filter(|c| !col_used[*c]).collect(),
    }
}

/// Component-wise mean of the matched backward vectors.
pub fn update_base(matched: &[Vec2]) -> BaseVector {
    if matched.is_empty() {
        return BaseVector(None);
    }
    let mut sum = Vec2::ZERO;
    for v in matched {
        sum += *v;
    }
    BaseVector(Some(sum * (1.0 / matched.len() as f64)))
}
