//! Reconstruction of the denoised signal and its extremum count for any
//! `lambda`, given a solved path.

use serde::Serialize;

use crate::error::{TvError, TvResult};
use crate::path::{sign, PathResult};
use crate::signal::WeightedSignal;

/// Piecewise-constant restoration at a fixed `lambda`.
#[derive(Debug, Clone)]
pub struct Restoration {
    /// Cut positions: segment `j` covers samples `fences[j]..fences[j+1]`.
    /// Always starts at 0 and ends at the sample count.
    pub fences: Vec<usize>,
    /// Restored level of each segment; consecutive levels differ.
    pub levels: Vec<f64>,
    /// Total weight of each segment.
    pub seg_weights: Vec<f64>,
    /// Weighted mean of the data inside each segment.
    pub seg_means: Vec<f64>,
    /// Sign of the level jump after each segment, with zero sentinels at
    /// both ends (`signs.len() == levels.len() + 1`).
    pub signs: Vec<i8>,
    /// The weight this restoration was computed for.
    pub lambda: f64,
}

/// Segment summary in the documented JSON layout.
#[derive(Debug, Serialize)]
pub struct SegmentSummary {
    pub breaks: Vec<usize>,
    pub levels: Vec<f64>,
    pub lambda: f64,
}

impl Restoration {
    /// Number of segments.
    pub fn k(&self) -> usize {
        self.levels.len()
    }

    /// First sample index of segment `j`.
    pub fn segment_start(&self, j: usize) -> usize {
        self.fences[j]
    }

    /// Per-sample restored values on the (possibly collapsed) grid the path
    /// was solved on.
    pub fn expand(&self) -> Vec<f64> {
        let n = *self.fences.last().expect("fences are never empty");
        let mut u = Vec::with_capacity(n);
        for (j, &level) in self.levels.iter().enumerate() {
            u.extend(std::iter::repeat_n(level, self.fences[j + 1] - self.fences[j]));
        }
        u
    }

    pub fn summary(&self) -> SegmentSummary {
        SegmentSummary {
            breaks: self.fences.clone(),
            levels: self.levels.clone(),
            lambda: self.lambda,
        }
    }
}

/// Restores the signal at `lambda`: segments are the maximal runs between
/// junctions that merge strictly above `lambda`, levels are the segment
/// means shifted by `lambda` times the segment slope. At a breakpoint the
/// merged (coarser) structure is returned.
pub fn reconstruct(ws: &WeightedSignal, path: &PathResult, lambda: f64) -> TvResult<Restoration> {
    if lambda < 0.0 {
        return Err(TvError::NegativeLambda { lambda });
    }
    assert_eq!(ws.len(), path.n, "path was solved on a different signal");
    let mut fences = Vec::with_capacity(path.n + 1);
    fences.push(0);
    for (j, &l) in path.lambda.iter().enumerate() {
        if l > lambda {
            fences.push(j + 1);
        }
    }
    fences.push(ws.len());
    Ok(reconstruct_from_fences(ws, fences, lambda))
}

/// Builds a restoration from an explicit cut set. Shared with the online
/// solver, which derives its cuts from an assembled path.
pub(crate) fn reconstruct_from_fences(
    ws: &WeightedSignal,
    fences: Vec<usize>,
    lambda: f64,
) -> Restoration {
    let k = fences.len() - 1;
    let mut seg_weights = Vec::with_capacity(k);
    let mut seg_means = Vec::with_capacity(k);
    for seg in fences.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let mut weight = 0.0;
        let mut moment = 0.0;
        for i in lo..hi {
            weight += ws.tau[i];
            moment += ws.tau[i] * ws.y[i];
        }
        seg_weights.push(weight);
        seg_means.push(moment / weight);
    }

    // The jump sign at a surviving junction never changes along the path, so
    // it can be read straight from the data at the cut position.
    let mut signs = Vec::with_capacity(k + 1);
    signs.push(0);
    for &f in &fences[1..k] {
        signs.push(sign(ws.y[f] - ws.y[f - 1]));
    }
    signs.push(0);

    let levels: Vec<f64> = (0..k)
        .map(|j| {
            let beta = f64::from(signs[j + 1] - signs[j]) / (2.0 * seg_weights[j]);
            seg_means[j] + lambda * beta
        })
        .collect();

    Restoration {
        fences,
        levels,
        seg_weights,
        seg_means,
        signs,
        lambda,
    }
}

/// Extremum count at `lambda`, accumulated from the path deltas. Junctions
/// merging exactly at `lambda` count as already merged.
pub fn g_of_lambda(path: &PathResult, lambda: f64) -> i64 {
    let drop: i64 = path
        .lambda
        .iter()
        .zip(&path.dg)
        .filter(|(&l, _)| l > lambda)
        .map(|(_, &d)| d)
        .sum();
    1 - drop
}

/// Total variation of the restored levels.
pub fn total_variation(r: &Restoration) -> f64 {
    r.levels.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}
