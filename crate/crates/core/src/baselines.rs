//! Reference weight selectors and evaluation metrics: SURE, the adaptive
//! universal threshold, K-fold cross-validation, a robust noise estimate and
//! the reconstruction error against a known clean signal.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{TvError, TvResult};
use crate::path::PathResult;
use crate::restore::reconstruct;
use crate::signal::{build_weighted_signal, collapse_constant_pieces, WeightedSignal};

/// Which rule produced a selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorMethod {
    Ours,
    Aut,
    Sure,
    Cv,
    Oracle,
}

/// A chosen weight together with what the selector looked at.
#[derive(Debug, Clone, Serialize)]
pub struct SelectorResult {
    pub lambda: f64,
    pub method: SelectorMethod,
    pub diagnostics: Diagnostics,
}

impl SelectorResult {
    /// Criterion curve as `lambda,criterion` CSV lines; empty for selectors
    /// that do not scan a grid.
    pub fn criterion_csv(&self) -> String {
        let mut out = String::from("lambda,criterion\n");
        for (l, c) in self
            .diagnostics
            .candidates
            .iter()
            .zip(&self.diagnostics.criterion)
        {
            out.push_str(&format!(
                "{},{}\n",
                crate::simbench::fmt_sig(*l),
                crate::simbench::fmt_sig(*c)
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    /// Candidate grid, ascending, when the rule scanned one.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<f64>,
    /// Criterion value per candidate, index-aligned.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub criterion: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_hat: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_pre: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Per-sample restoration on the original grid, together with the segment
/// count. Collapsed runs are expanded back before use.
fn expanded_restoration(
    ws: &WeightedSignal,
    path: &PathResult,
    lambda: f64,
) -> TvResult<(Vec<f64>, usize)> {
    let r = reconstruct(ws, path, lambda)?;
    Ok((ws.expand_to_original(&r.expand()), r.k()))
}

/// Stein's unbiased risk estimate over a candidate grid. The fidelity term
/// is the plain unweighted squared residual; the degrees of freedom are the
/// segment count of the restoration.
pub fn sure_select(
    ws: &WeightedSignal,
    path: &PathResult,
    sigma: f64,
    candidates: &[f64],
) -> TvResult<SelectorResult> {
    if !(sigma > 0.0) {
        return Err(TvError::InvalidSigma { sigma });
    }
    if candidates.is_empty() {
        return Err(TvError::EmptyCandidates);
    }
    let y = ws.expand_to_original(&ws.y);
    let n = y.len();
    let mut grid: Vec<f64> = candidates.to_vec();
    grid.sort_by(f64::total_cmp);

    let mut criterion = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &lambda in &grid {
        let (u, k) = expanded_restoration(ws, path, lambda)?;
        let rss: f64 = y.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum();
        let value = rss + 2.0 * sigma * sigma * k as f64 - n as f64 * sigma * sigma;
        criterion.push(value);
        if best.is_none_or(|(v, _)| value < v) {
            best = Some((value, lambda));
        }
    }

    let mut notes = Vec::new();
    if ws.tau.windows(2).any(|w| w[0] != w[1]) {
        notes.push("non-uniform weights: SURE residual is unweighted".to_string());
    }
    Ok(SelectorResult {
        lambda: best.expect("grid is non-empty").1,
        method: SelectorMethod::Sure,
        diagnostics: Diagnostics {
            candidates: grid,
            criterion,
            sigma: Some(sigma),
            notes,
            ..Diagnostics::default()
        },
    })
}

/// The universal-threshold pre-choice entering the adaptive rule, on the
/// rule's own scale (an objective with a halved fidelity term).
pub fn aut_lambda_n(sigma: f64, n: usize) -> f64 {
    sigma / 2.0 * ((n as f64) * (n as f64).ln().ln()).sqrt()
}

/// Weight on this crate's objective scale equivalent to a threshold on the
/// rule's scale. The rule is calibrated for `.5 |y-u|^2 + lambda TV`, whose
/// weights double when the fidelity term is not halved.
const AUT_SCALE: f64 = 2.0;

/// Adaptive universal threshold: restore once at the universal pre-choice,
/// read off the segment count, and rescale the threshold with it.
pub fn aut_select(ws: &WeightedSignal, path: &PathResult, sigma: f64) -> TvResult<SelectorResult> {
    if !(sigma > 0.0) {
        return Err(TvError::InvalidSigma { sigma });
    }
    let n = ws.original_len();
    if n < 3 {
        return Err(TvError::TooFewSamples { min: 3, got: n });
    }
    let lambda_n = aut_lambda_n(sigma, n);
    let (_, k_hat) = expanded_restoration(ws, path, AUT_SCALE * lambda_n)?;
    let ratio = n as f64 / k_hat as f64;

    let mut notes = Vec::new();
    let lambda = if ratio > std::f64::consts::E {
        AUT_SCALE * sigma / 2.0 * (ratio * ratio.ln().ln()).sqrt()
    } else {
        notes.push(format!(
            "n/K = {ratio:.3} <= e leaves the threshold undefined; falling back to the pre-choice"
        ));
        AUT_SCALE * lambda_n
    };
    Ok(SelectorResult {
        lambda,
        method: SelectorMethod::Aut,
        diagnostics: Diagnostics {
            k_hat: Some(k_hat),
            sigma: Some(sigma),
            lambda_pre: Some(lambda_n),
            notes,
            ..Diagnostics::default()
        },
    })
}

/// K-fold cross-validation with a seeded random partition. Each fold's model
/// is fitted on the remaining samples (weights recomputed on the reduced
/// grid) and predicts held-out times by linear interpolation between the
/// retained samples, constant beyond the ends.
pub fn cv_select(
    ws: &WeightedSignal,
    k_folds: usize,
    candidates: &[f64],
    seed: u64,
) -> TvResult<SelectorResult> {
    let n = ws.len();
    if k_folds < 2 || n < 2 * k_folds {
        return Err(TvError::InvalidFolds { folds: k_folds, n });
    }
    if candidates.is_empty() {
        return Err(TvError::EmptyCandidates);
    }
    let mut grid: Vec<f64> = candidates.to_vec();
    grid.sort_by(f64::total_cmp);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k_folds;
    }

    let mut total = vec![0.0f64; grid.len()];
    for fold in 0..k_folds {
        let mut t_train = Vec::with_capacity(n);
        let mut y_train = Vec::with_capacity(n);
        let mut t_test = Vec::new();
        let mut y_test = Vec::new();
        for (i, &assigned) in fold_of.iter().enumerate() {
            if assigned == fold {
                t_test.push(ws.t[i]);
                y_test.push(ws.y[i]);
            } else {
                t_train.push(ws.t[i]);
                y_train.push(ws.y[i]);
            }
        }
        let train = collapse_constant_pieces(&build_weighted_signal(&t_train, &y_train)?);
        let train_path = crate::path::solve_path(&train);

        for (ci, &lambda) in grid.iter().enumerate() {
            let r = reconstruct(&train, &train_path, lambda)?;
            let u = train.expand_to_original(&r.expand());
            let err: f64 = t_test
                .iter()
                .zip(&y_test)
                .map(|(&tq, &yq)| {
                    let p = interpolate(&t_train, &u, tq);
                    (yq - p) * (yq - p)
                })
                .sum();
            total[ci] += err / t_test.len() as f64;
        }
    }

    let mut best = 0usize;
    for ci in 1..grid.len() {
        if total[ci] < total[best] {
            best = ci;
        }
    }
    Ok(SelectorResult {
        lambda: grid[best],
        method: SelectorMethod::Cv,
        diagnostics: Diagnostics {
            candidates: grid.clone(),
            criterion: total,
            ..Diagnostics::default()
        },
    })
}

/// Linear interpolation of `(ts, vs)` at `tq`, constant beyond the ends.
fn interpolate(ts: &[f64], vs: &[f64], tq: f64) -> f64 {
    if tq <= ts[0] {
        return vs[0];
    }
    if tq >= *ts.last().unwrap() {
        return *vs.last().unwrap();
    }
    let hi = ts.partition_point(|&t| t < tq);
    let (t0, t1) = (ts[hi - 1], ts[hi]);
    let w = (tq - t0) / (t1 - t0);
    vs[hi - 1] + w * (vs[hi] - vs[hi - 1])
}

/// Robust noise estimate: median absolute first difference rescaled for
/// Gaussian noise.
pub fn estimate_sigma(y: &[f64]) -> TvResult<f64> {
    if y.len() < 2 {
        return Err(TvError::TooFewSamples { min: 2, got: y.len() });
    }
    let mut diffs: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    diffs.sort_by(f64::total_cmp);
    let m = diffs.len();
    let median = if m % 2 == 1 {
        diffs[m / 2]
    } else {
        0.5 * (diffs[m / 2 - 1] + diffs[m / 2])
    };
    Ok(median / (0.6745 * std::f64::consts::SQRT_2))
}

/// Mean squared error between the clean signal and a restoration.
pub fn restoration_error(u_net: &[f64], u_star: &[f64]) -> TvResult<f64> {
    if u_net.len() != u_star.len() {
        return Err(TvError::LengthMismatch {
            t_len: u_net.len(),
            y_len: u_star.len(),
        });
    }
    let n = u_net.len() as f64;
    Ok(u_net
        .iter()
        .zip(u_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Error difference between two weight choices under the same risk curve.
pub fn compare_selectors<F: Fn(f64) -> f64>(lambda_1: f64, lambda_2: f64, risk: F) -> f64 {
    risk(lambda_1) - risk(lambda_2)
}

/// One representative candidate per distinct model along the path: the
/// geometric midpoints of consecutive distinct breakpoints plus one point
/// below the first and one above the last.
pub fn breakpoint_candidate_grid(path: &PathResult) -> Vec<f64> {
    let mut distinct: Vec<f64> = path.lambda.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.is_empty() {
        return vec![0.0];
    }
    let mut grid = Vec::with_capacity(distinct.len() + 1);
    grid.push(distinct[0] / 2.0);
    for pair in distinct.windows(2) {
        grid.push((pair[0] * pair[1]).sqrt());
    }
    grid.push(2.0 * distinct[distinct.len() - 1]);
    grid
}

/// Exact risk minimizer over the whole path. Within each breakpoint interval
/// the restoration moves linearly in `lambda`, so the risk restricted to the
/// interval is a quadratic minimized in closed form; the best interval wins.
/// Returns `(lambda_op, min risk)`.
pub fn optimal_lambda(
    ws: &WeightedSignal,
    path: &PathResult,
    u_net: &[f64],
) -> TvResult<(f64, f64)> {
    assert_eq!(u_net.len(), ws.original_len());
    let n = u_net.len() as f64;
    let mut distinct: Vec<f64> = path.lambda.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();

    // Interval starts; each structure is attained at its left edge thanks to
    // the merged-side convention at breakpoints.
    let mut starts = vec![0.0];
    starts.extend_from_slice(&distinct);

    let mut best: Option<(f64, f64)> = None;
    for (idx, &lo) in starts.iter().enumerate() {
        let hi = starts.get(idx + 1).copied();
        let r = reconstruct(ws, path, lo)?;

        let fences_orig: Vec<usize> = match &ws.index_map {
            Some(map) => r.fences.iter().map(|&f| map[f]).collect(),
            None => r.fences.clone(),
        };
        let mut sum_bb = 0.0;
        let mut sum_eb = 0.0;
        let mut sum_ee = 0.0;
        for j in 0..r.k() {
            let beta = f64::from(r.signs[j + 1] - r.signs[j]) / (2.0 * r.seg_weights[j]);
            for &target in &u_net[fences_orig[j]..fences_orig[j + 1]] {
                let e = r.seg_means[j] - target;
                sum_bb += beta * beta;
                sum_eb += e * beta;
                sum_ee += e * e;
            }
        }

        // risk(lambda) = (sum_ee + 2 lambda sum_eb + lambda^2 sum_bb) / n
        let candidate = if sum_bb > 0.0 {
            let unconstrained = -sum_eb / sum_bb;
            match hi {
                Some(h) => unconstrained.clamp(lo, h),
                None => unconstrained.max(lo),
            }
        } else {
            lo
        };
        let risk = (sum_ee + 2.0 * candidate * sum_eb + candidate * candidate * sum_bb) / n;
        if best.is_none_or(|(r0, _)| risk < r0) {
            best = Some((risk, candidate));
        }
    }
    let (risk, lambda) = best.expect("at least the zero interval exists");
    Ok((lambda, risk))
}
