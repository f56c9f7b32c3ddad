//! Automatic choice of the regularization weight from the extremum-count
//! curve: the count drops fast while noise extremums are being averaged out
//! and slowly once signal structure starts to vanish, so the selected weight
//! sits at the knee between the two regimes, located through discrete
//! log-scale derivatives of the count.

use serde::Serialize;

use crate::error::{TvError, TvResult};
use crate::path::PathResult;

/// Typical range of the log-scale step; the automatic choice is clamped to
/// it so a single huge gap cannot blow the derivatives up.
const LOG10_Q_MIN: f64 = 0.5;
const LOG10_Q_MAX: f64 = 1.0;
const LOG10_Q_FALLBACK: f64 = 0.75;

/// Step function of the extremum count over `lambda`, with optional
/// discrete-derivative columns per breakpoint.
#[derive(Debug, Clone)]
pub struct GLadder {
    /// Strictly increasing breakpoints where the count drops.
    pub breakpoints: Vec<f64>,
    /// Count on `[breakpoints[i], breakpoints[i+1])`; the last entry is 1.
    pub g_values: Vec<i64>,
    /// Count below the first breakpoint.
    pub g_below: i64,
    /// Log-scale step used for the derivative columns, once computed.
    pub q: Option<f64>,
    pub dg_plus: Vec<i64>,
    pub dg_minus: Vec<i64>,
    pub d2g: Vec<i64>,
    pub d4g: Vec<i64>,
}

impl GLadder {
    /// Extremum count at `x`; a breakpoint belongs to the merged side.
    pub fn g_at(&self, x: f64) -> i64 {
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        if idx == 0 {
            self.g_below
        } else {
            self.g_values[idx - 1]
        }
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }
}

/// Accumulates the path's per-junction deltas into the count step function.
/// Junctions sharing one merge value fold into a single breakpoint; values
/// whose deltas cancel out do not create a step.
pub fn build_g_ladder(path: &PathResult) -> GLadder {
    let mut events: Vec<(f64, i64)> = path
        .lambda
        .iter()
        .cloned()
        .zip(path.dg.iter().cloned())
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    ladder_from_sorted_events(events.into_iter())
}

/// Same accumulation over events already sorted by merge value; the online
/// solver feeds its incrementally maintained lists through here.
pub(crate) fn ladder_from_sorted_events<I: Iterator<Item = (f64, i64)>>(events: I) -> GLadder {
    let mut breakpoints = Vec::new();
    let mut sums: Vec<i64> = Vec::new();
    for (lambda, dg) in events {
        match breakpoints.last() {
            Some(&last) if last == lambda => *sums.last_mut().unwrap() += dg,
            _ => {
                breakpoints.push(lambda);
                sums.push(dg);
            }
        }
    }
    let kept: Vec<(f64, i64)> = breakpoints
        .into_iter()
        .zip(sums)
        .filter(|&(_, s)| s != 0)
        .collect();

    let m = kept.len();
    let mut g_values = vec![0i64; m];
    let mut g = 1i64;
    for i in (0..m).rev() {
        g_values[i] = g;
        g -= kept[i].1;
    }
    GLadder {
        breakpoints: kept.iter().map(|&(l, _)| l).collect(),
        g_values,
        g_below: g,
        q: None,
        dg_plus: Vec::new(),
        dg_minus: Vec::new(),
        d2g: Vec::new(),
        d4g: Vec::new(),
    }
}

/// Fills the derivative columns of the ladder for the given log-scale step.
///
/// Per breakpoint: `dg_plus = g(q*l) - g(l)`, `dg_minus = g(l) - g(l/q)`,
/// `d2g = dg_plus - dg_minus`, and `d4g` is the second difference of `d2g`
/// along the ladder with indices past the end clamped to the last entry.
pub fn discrete_derivatives(ladder: &GLadder, q: f64) -> TvResult<GLadder> {
    if !(q > 1.0) {
        return Err(TvError::InvalidQ { q });
    }
    let mut out = ladder.clone();
    let m = ladder.len();
    out.q = Some(q);
    out.dg_plus = Vec::with_capacity(m);
    out.dg_minus = Vec::with_capacity(m);
    out.d2g = Vec::with_capacity(m);
    for &l in &ladder.breakpoints {
        let here = ladder.g_at(l);
        let plus = ladder.g_at(q * l) - here;
        let minus = here - ladder.g_at(l / q);
        out.dg_plus.push(plus);
        out.dg_minus.push(minus);
        out.d2g.push(plus - minus);
    }
    let clamp = |i: usize| i.min(m - 1);
    out.d4g = (0..m)
        .map(|i| out.d2g[clamp(i + 2)] - 2 * out.d2g[clamp(i + 1)] + out.d2g[i])
        .collect();
    Ok(out)
}

/// Automatic log-scale step: the largest step of the ladder in log10,
/// ignoring the two first steps, clamped to the typical range. Falls back to
/// the middle of the range when fewer than three steps exist.
pub fn auto_q(ladder: &GLadder) -> f64 {
    let bp = &ladder.breakpoints;
    let mut largest: Option<f64> = None;
    for i in 2..bp.len().saturating_sub(1) {
        let step = (bp[i + 1] / bp[i]).log10();
        largest = Some(largest.map_or(step, |l: f64| l.max(step)));
    }
    let exponent = match largest {
        Some(step) => step.clamp(LOG10_Q_MIN, LOG10_Q_MAX),
        None => LOG10_Q_FALLBACK,
    };
    10f64.powf(exponent)
}

/// Chosen weight together with the diagnostics that led to it.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    pub lambda_ours: f64,
    pub lambda_trans: f64,
    pub q: f64,
    pub ladder: LadderView,
    /// Derivative columns, index-aligned with `ladder.lambda`.
    #[serde(skip)]
    pub d2g: Vec<i64>,
    #[serde(skip)]
    pub d4g: Vec<i64>,
}

/// Ladder in the documented JSON layout.
#[derive(Debug, Clone, Serialize)]
pub struct LadderView {
    pub lambda: Vec<f64>,
    pub g: Vec<i64>,
}

/// Selects the weight: the transitory point is the breakpoint maximizing the
/// discrete second derivative, and the final choice minimizes the fourth
/// difference among breakpoints at or beyond it. Ties resolve to the
/// smallest weight. `q` defaults to [`auto_q`].
pub fn select_lambda(ladder: &GLadder, q: Option<f64>) -> TvResult<SelectionReport> {
    if ladder.is_empty() {
        return Err(TvError::SignalTooShort);
    }
    let q = q.unwrap_or_else(|| auto_q(ladder));
    let ladder = discrete_derivatives(ladder, q)?;
    let (trans_idx, ours_idx) = selection_indices(&ladder.d2g);
    Ok(SelectionReport {
        lambda_ours: ladder.breakpoints[ours_idx],
        lambda_trans: ladder.breakpoints[trans_idx],
        q,
        ladder: LadderView {
            lambda: ladder.breakpoints.clone(),
            g: ladder.g_values.clone(),
        },
        d2g: ladder.d2g,
        d4g: ladder.d4g,
    })
}

/// Selection without the report: returns `(lambda_ours, lambda_trans)`. The
/// online solver runs this every push, so it avoids cloning the ladder and
/// evaluates the count at `q*l` and `l/q` with two sweeping pointers instead
/// of per-breakpoint binary searches.
pub fn select_lambda_value(ladder: &GLadder, q: Option<f64>) -> TvResult<(f64, f64)> {
    if ladder.is_empty() {
        return Err(TvError::SignalTooShort);
    }
    let q = q.unwrap_or_else(|| auto_q(ladder));
    if !(q > 1.0) {
        return Err(TvError::InvalidQ { q });
    }
    let bp = &ladder.breakpoints;
    let m = bp.len();
    // g at a point covered by `idx` breakpoints.
    let g_of = |idx: usize| {
        if idx == 0 {
            ladder.g_below
        } else {
            ladder.g_values[idx - 1]
        }
    };
    let mut up = 0usize;
    let mut down = 0usize;
    let mut d2g = Vec::with_capacity(m);
    for i in 0..m {
        while up < m && bp[up] <= q * bp[i] {
            up += 1;
        }
        while down < m && bp[down] <= bp[i] / q {
            down += 1;
        }
        let here = ladder.g_values[i];
        d2g.push((g_of(up) - here) - (here - g_of(down)));
    }
    let (trans_idx, ours_idx) = selection_indices(&d2g);
    Ok((bp[ours_idx], bp[trans_idx]))
}

/// Argmax of the second difference and argmin of its second difference over
/// the right tail, both tie-broken toward smaller weights.
fn selection_indices(d2g: &[i64]) -> (usize, usize) {
    let m = d2g.len();
    let trans_idx = d2g
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("non-empty ladder");
    let clamp = |i: usize| i.min(m - 1);
    let d4 = |i: usize| d2g[clamp(i + 2)] - 2 * d2g[clamp(i + 1)] + d2g[i];
    let ours_idx = (trans_idx..m)
        .min_by(|&a, &b| d4(a).cmp(&d4(b)).then(a.cmp(&b)))
        .expect("candidate set contains at least the transitory point");
    (trans_idx, ours_idx)
}
