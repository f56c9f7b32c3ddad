//! Brute-force reference minimizer of the weighted TV objective.
//!
//! Solves `min_u sum tau_i (y_i - u_i)^2 + lambda * sum |u_{i+1} - u_i|`
//! through its dual: `u = y - (D^T p) / (2 tau)` with the dual vector `p`
//! box-constrained to `[-lambda, lambda]^(n-1)`. Each coordinate update of
//! the resulting quadratic is a closed-form clip, so plain cyclic descent
//! converges without a line search.
//!
//! This is deliberately slow and simple. It exists to validate the path
//! solver and is only reachable from tests and the verification subcommand.

use crate::error::{TvError, TvResult};
use crate::signal::WeightedSignal;

/// Maximum number of full sweeps before giving up.
const MAX_SWEEPS: usize = 1_000_000;

/// Minimizes the TV objective for one `lambda` by dual coordinate descent.
///
/// Iterates until the sup-norm change of the primal iterate over one sweep
/// drops below `tol`. Returns the primal minimizer.
pub fn oracle_tv(ws: &WeightedSignal, lambda: f64, tol: f64) -> TvResult<Vec<f64>> {
    if lambda < 0.0 {
        return Err(TvError::NegativeLambda { lambda });
    }
    assert!(tol > 0.0, "tolerance must be positive");
    let n = ws.len();
    if n == 1 || lambda == 0.0 {
        return Ok(ws.y.clone());
    }

    let y = &ws.y;
    // half_inv[i] = 1 / (2 tau_i), the step the adjoint difference takes.
    let half_inv: Vec<f64> = ws.tau.iter().map(|&t| 1.0 / (2.0 * t)).collect();
    let mut p = vec![0.0; n - 1];

    for _sweep in 0..MAX_SWEEPS {
        let mut max_du: f64 = 0.0;
        for k in 0..n - 1 {
            let p_left = if k > 0 { p[k - 1] } else { 0.0 };
            let p_right = if k + 2 < n { p[k + 1] } else { 0.0 };
            // Unconstrained minimizer of the dual restricted to p[k].
            let denom = half_inv[k] + half_inv[k + 1];
            let target =
                ((y[k + 1] - y[k]) + p_left * half_inv[k] + p_right * half_inv[k + 1]) / denom;
            let clipped = target.clamp(-lambda, lambda);
            let dp = clipped - p[k];
            if dp != 0.0 {
                p[k] = clipped;
                // p[k] feeds u[k] and u[k+1]; track the larger move.
                let du = dp.abs() * half_inv[k].max(half_inv[k + 1]);
                max_du = max_du.max(du);
            }
        }
        if max_du < tol {
            return Ok(primal_from_dual(ws, &p, &half_inv));
        }
    }
    Err(TvError::OracleDiverged {
        max_sweeps: MAX_SWEEPS,
    })
}

fn primal_from_dual(ws: &WeightedSignal, p: &[f64], half_inv: &[f64]) -> Vec<f64> {
    let n = ws.len();
    let mut u = Vec::with_capacity(n);
    for i in 0..n {
        let p_left = if i > 0 { p[i - 1] } else { 0.0 };
        let p_right = if i < n - 1 { p[i] } else { 0.0 };
        u.push(ws.y[i] - (p_left - p_right) * half_inv[i]);
    }
    u
}

/// Value of the primal objective at `u`.
pub fn objective(ws: &WeightedSignal, u: &[f64], lambda: f64) -> f64 {
    let fidelity: f64 = ws
        .tau
        .iter()
        .zip(&ws.y)
        .zip(u)
        .map(|((&t, &y), &v)| t * (y - v) * (y - v))
        .sum();
    let tv: f64 = u.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    fidelity + lambda * tv
}

/// Counts maximal runs of values equal up to `tol`.
fn segment_count(u: &[f64], tol: f64) -> usize {
    1 + u.windows(2).filter(|w| (w[1] - w[0]).abs() > tol).count()
}

/// Localizes the lambda values where the oracle's segment count changes.
///
/// Sweeps a geometric grid with `grid_density` points per decade, then
/// bisects every cell across which the count drops until each breakpoint is
/// pinned to relative width 1e-6. Multiple breakpoints inside one cell are
/// found one at a time, smallest first.
pub fn oracle_breakpoints(ws: &WeightedSignal, grid_density: usize) -> TvResult<Vec<f64>> {
    let n = ws.len();
    if n <= 1 {
        return Ok(Vec::new());
    }
    let tol = 1e-8;
    let solve_tol = 1e-11;
    let range = ws.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - ws.y.iter().cloned().fold(f64::INFINITY, f64::min);
    if range == 0.0 {
        return Ok(Vec::new());
    }
    let total_weight: f64 = ws.tau.iter().sum();
    // Everything has merged well before range * total weight.
    let hi = range * total_weight;
    let lo = hi * 1e-9;

    let count_at = |lambda: f64| -> TvResult<usize> {
        Ok(segment_count(&oracle_tv(ws, lambda, solve_tol)?, tol))
    };

    let decades = (hi / lo).log10();
    let cells = (decades * grid_density as f64).ceil() as usize;
    let ratio = (hi / lo).powf(1.0 / cells as f64);

    let mut breakpoints = Vec::new();
    let mut grid = Vec::with_capacity(cells + 2);
    grid.push(0.0);
    let mut v = lo;
    for _ in 0..=cells {
        grid.push(v);
        v *= ratio;
    }

    for cell in grid.windows(2) {
        let (mut a, b) = (cell[0], cell[1]);
        let mut k_a = count_at(a)?;
        let k_b = count_at(b)?;
        // Peel breakpoints off the cell one at a time.
        while k_a > k_b {
            let (mut x, mut z) = (a, b);
            // Invariant: count(x) == k_a > count(z).
            while z - x > 1e-6 * z.max(1e-300) {
                let mid = if x == 0.0 { z / 2.0 } else { (x * z).sqrt() };
                if count_at(mid)? == k_a {
                    x = mid;
                } else {
                    z = mid;
                }
            }
            breakpoints.push(0.5 * (x + z));
            a = z;
            k_a = count_at(a)?;
        }
    }
    Ok(breakpoints)
}
