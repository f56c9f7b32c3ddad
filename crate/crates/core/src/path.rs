//! Offline solution-path solver.
//!
//! Starting from `lambda = 0`, where every sample is its own segment, the
//! solver tracks for every junction the `lambda` at which the two adjacent
//! segments would meet, merges the closest pair, and repairs the estimates
//! of the affected neighbours. The output records per junction `i` the merge
//! value `lambda[i]` of samples `i` and `i+1` and the change `dg[i]` in the
//! number of extremal segments caused by that merge.
//!
//! Segment levels are linear in `lambda` between merges: a segment covering
//! samples `lo..=hi` sits at `mean(lo..=hi) + lambda * beta`, with `beta`
//! determined by the signs of the level jumps at its two ends. Those signs
//! never flip while a junction is alive, so they are read once from the raw
//! data. Means come from prefix sums, which keeps every estimate anchored to
//! the data instead of accumulating increments.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::signal::WeightedSignal;

/// Junctions whose merge estimates lie within this relative distance of the
/// queue minimum are merged as one simultaneous group.
const TIE_RTOL: f64 = 1e-12;

/// Complete solution path of a signal.
///
/// Serializes to `{"n": ..., "lambda": [...], "dg": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    /// Number of samples the path was computed from.
    pub n: usize,
    /// `lambda[i]` is the weight at which samples `i` and `i+1` merge.
    pub lambda: Vec<f64>,
    /// Change of the extremal-segment count at each junction's merge. Only
    /// sums over junctions sharing one merge value are meaningful.
    pub dg: Vec<i64>,
}

impl PathResult {
    /// Largest merge value; reconstructing at or above it yields the global
    /// weighted mean.
    pub fn max_lambda(&self) -> Option<f64> {
        self.lambda.iter().cloned().reduce(f64::max)
    }
}

/// Slope of each segment level as a function of lambda.
///
/// `signs` carries one entry per junction plus zero sentinels at both ends
/// (`signs.len() == weights.len() + 1`); `weights` holds the segment weights.
pub fn compute_beta(signs: &[i8], weights: &[f64]) -> Vec<f64> {
    assert_eq!(signs.len(), weights.len() + 1);
    weights
        .iter()
        .enumerate()
        .map(|(j, &w)| f64::from(signs[j + 1] - signs[j]) / (2.0 * w))
        .collect()
}

/// Change of the extremum count when two segments merge, from the signs of
/// the level jumps around the merging junction (`s_mid`) and at the outer
/// boundaries of the pair (`s_left`, `s_right`, zero at signal ends).
pub fn delta_g_for_merge(s_left: i8, s_mid: i8, s_right: i8) -> i64 {
    assert!(s_mid != 0, "a live junction cannot carry a zero sign");
    if s_left * s_right != 0 {
        -i64::from((s_left + s_right).abs())
    } else if (s_left + s_mid + s_right).abs() < 2 {
        -1
    } else {
        0
    }
}

/// A segment is extremal when the level jumps at its two ends disagree. A
/// lone segment (both boundary signs zero) counts as one extremum, matching
/// the convention that the count bottoms out at 1.
fn is_extremal(s_left: i8, s_right: i8) -> bool {
    s_left != s_right || (s_left == 0 && s_right == 0)
}

/// Number of extremal segments of a level sequence with distinct neighbours.
pub fn count_extremal_segments(levels: &[f64]) -> i64 {
    let k = levels.len();
    if k == 0 {
        return 0;
    }
    let sign_at = |j: usize| -> i8 {
        // Sign of the jump after segment j; zero beyond the ends.
        if j == 0 || j == k {
            0
        } else {
            sign(levels[j] - levels[j - 1])
        }
    };
    (0..k)
        .filter(|&j| is_extremal(sign_at(j), sign_at(j + 1)))
        .count() as i64
}

pub(crate) fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Queue key ordered by merge estimate, then junction index, then insertion
/// generation. Stale generations are skipped on pop.
#[derive(Debug, Clone, Copy, PartialEq)]
struct MergeKey {
    eta: f64,
    junction: u32,
    generation: u32,
}

impl Eq for MergeKey {}

impl Ord for MergeKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.eta
            .total_cmp(&other.eta)
            .then(self.junction.cmp(&other.junction))
            .then(self.generation.cmp(&other.generation))
    }
}

impl PartialOrd for MergeKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

const NO_SEG: usize = usize::MAX;

/// At or below this size the next merge is found by scanning the estimate
/// array instead of keeping the ordered queue; the event order is identical
/// and the constant factor much smaller. The online solver's tail and coarse
/// re-solves live almost entirely in this regime.
const SCAN_SOLVE_LEN: usize = 64;

/// Live solver state. Segments are addressed by the index of their rightmost
/// sample; a merge stores the union at the right member's slot, so junction
/// `j` is always the junction after the segment stored at slot `j`.
struct SolverState {
    /// Prefix sums of `tau` and `tau * y`.
    weight_pre: Vec<f64>,
    moment_pre: Vec<f64>,
    /// Sign of `y[j+1] - y[j]` per junction; invariant along the path.
    signs: Vec<i8>,
    /// Left/right segment neighbour per slot (`NO_SEG` at the ends).
    nl: Vec<usize>,
    nr: Vec<usize>,
    beta: Vec<f64>,
    /// Current merge estimate per junction; infinity once merged away.
    eta: Vec<f64>,
    generation: Vec<u32>,
    /// Ordered queue over `(eta, junction, generation)`; absent in scan
    /// mode.
    queue: Option<BTreeSet<MergeKey>>,
    lambda_cur: f64,
}

impl SolverState {
    fn new(y: &[f64], tau: &[f64], use_queue: bool) -> Self {
        let n = y.len();
        let mut weight_pre = Vec::with_capacity(n + 1);
        let mut moment_pre = Vec::with_capacity(n + 1);
        weight_pre.push(0.0);
        moment_pre.push(0.0);
        for i in 0..n {
            weight_pre.push(weight_pre[i] + tau[i]);
            moment_pre.push(moment_pre[i] + tau[i] * y[i]);
        }

        let signs: Vec<i8> = (0..n.saturating_sub(1))
            .map(|j| {
                let s = sign(y[j + 1] - y[j]);
                assert!(s != 0, "solve_path requires collapsed input");
                s
            })
            .collect();

        let nl: Vec<usize> = (0..n).map(|r| if r == 0 { NO_SEG } else { r - 1 }).collect();
        let nr: Vec<usize> = (0..n).map(|r| if r + 1 < n { r + 1 } else { NO_SEG }).collect();

        let mut state = SolverState {
            weight_pre,
            moment_pre,
            signs,
            nl,
            nr,
            beta: vec![0.0; n],
            eta: vec![f64::INFINITY; n.saturating_sub(1)],
            generation: vec![0; n.saturating_sub(1)],
            queue: use_queue.then(BTreeSet::new),
            lambda_cur: 0.0,
        };
        for r in 0..n {
            state.beta[r] = state.slot_beta(r);
        }
        for j in 0..n.saturating_sub(1) {
            let eta = state.merge_estimate(j);
            state.eta[j] = eta;
            if let Some(queue) = &mut state.queue {
                queue.insert(MergeKey {
                    eta,
                    junction: j as u32,
                    generation: 0,
                });
            }
        }
        state
    }

    /// Boundary signs of the segment stored at `slot`.
    fn boundary_signs(&self, slot: usize) -> (i8, i8) {
        let left = match self.nl[slot] {
            NO_SEG => 0,
            l => self.signs[l],
        };
        let right = if self.nr[slot] == NO_SEG {
            0
        } else {
            self.signs[slot]
        };
        (left, right)
    }

    fn slot_beta(&self, slot: usize) -> f64 {
        let (sl, sr) = self.boundary_signs(slot);
        let lo = match self.nl[slot] {
            NO_SEG => 0,
            l => l + 1,
        };
        let weight = self.weight_pre[slot + 1] - self.weight_pre[lo];
        f64::from(sr - sl) / (2.0 * weight)
    }

    fn slot_mean(&self, slot: usize) -> f64 {
        let lo = match self.nl[slot] {
            NO_SEG => 0,
            l => l + 1,
        };
        (self.moment_pre[slot + 1] - self.moment_pre[lo])
            / (self.weight_pre[slot + 1] - self.weight_pre[lo])
    }

    /// Lambda at which the segments around junction `j` meet, never earlier
    /// than the current position. Infinite when the levels evolve in
    /// parallel.
    fn merge_estimate(&self, j: usize) -> f64 {
        let right = self.nr[j];
        let denom = self.beta[j] - self.beta[right];
        if denom == 0.0 {
            return f64::INFINITY;
        }
        let crossing = (self.slot_mean(right) - self.slot_mean(j)) / denom;
        crossing.max(self.lambda_cur)
    }

    fn refresh_junction(&mut self, j: usize) {
        self.generation[j] += 1;
        let eta = self.merge_estimate(j);
        self.eta[j] = eta;
        if let Some(queue) = &mut self.queue {
            queue.insert(MergeKey {
                eta,
                junction: j as u32,
                generation: self.generation[j],
            });
        }
    }

    fn retire_junction(&mut self, j: usize) {
        self.generation[j] += 1;
        self.eta[j] = f64::INFINITY;
    }

    /// Pops the next merge event: the minimal estimate together with every
    /// junction within tolerance of it. Queue and scan mode visit events in
    /// the same `(eta, junction)` order, so their outputs are identical.
    fn pop_group(&mut self) -> Option<(f64, Vec<usize>)> {
        match &mut self.queue {
            Some(queue) => {
                let (lambda, first) = loop {
                    let key = *queue.iter().next()?;
                    queue.remove(&key);
                    if self.generation[key.junction as usize] == key.generation {
                        break (key.eta.max(self.lambda_cur), key.junction as usize);
                    }
                };
                let mut group = vec![first];
                let threshold = lambda * (1.0 + TIE_RTOL);
                while let Some(&key) = queue.iter().next() {
                    if key.eta > threshold {
                        break;
                    }
                    queue.remove(&key);
                    if self.generation[key.junction as usize] == key.generation {
                        group.push(key.junction as usize);
                    }
                }
                group.sort_unstable();
                Some((lambda, group))
            }
            None => {
                let mut best: Option<(f64, usize)> = None;
                for (j, &eta) in self.eta.iter().enumerate() {
                    if best.is_none_or(|(b, _)| eta < b) {
                        best = Some((eta, j));
                    }
                }
                let (eta, _) = best.filter(|(eta, _)| eta.is_finite())?;
                let lambda = eta.max(self.lambda_cur);
                let threshold = lambda * (1.0 + TIE_RTOL);
                let group = (0..self.eta.len())
                    .filter(|&j| self.eta[j] <= threshold)
                    .collect();
                Some((lambda, group))
            }
        }
    }
}

/// Computes the full merge path of a collapsed signal.
///
/// The input must not contain equal consecutive values; run
/// [`collapse_constant_pieces`](crate::signal::collapse_constant_pieces)
/// first. Runs in `O(n log n)` time and `O(n)` space.
pub fn solve_path(ws: &WeightedSignal) -> PathResult {
    solve_path_raw(&ws.y, &ws.tau)
}

/// Slice-level entry used where no full signal exists, such as the online
/// solver's anchored tails and coarse segment sequences.
pub(crate) fn solve_path_raw(y: &[f64], tau: &[f64]) -> PathResult {
    solve_path_mode(y, tau, y.len() > SCAN_SOLVE_LEN)
}

fn solve_path_mode(y: &[f64], tau: &[f64], use_queue: bool) -> PathResult {
    let n = y.len();
    assert!(n >= 1, "empty signal");
    assert_eq!(n, tau.len());
    let mut lambda_out = vec![0.0; n.saturating_sub(1)];
    let mut dg_out = vec![0i64; n.saturating_sub(1)];
    if n == 1 {
        return PathResult {
            n,
            lambda: lambda_out,
            dg: dg_out,
        };
    }

    let mut state = SolverState::new(y, tau, use_queue);
    let mut remaining = n - 1;

    while remaining > 0 {
        let (lambda_new, group) = state.pop_group().expect("junctions remain but queue is empty");

        // Split the group into maximal chains of consecutive junctions; each
        // chain collapses into a single segment.
        let mut components: Vec<Vec<usize>> = Vec::new();
        for &j in &group {
            match components.last_mut() {
                Some(comp) if state.nr[*comp.last().unwrap()] == j => comp.push(j),
                _ => components.push(vec![j]),
            }
        }

        let mut touched: Vec<usize> = Vec::new();
        for comp in &components {
            let first = comp[0];
            let merged_slot = state.nr[*comp.last().unwrap()];

            let dg = if comp.len() == 1 {
                let (s_left, _) = state.boundary_signs(first);
                let (_, s_right) = state.boundary_signs(merged_slot);
                delta_g_for_merge(s_left, state.signs[first], s_right)
            } else {
                // Simultaneous merge: count extremal members directly.
                let mut before = 0i64;
                let mut slot = first;
                loop {
                    let (sl, sr) = state.boundary_signs(slot);
                    if is_extremal(sl, sr) {
                        before += 1;
                    }
                    if slot == merged_slot {
                        break;
                    }
                    slot = state.nr[slot];
                }
                let (outer_left, _) = state.boundary_signs(first);
                let (_, outer_right) = state.boundary_signs(merged_slot);
                i64::from(is_extremal(outer_left, outer_right)) - before
            };

            for &j in comp {
                lambda_out[j] = lambda_new;
                state.retire_junction(j);
            }
            dg_out[first] = dg;
            remaining -= comp.len();

            // Splice the chain out of the segment list; the union lives at
            // the rightmost member's slot.
            let left_neighbour = state.nl[first];
            state.nl[merged_slot] = left_neighbour;
            if left_neighbour != NO_SEG {
                state.nr[left_neighbour] = merged_slot;
            }
            state.beta[merged_slot] = state.slot_beta(merged_slot);

            if left_neighbour != NO_SEG {
                touched.push(left_neighbour);
            }
            if state.nr[merged_slot] != NO_SEG {
                touched.push(merged_slot);
            }
        }

        state.lambda_cur = lambda_new;
        touched.sort_unstable();
        touched.dedup();
        for j in touched {
            state.refresh_junction(j);
        }
    }

    PathResult {
        n,
        lambda: lambda_out,
        dg: dg_out,
    }
}
