//! Online solver: keeps the solution path current while samples arrive.
//!
//! A new sample only disturbs the tail of the restoration at the cutting
//! point `lambda_hat`. The update therefore splits the path three ways:
//! merge values at most `lambda_hat` before the disturbed tail are kept
//! verbatim; the tail itself, guarded by one virtual anchor point that pins
//! its left boundary sign, is re-solved from scratch; and everything above
//! `lambda_hat` is re-solved on the coarse segment sequence of the updated
//! restoration, whose merge values continue the original path shifted by
//! `lambda_hat`.

use crate::error::{TvError, TvResult};
use crate::path::{sign, solve_path, solve_path_raw, PathResult};
use crate::restore::{reconstruct_from_fences, Restoration};
use crate::select::{ladder_from_sorted_events, select_lambda_value, GLadder};
use crate::signal::WeightedSignal;

/// Below this many collapsed samples the path is simply re-solved offline;
/// the incremental machinery needs a usable cutting point first.
const BOOTSTRAP_LEN: usize = 10;

/// How the cutting point follows the stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaHatPolicy {
    /// Track the automatic selection of the previous step.
    Ours,
    /// Twice the automatic selection; trades tail length for coarse work.
    TwiceOurs,
    /// A fixed user-chosen cutting point.
    Fixed(f64),
}

/// A segment's samples fenced by virtual anchor points that reproduce the
/// boundary signs of the restoration it was cut from.
#[derive(Debug, Clone)]
pub struct VirtualSegment {
    pub y_plus: Vec<f64>,
    pub tau_plus: Vec<f64>,
}

/// Builds the virtual segment of segment `j` of a restoration: its raw
/// samples plus a unit-weight anchor on each interior side, offset so the
/// anchor stays beyond the segment level until past the cutting point.
pub fn virtual_segment(
    ws: &WeightedSignal,
    r: &Restoration,
    j: usize,
    eps_lambda: f64,
) -> VirtualSegment {
    let k = r.k();
    assert!(j < k);
    let (lo, hi) = (r.fences[j], r.fences[j + 1]);
    let mut y_plus = Vec::with_capacity(hi - lo + 2);
    let mut tau_plus = Vec::with_capacity(hi - lo + 2);
    if j > 0 {
        y_plus.push(r.levels[j] - (r.lambda + eps_lambda) / (2.0 * f64::from(r.signs[j])));
        tau_plus.push(1.0);
    }
    y_plus.extend_from_slice(&ws.y[lo..hi]);
    tau_plus.extend_from_slice(&ws.tau[lo..hi]);
    if j + 1 < k {
        y_plus.push(r.levels[j] + (r.lambda + eps_lambda) / (2.0 * f64::from(r.signs[j + 1])));
        tau_plus.push(1.0);
    }
    VirtualSegment { y_plus, tau_plus }
}

/// First index a new sample can influence: the start of the last segment
/// whose left jump has the same sign as the pull the new sample exerts on
/// the final level. No such jump means the whole sequence is exposed. A new
/// sample exactly at the final level only exposes the final segment.
pub fn find_non_isolated_start(r: &Restoration, y_new: f64) -> usize {
    let k = r.k();
    let pull = sign(r.levels[k - 1] - y_new);
    if pull == 0 {
        return r.fences[k - 1];
    }
    for j in (1..k).rev() {
        // signs[j] is sign(levels[j] - levels[j-1]); the left jump of
        // segment j has the opposite orientation.
        if r.signs[j] == -pull {
            return r.fences[j];
        }
    }
    0
}

/// Incrementally maintained solver state for one sample stream.
pub struct StreamState {
    policy: LambdaHatPolicy,
    raw_t: Vec<f64>,
    raw_y: Vec<f64>,
    ws: WeightedSignal,
    path: PathResult,
    lambda_hat: Option<f64>,
    lambda_ours: Option<f64>,
    restoration: Option<Restoration>,
    /// Merge events `(lambda, dg, junction)` with `lambda <= lambda_hat`,
    /// sorted by value; the retained part of the next update.
    low_events: Vec<(f64, i64, usize)>,
    /// Events above the cutting point, sorted; rebuilt every update.
    high_events: Vec<(f64, i64, usize)>,
}

impl StreamState {
    pub fn new(policy: LambdaHatPolicy) -> Self {
        if let LambdaHatPolicy::Fixed(value) = policy {
            assert!(value >= 0.0, "fixed cutting point must be non-negative");
        }
        StreamState {
            policy,
            raw_t: Vec::new(),
            raw_y: Vec::new(),
            ws: WeightedSignal {
                t: Vec::new(),
                y: Vec::new(),
                tau: Vec::new(),
                index_map: Some(vec![0]),
            },
            path: PathResult {
                n: 0,
                lambda: Vec::new(),
                dg: Vec::new(),
            },
            lambda_hat: None,
            lambda_ours: None,
            restoration: None,
            low_events: Vec::new(),
            high_events: Vec::new(),
        }
    }

    /// Samples received so far.
    pub fn len(&self) -> usize {
        self.raw_y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_y.is_empty()
    }

    /// The collapsed signal the current path refers to.
    pub fn signal(&self) -> &WeightedSignal {
        &self.ws
    }

    pub fn path(&self) -> &PathResult {
        &self.path
    }

    pub fn lambda_hat(&self) -> Option<f64> {
        self.lambda_hat
    }

    /// Automatic selection from the current path, when available.
    pub fn lambda_ours(&self) -> Option<f64> {
        self.lambda_ours
    }

    /// Cached restoration at the cutting point.
    pub fn restoration(&self) -> Option<&Restoration> {
        self.restoration.as_ref()
    }

    /// Integrates one sample and brings path, selection and cached
    /// restoration up to date.
    pub fn push_sample(&mut self, t_new: f64, y_new: f64) -> TvResult<()> {
        if let Some(&last) = self.raw_t.last() {
            if !(t_new > last) {
                return Err(TvError::NonIncreasingTime {
                    index: self.raw_t.len(),
                });
            }
        } else if !t_new.is_finite() {
            return Err(TvError::Parse {
                line: 1,
                message: format!("non-finite time {t_new}"),
            });
        }
        if !y_new.is_finite() {
            return Err(TvError::Parse {
                line: self.raw_y.len() + 1,
                message: format!("non-finite value {y_new}"),
            });
        }
        self.raw_t.push(t_new);
        self.raw_y.push(y_new);

        match self.plan_incremental(y_new) {
            Some((m0, j_star)) => self.push_incremental(t_new, y_new, m0, j_star)?,
            None => self.rebuild_offline()?,
        }
        self.finalize()
    }

    /// Decides whether the incremental route applies and locates the
    /// non-isolated tail. `None` falls back to an offline re-solve.
    fn plan_incremental(&self, y_new: f64) -> Option<(usize, usize)> {
        if self.ws.len() < BOOTSTRAP_LEN {
            return None;
        }
        let r = self.restoration.as_ref()?;
        self.lambda_hat?;
        let m0 = find_non_isolated_start(r, y_new);
        if m0 == 0 {
            return None;
        }
        let j_star = r.fences.partition_point(|&f| f <= m0) - 1;
        debug_assert_eq!(r.fences[j_star], m0);
        Some((m0, j_star))
    }

    fn rebuild_offline(&mut self) -> TvResult<()> {
        self.ws = crate::signal::collapse_constant_pieces(&crate::signal::build_weighted_signal(
            &self.raw_t,
            &self.raw_y,
        )?);
        self.path = solve_path(&self.ws);
        let mut events: Vec<(f64, i64, usize)> = self
            .path
            .lambda
            .iter()
            .zip(&self.path.dg)
            .enumerate()
            .map(|(j, (&l, &d))| (l, d, j))
            .collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.low_events = events;
        self.high_events = Vec::new();
        Ok(())
    }

    fn push_incremental(
        &mut self,
        t_new: f64,
        y_new: f64,
        m0: usize,
        j_star: usize,
    ) -> TvResult<()> {
        let lambda_hat = self.lambda_hat.expect("checked by plan_incremental");
        let r = self.restoration.take().expect("checked by plan_incremental");
        let prev_raw_t = self.raw_t[self.raw_t.len() - 2];
        let tau_new = t_new - prev_raw_t;

        // Fold the sample into the collapsed signal.
        let fences = self.ws.index_map.as_mut().expect("stream signal is collapsed");
        if y_new == *self.ws.y.last().expect("non-empty") {
            *self.ws.tau.last_mut().unwrap() += tau_new;
            *fences.last_mut().unwrap() += 1;
        } else {
            self.ws.t.push(t_new);
            self.ws.y.push(y_new);
            self.ws.tau.push(tau_new);
            let next = fences.last().unwrap() + 1;
            fences.push(next);
        }
        let n = self.ws.len();

        // Part 2: re-solve the anchored tail.
        let eps = 1e-9f64.max(1e-9 * lambda_hat);
        let left_sign = f64::from(r.signs[j_star]);
        let mut offset = (lambda_hat + eps) / (2.0 * left_sign);
        while r.levels[j_star] - offset == self.ws.y[m0] {
            offset *= 2.0;
        }
        let anchor = r.levels[j_star] - offset;

        let mut y_suffix = Vec::with_capacity(n - m0 + 1);
        let mut tau_suffix = Vec::with_capacity(n - m0 + 1);
        y_suffix.push(anchor);
        tau_suffix.push(1.0);
        y_suffix.extend_from_slice(&self.ws.y[m0..]);
        tau_suffix.extend_from_slice(&self.ws.tau[m0..]);
        let suffix_path = solve_path_raw(&y_suffix, &tau_suffix);

        // Splice the re-solved tail onto the retained prefix in place; the
        // anchor's own junction is dropped.
        self.path.n = n;
        self.path.lambda.truncate(m0);
        self.path.dg.truncate(m0);
        self.path.lambda.extend_from_slice(&suffix_path.lambda[1..]);
        self.path.dg.extend_from_slice(&suffix_path.dg[1..]);
        debug_assert_eq!(self.path.lambda.len(), n - 1);

        // Cut set of the updated restoration at the cutting point.
        let mut cut_junctions = Vec::new();
        let mut cut_fences = vec![0usize];
        for (j, &l) in self.path.lambda.iter().enumerate() {
            if l > lambda_hat {
                cut_junctions.push(j);
                cut_fences.push(j + 1);
            }
        }
        cut_fences.push(n);
        let r_hat = reconstruct_from_fences(&self.ws, cut_fences, lambda_hat);

        if r_hat.levels.windows(2).any(|w| w[0] == w[1]) {
            // Exactly tied neighbouring levels cannot be re-solved as a
            // coarse signal; the full solver handles them via collapsing.
            return self.rebuild_offline();
        }

        // Part 1: continue the path above the cutting point on the coarse
        // segment sequence; its merge values are measured from lambda_hat.
        self.high_events.clear();
        if !cut_junctions.is_empty() {
            let coarse = solve_path_raw(&r_hat.levels, &r_hat.seg_weights);
            for (c, &j) in cut_junctions.iter().enumerate() {
                self.path.lambda[j] = lambda_hat + coarse.lambda[c];
                self.path.dg[j] = coarse.dg[c];
                self.high_events
                    .push((lambda_hat + coarse.lambda[c], coarse.dg[c], j));
            }
            self.high_events.sort_by(|a, b| a.0.total_cmp(&b.0));
        }

        // Merge the tail's low events into the retained prefix events.
        let mut part2: Vec<(f64, i64, usize)> = (1..suffix_path.lambda.len())
            .filter(|&u| suffix_path.lambda[u] <= lambda_hat)
            .map(|u| (suffix_path.lambda[u], suffix_path.dg[u], m0 + u - 1))
            .collect();
        part2.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.low_events.retain(|&(_, _, j)| j < m0);
        merge_into_sorted(&mut self.low_events, &part2);
        Ok(())
    }

    /// Selection, cutting-point policy and restoration cache; runs after
    /// both the incremental and the offline route.
    fn finalize(&mut self) -> TvResult<()> {
        let ladder = self.ladder();
        self.lambda_ours = select_lambda_value(&ladder, None).ok().map(|(ours, _)| ours);
        self.update_lambda_hat();
        Ok(())
    }

    /// Applies the cutting-point policy to the current selection and
    /// refreshes the cached restoration and the event split. Keeps the
    /// previous cutting point when no selection is available yet.
    pub fn update_lambda_hat(&mut self) -> Option<f64> {
        let updated = match self.policy {
            LambdaHatPolicy::Fixed(value) => Some(value),
            LambdaHatPolicy::Ours => self.lambda_ours.or(self.lambda_hat),
            LambdaHatPolicy::TwiceOurs => self.lambda_ours.map(|l| 2.0 * l).or(self.lambda_hat),
        };
        self.lambda_hat = updated;

        if let Some(lh) = self.lambda_hat {
            let mut fences = vec![0usize];
            for (j, &l) in self.path.lambda.iter().enumerate() {
                if l > lh {
                    fences.push(j + 1);
                }
            }
            fences.push(self.ws.len());
            self.restoration = Some(reconstruct_from_fences(&self.ws, fences, lh));
            self.rebalance(lh);
        } else {
            self.restoration = None;
        }
        self.lambda_hat
    }

    /// Current extremum-count ladder, assembled from the two sorted event
    /// lists without a full re-sort.
    pub fn ladder(&self) -> GLadder {
        ladder_from_sorted_events(
            self.low_events
                .iter()
                .chain(&self.high_events)
                .map(|&(l, d, _)| (l, d)),
        )
    }

    /// Moves events across the low/high split after the cutting point moved.
    fn rebalance(&mut self, lambda_hat: f64) {
        let promote = self.high_events.partition_point(|&(l, _, _)| l <= lambda_hat);
        if promote > 0 {
            self.low_events.extend(self.high_events.drain(..promote));
        }
        let keep = self.low_events.partition_point(|&(l, _, _)| l <= lambda_hat);
        if keep < self.low_events.len() {
            let demoted = self.low_events.split_off(keep);
            let mut merged = Vec::with_capacity(demoted.len() + self.high_events.len());
            merged.extend(demoted);
            merged.append(&mut self.high_events);
            self.high_events = merged;
        }
    }
}

/// Merges a small sorted batch into a sorted vector from the back, without
/// allocating a second buffer.
fn merge_into_sorted(base: &mut Vec<(f64, i64, usize)>, add: &[(f64, i64, usize)]) {
    if add.is_empty() {
        return;
    }
    let old_len = base.len();
    base.resize(old_len + add.len(), (0.0, 0, 0));
    let mut i = old_len;
    let mut j = add.len();
    let mut k = base.len();
    while j > 0 {
        if i > 0 && base[i - 1].0 > add[j - 1].0 {
            base[k - 1] = base[i - 1];
            i -= 1;
        } else {
            base[k - 1] = add[j - 1];
            j -= 1;
        }
        k -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::restore::reconstruct;
    use crate::signal::{build_weighted_signal, collapse_constant_pieces};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn offline(t: &[f64], y: &[f64]) -> (WeightedSignal, PathResult) {
        let ws = collapse_constant_pieces(&build_weighted_signal(t, y).unwrap());
        let path = solve_path(&ws);
        (ws, path)
    }

    fn assert_paths_match(online: &PathResult, reference: &PathResult, context: &str) {
        assert_eq!(online.n, reference.n, "{context}");
        for (j, (a, b)) in online.lambda.iter().zip(&reference.lambda).enumerate() {
            let tol = 1e-9 * b.abs().max(1.0);
            assert!((a - b).abs() <= tol, "{context}: junction {j}: {a} vs {b}");
        }
        // Delta sums must agree per merge-value class.
        let class_sums = |p: &PathResult| {
            let mut events: Vec<(f64, i64)> =
                p.lambda.iter().cloned().zip(p.dg.iter().cloned()).collect();
            events.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut sums: Vec<(f64, i64)> = Vec::new();
            for (l, d) in events {
                match sums.last_mut() {
                    Some((last, s)) if (l - *last).abs() <= 1e-9 * l.max(1.0) => *s += d,
                    _ => sums.push((l, d)),
                }
            }
            sums
        };
        let a = class_sums(online);
        let b = class_sums(reference);
        assert_eq!(a.len(), b.len(), "{context}: breakpoint classes differ");
        for ((_, da), (_, db)) in a.iter().zip(&b) {
            assert_eq!(da, db, "{context}: class delta sums differ");
        }
    }

    fn noisy_stream(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let base = if (i / 12) % 2 == 0 { 0.0 } else { 3.0 };
                base + rng.sample::<f64, _>(rand_distr::StandardNormal)
            })
            .collect();
        (t, y)
    }

    #[test]
    fn first_sample_keeps_empty_path() {
        let mut state = StreamState::new(LambdaHatPolicy::Ours);
        state.push_sample(0.0, 1.5).unwrap();
        assert_eq!(state.len(), 1);
        assert!(state.path().lambda.is_empty());
    }

    #[test]
    fn rejects_non_increasing_time() {
        let mut state = StreamState::new(LambdaHatPolicy::Ours);
        state.push_sample(0.0, 1.0).unwrap();
        assert!(matches!(
            state.push_sample(0.0, 2.0),
            Err(TvError::NonIncreasingTime { index: 1 })
        ));
    }

    #[test]
    fn online_matches_offline_on_noisy_stream() {
        let (t, y) = noisy_stream(90, 4);
        let mut state = StreamState::new(LambdaHatPolicy::Ours);
        for i in 0..t.len() {
            state.push_sample(t[i], y[i]).unwrap();
            let (_, reference) = offline(&t[..=i], &y[..=i]);
            assert_paths_match(state.path(), &reference, &format!("prefix {}", i + 1));
        }
    }

    #[test]
    fn online_matches_offline_under_other_policies() {
        let (t, y) = noisy_stream(70, 9);
        for policy in [LambdaHatPolicy::TwiceOurs, LambdaHatPolicy::Fixed(1.2)] {
            let mut state = StreamState::new(policy);
            for i in 0..t.len() {
                state.push_sample(t[i], y[i]).unwrap();
                let (_, reference) = offline(&t[..=i], &y[..=i]);
                assert_paths_match(state.path(), &reference, &format!("{policy:?} n={}", i + 1));
            }
        }
    }

    #[test]
    fn online_handles_duplicate_values() {
        let t: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let mut y = noisy_stream(40, 21).1;
        // Plant exact duplicates, including at the tail.
        y[15] = y[14];
        y[31] = y[30];
        y[39] = y[38];
        let mut state = StreamState::new(LambdaHatPolicy::Ours);
        for i in 0..t.len() {
            state.push_sample(t[i], y[i]).unwrap();
            let (_, reference) = offline(&t[..=i], &y[..=i]);
            assert_paths_match(state.path(), &reference, &format!("dup n={}", i + 1));
        }
    }

    #[test]
    fn ladder_matches_full_rebuild() {
        let (t, y) = noisy_stream(60, 33);
        let mut state = StreamState::new(LambdaHatPolicy::Ours);
        for i in 0..t.len() {
            state.push_sample(t[i], y[i]).unwrap();
        }
        let incremental = state.ladder();
        let full = crate::select::build_g_ladder(state.path());
        assert_eq!(incremental.g_values, full.g_values);
        assert_eq!(incremental.g_below, full.g_below);
        for (a, b) in incremental.breakpoints.iter().zip(&full.breakpoints) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn prefix_is_preserved_at_the_cutting_point() {
        let (t, y) = noisy_stream(80, 7);
        let mut state = StreamState::new(LambdaHatPolicy::Ours);
        for i in 0..60 {
            state.push_sample(t[i], y[i]).unwrap();
        }
        for i in 60..80 {
            let lambda_hat = state.lambda_hat().unwrap();
            let before = state.restoration().unwrap();
            let m0 = find_non_isolated_start(before, y[i]);
            let u_before = state.signal().expand_to_original(&before.expand());
            let keep = state.signal().index_map.as_ref().unwrap()[m0];

            state.push_sample(t[i], y[i]).unwrap();

            let r_after = reconstruct(state.signal(), state.path(), lambda_hat).unwrap();
            let u_after = state.signal().expand_to_original(&r_after.expand());
            for s in 0..keep {
                assert!(
                    (u_before[s] - u_after[s]).abs() <= 1e-12 * (1.0 + u_before[s].abs()),
                    "sample {s} changed across push {i}"
                );
            }
        }
    }

    #[test]
    fn non_isolated_length_monotone_in_lambda() {
        let (t, y) = noisy_stream(50, 13);
        let (ws, path) = offline(&t, &y);
        let y_new = 1.7;
        let mut lambdas: Vec<f64> = path.lambda.clone();
        lambdas.sort_by(f64::total_cmp);
        let probes: Vec<f64> = lambdas.iter().step_by(4).map(|l| l * 1.01).collect();
        let mut last_len = 0usize;
        for &l in &probes {
            let r = reconstruct(&ws, &path, l).unwrap();
            let m0 = find_non_isolated_start(&r, y_new);
            let len = ws.len() - m0;
            assert!(len >= last_len, "length dropped at lambda {l}");
            last_len = len;
        }
    }

    #[test]
    fn non_isolated_start_worked_example() {
        let ws = build_weighted_signal(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.5]).unwrap();
        let path = solve_path(&ws);
        let r = reconstruct(&ws, &path, 0.5).unwrap();
        assert_eq!(find_non_isolated_start(&r, 0.9), 1);
        // A pull below the final level passes every up-jump.
        assert_eq!(find_non_isolated_start(&r, 0.0), 0);
        // Exactly at the final level only the last segment is exposed.
        assert_eq!(find_non_isolated_start(&r, 0.625), 1);
    }

    #[test]
    fn non_isolated_start_monotone_staircase() {
        let t: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..8).map(|i| i as f64 * 1.5).collect();
        let (ws, path) = offline(&t, &y);
        let r = reconstruct(&ws, &path, 0.1).unwrap();
        // Above the top level the last up-jump blocks the diffusion.
        assert_eq!(find_non_isolated_start(&r, 100.0), r.fences[r.k() - 1]);
        // Below the bottom nothing blocks it.
        assert_eq!(find_non_isolated_start(&r, -100.0), 0);
    }

    #[test]
    fn fixed_policy_keeps_its_value() {
        let (t, y) = noisy_stream(30, 2);
        let mut state = StreamState::new(LambdaHatPolicy::Fixed(4.0));
        for i in 0..t.len() {
            state.push_sample(t[i], y[i]).unwrap();
            assert_eq!(state.lambda_hat(), Some(4.0));
        }
    }

    #[test]
    fn doubling_policy_doubles_the_selection() {
        let (t, y) = noisy_stream(45, 5);
        let mut a = StreamState::new(LambdaHatPolicy::Ours);
        let mut b = StreamState::new(LambdaHatPolicy::TwiceOurs);
        for i in 0..t.len() {
            a.push_sample(t[i], y[i]).unwrap();
            b.push_sample(t[i], y[i]).unwrap();
            if let Some(ours) = b.lambda_ours() {
                assert_eq!(b.lambda_hat(), Some(2.0 * ours));
            }
            if let (Some(la), Some(lb)) = (a.lambda_ours(), b.lambda_ours()) {
                assert!((la - lb).abs() <= 1e-9 * la.max(1.0));
            }
        }
    }

    /// The virtual segments of a restoration re-solve, below the cutting
    /// point, to exactly the merge values of the original path restricted to
    /// their interior junctions; anchor junctions merge strictly above it.
    #[test]
    fn virtual_segments_reproduce_interior_merges() {
        let (t, y) = noisy_stream(40, 17);
        let (ws, path) = offline(&t, &y);
        let mut sorted = path.lambda.clone();
        sorted.sort_by(f64::total_cmp);
        let lambda_hat = sorted[sorted.len() / 2] * 1.000001;
        let r = reconstruct(&ws, &path, lambda_hat).unwrap();
        let eps = 1e-9f64.max(1e-9 * lambda_hat);

        for j in 0..r.k() {
            let vs = virtual_segment(&ws, &r, j, eps);
            let vpath = solve_path_raw(&vs.y_plus, &vs.tau_plus);
            let has_left = j > 0;
            let seg_len = r.fences[j + 1] - r.fences[j];
            for (vj, &l) in vpath.lambda.iter().enumerate() {
                let interior = if has_left {
                    vj >= 1 && vj < seg_len
                } else {
                    vj < seg_len - 1
                };
                if interior {
                    let global = r.fences[j] + vj - usize::from(has_left);
                    let reference = path.lambda[global];
                    assert!(
                        (l - reference).abs() <= 1e-9 * reference.max(1.0),
                        "segment {j} junction {vj}: {l} vs {reference}"
                    );
                    assert!(reference <= lambda_hat);
                } else {
                    assert!(l > lambda_hat, "anchor junction merged at {l} early");
                }
            }
        }
    }
}
