//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured values. Tests share a gate so the timing
//! criteria are not disturbed by parallel load.

use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tvpath::baselines::{aut_select, breakpoint_candidate_grid, optimal_lambda, sure_select};
use tvpath::oracle::oracle_tv;
use tvpath::path::{count_extremal_segments, solve_path, PathResult};
use tvpath::restore::{g_of_lambda, reconstruct, total_variation, Restoration};
use tvpath::select::{build_g_ladder, select_lambda};
use tvpath::signal::{build_weighted_signal, collapse_constant_pieces, WeightedSignal};
use tvpath::simbench::{
    gen_blocks, gen_periodic, run_experiment, run_timing, ExperimentConfig, ExperimentReport,
    NoiseSpec, PeriodicKind, SelectorSpec, SignalKind,
};
use tvpath::stream::{LambdaHatPolicy, StreamState};

fn gate() -> std::sync::MutexGuard<'static, ()> {
    static GATE: Mutex<()> = Mutex::new(());
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn random_signal(rng: &mut ChaCha8Rng, n: usize, random_tau: bool) -> WeightedSignal {
    let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let tau: Vec<f64> = (0..n)
        .map(|_| if random_tau { rng.gen_range(0.1..3.0) } else { 1.0 })
        .collect();
    let mut t = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &w in &tau {
        acc += w;
        t.push(acc);
    }
    collapse_constant_pieces(&WeightedSignal {
        t,
        y,
        tau,
        index_map: None,
    })
}

/// Residual of the per-segment stationarity condition plus the prefix- and
/// suffix-mean inequalities, all with 1e-9 slack.
fn check_restoration_invariants(ws: &WeightedSignal, r: &Restoration) {
    for j in 0..r.k() {
        let beta = f64::from(r.signs[j + 1] - r.signs[j]) / (2.0 * r.seg_weights[j]);
        let residual = (r.levels[j] - r.seg_means[j] - r.lambda * beta).abs();
        assert!(
            residual <= 1e-9 * (1.0 + r.levels[j].abs()),
            "stationarity residual {residual} at segment {j}"
        );
        if j + 1 < r.k() {
            assert!(r.levels[j] != r.levels[j + 1], "tied neighbour levels");
        }
    }
    for k in 0..r.k() {
        let (lo, hi) = (r.fences[k], r.fences[k + 1]);
        let level = r.levels[k];
        let slack = 1e-9 * (1.0 + level.abs());
        if k > 0 {
            // Left neighbour below: every weighted prefix mean sits at or
            // above the level; mirrored when above.
            let below = r.levels[k - 1] < level;
            let mut weight = 0.0;
            let mut moment = 0.0;
            for i in lo..hi {
                weight += ws.tau[i];
                moment += ws.tau[i] * ws.y[i];
                let mean = moment / weight;
                if below {
                    assert!(mean >= level - slack, "prefix mean {mean} under level {level}");
                } else {
                    assert!(mean <= level + slack, "prefix mean {mean} over level {level}");
                }
            }
        }
        if k + 1 < r.k() {
            let below = r.levels[k + 1] < level;
            let mut weight = 0.0;
            let mut moment = 0.0;
            for i in (lo..hi).rev() {
                weight += ws.tau[i];
                moment += ws.tau[i] * ws.y[i];
                let mean = moment / weight;
                if below {
                    assert!(mean >= level - slack, "suffix mean {mean} under level {level}");
                } else {
                    assert!(mean <= level + slack, "suffix mean {mean} over level {level}");
                }
            }
        }
    }
}

#[test]
fn criterion_1_oracle_equivalence() {
    let _g = gate();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE01);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let n = rng.gen_range(2..=64);
        let ws = random_signal(&mut rng, n, true);
        let path = solve_path(&ws);
        let top = path.max_lambda().unwrap_or(1.0);
        for k in 1..=20 {
            let lambda = 1.5 * top * k as f64 / 20.0;
            let r = reconstruct(&ws, &path, lambda).unwrap();
            check_restoration_invariants(&ws, &r);
            let u_path = r.expand();
            let u_oracle = oracle_tv(&ws, lambda, 1e-10).unwrap();
            let gap = u_path
                .iter()
                .zip(&u_oracle)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst = worst.max(gap);
            assert!(gap <= 1e-6, "case {case} lambda {lambda}: sup gap {gap}");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!("criterion 1: PASS — oracle sup gap {worst:.3e} over 200 signals in {elapsed:.2?}");
}

#[test]
fn criterion_2_worked_example_regression() {
    let _g = gate();
    let ws = build_weighted_signal(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.5]).unwrap();
    let path = solve_path(&ws);
    assert!((path.lambda[0] - 1.0).abs() <= 1e-12);
    assert!((path.lambda[1] - 1.0 / 3.0).abs() <= 1e-12);
    assert_eq!(path.dg, vec![-1, -1]);
    let r = reconstruct(&ws, &path, 0.5).unwrap();
    let u = r.expand();
    for (a, b) in u.iter().zip([0.25, 0.625, 0.625]) {
        assert!((a - b).abs() <= 1e-12, "{u:?}");
    }
    assert_eq!(g_of_lambda(&path, 0.1), 3);
    assert_eq!(g_of_lambda(&path, 0.5), 2);
    assert_eq!(g_of_lambda(&path, 2.0), 1);
    println!("criterion 2: PASS — worked example exact to 1e-12");
}

#[test]
fn criterion_3_online_equals_offline() {
    let _g = gate();
    let start = Instant::now();
    let n = 500;
    let u_net = gen_periodic(PeriodicKind::Pwl, n, 50, 4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE03);
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let y: Vec<f64> = u_net
        .iter()
        .map(|v| v + 2.0 * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut state = StreamState::new(LambdaHatPolicy::Ours);
    let mut worst_rel: f64 = 0.0;
    for i in 0..n {
        state.push_sample(t[i], y[i]).unwrap();
        let ws = collapse_constant_pieces(&build_weighted_signal(&t[..=i], &y[..=i]).unwrap());
        let reference = solve_path(&ws);
        assert_eq!(state.path().n, reference.n);
        for (j, (a, b)) in state
            .path()
            .lambda
            .iter()
            .zip(&reference.lambda)
            .enumerate()
        {
            let rel = (a - b).abs() / b.abs().max(1e-300);
            worst_rel = worst_rel.max(rel);
            assert!(rel <= 1e-9, "push {i} junction {j}: {a} vs {b}");
        }
        if let Some(r) = state.restoration() {
            check_restoration_invariants(state.signal(), r);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    println!(
        "criterion 3: PASS — 500 pushes, worst relative gap {worst_rel:.3e} in {elapsed:.2?}"
    );
}

#[test]
fn criterion_4_monotonicity_suite() {
    let _g = gate();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE04);
    for case in 0..100 {
        let ws = random_signal(&mut rng, 200, false);
        let path = solve_path(&ws);
        let mut grid: Vec<f64> = path.lambda.clone();
        grid.sort_by(f64::total_cmp);
        grid.dedup();

        // Multiplicity per distinct breakpoint drives the expected K drop.
        let mut expected_k = ws.len();
        let mut prev = evaluate(&ws, &path, 0.0);
        check_restoration_invariants(&ws, &prev.3);
        for &l in &grid {
            let count = path.lambda.iter().filter(|&&x| x == l).count();
            expected_k -= count;
            let cur = evaluate(&ws, &path, l);
            assert_eq!(cur.0, expected_k, "case {case}: K at breakpoint {l}");
            assert!(cur.0 <= prev.0, "case {case}: K increased at {l}");
            assert!(cur.1 <= prev.1, "case {case}: g increased at {l}");
            assert!(
                cur.2 <= prev.2 + 1e-9 * (1.0 + prev.2),
                "case {case}: TV increased at {l}"
            );
            // The accumulated count must agree with a direct count of the
            // merged structure.
            assert_eq!(
                cur.1,
                count_extremal_segments(&cur.3.levels),
                "case {case}: delta bookkeeping diverged at {l}"
            );
            check_restoration_invariants(&ws, &cur.3);
            prev = cur;
        }
        assert_eq!(prev.1, 1, "case {case}: count did not reach 1");
    }
    println!("criterion 4: PASS — K, g, TV monotone over 100 signals, zero violations");
}

fn evaluate(
    ws: &WeightedSignal,
    path: &PathResult,
    lambda: f64,
) -> (usize, i64, f64, Restoration) {
    let r = reconstruct(ws, path, lambda).unwrap();
    let g = g_of_lambda(path, lambda);
    let tv = total_variation(&r);
    (r.k(), g, tv, r)
}

#[test]
fn criterion_5_optimality_and_mean_inequalities() {
    let _g = gate();
    // Focused re-run of the stationarity and mean-inequality checks across
    // reconstructions drawn like suites 1 and 4; the suites themselves also
    // run these checks inline on everything they build.
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE05);
    let mut checked = 0usize;
    for _ in 0..60 {
        let n = rng.gen_range(2..=64);
        let ws = random_signal(&mut rng, n, true);
        let path = solve_path(&ws);
        let top = path.max_lambda().unwrap_or(1.0);
        for k in 1..=10 {
            let r = reconstruct(&ws, &path, 1.5 * top * k as f64 / 10.0).unwrap();
            check_restoration_invariants(&ws, &r);
            checked += 1;
        }
    }
    for _ in 0..25 {
        let ws = random_signal(&mut rng, 200, false);
        let path = solve_path(&ws);
        let mut grid: Vec<f64> = path.lambda.clone();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        for &l in grid.iter().step_by(7) {
            let r = reconstruct(&ws, &path, l).unwrap();
            check_restoration_invariants(&ws, &r);
            checked += 1;
        }
    }
    println!("criterion 5: PASS — stationarity and mean inequalities on {checked} restorations");
}

fn blocks_report() -> &'static ExperimentReport {
    static REPORT: OnceLock<ExperimentReport> = OnceLock::new();
    REPORT.get_or_init(|| {
        let cfg = ExperimentConfig {
            kind: SignalKind::Blocks,
            n: 999,
            noise: NoiseSpec::gaussian(1.0),
            replications: 100,
            seed: 0xB10C5,
            selectors: vec![
                SelectorSpec::Ours { log10_q: None },
                SelectorSpec::Aut,
                SelectorSpec::Sure,
                SelectorSpec::Min,
            ],
            sigma_known: true,
        };
        run_experiment(&cfg).unwrap()
    })
}

#[test]
fn criterion_6_blocks_selector_comparison() {
    let _g = gate();
    let start = Instant::now();
    let report = blocks_report();
    let mean = |label: &str| {
        report
            .rows
            .iter()
            .find(|r| r.selector == label)
            .unwrap_or_else(|| panic!("row {label} missing"))
            .mean_r100
    };
    let ours = mean("ours");
    let aut = mean("aut");
    let sure = mean("sure");
    let floor = mean("min");
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
    assert!((6.0..=9.5).contains(&ours), "ours mean 100R = {ours}");
    assert!((5.5..=8.0).contains(&aut), "aut mean 100R = {aut}");
    assert!((5.8..=8.3).contains(&sure), "sure mean 100R = {sure}");
    assert!((5.5..=7.5).contains(&floor), "min mean 100R = {floor}");
    println!(
        "criterion 6: PASS — mean 100R ours {ours:.2}, aut {aut:.2}, sure {sure:.2}, min {floor:.2} ({elapsed:.2?})"
    );
}

#[test]
fn criterion_7_g_curve_shape() {
    let _g = gate();
    let n = 999;
    let u_net = gen_blocks(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE07);
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let y: Vec<f64> = u_net
        .iter()
        .map(|v| v + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let ws = collapse_constant_pieces(&build_weighted_signal(&t, &y).unwrap());
    let path = solve_path(&ws);
    let ladder = build_g_ladder(&path);
    let report = select_lambda(&ladder, None).unwrap();
    assert!(
        (1.0..=20.0).contains(&report.lambda_ours),
        "lambda = {}",
        report.lambda_ours
    );
    assert!(
        ladder.breakpoints.contains(&report.lambda_ours),
        "selection is not a ladder breakpoint"
    );
    assert!(report.lambda_trans <= report.lambda_ours);
    println!(
        "criterion 7: PASS — lambda_ours {:.3} (transitory {:.3}, q {:.2})",
        report.lambda_ours, report.lambda_trans, report.q
    );
}

#[test]
fn criterion_8_complexity() {
    let _g = gate();
    // Offline scaling: time ratio within the n log n envelope.
    let solve_time = |n: usize| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(987 + n as u64);
        let ws = random_signal(&mut rng, n, false);
        let mut best = f64::INFINITY;
        for _ in 0..5 {
            let start = Instant::now();
            let path = solve_path(&ws);
            best = best.min(start.elapsed().as_secs_f64());
            std::hint::black_box(path);
        }
        best
    };
    solve_time(2_000); // warm-up
    let t_small = solve_time(10_000);
    let t_big = solve_time(20_000);
    let ratio = t_big / t_small;
    assert!(ratio <= 2.6, "T(2e4)/T(1e4) = {ratio:.2}");

    // Online totals against re-solving every prefix from scratch.
    let timing = run_timing(500, 3, NoiseSpec::gaussian(2.0), 0xACCE08).unwrap();
    let speedup = timing.offline_total_millis / timing.online_total_millis;
    assert!(speedup >= 3.0, "online speedup only {speedup:.2}x");
    println!(
        "criterion 8: PASS — offline scaling ratio {ratio:.2} (<= 2.6), online speedup {speedup:.1}x (>= 3)"
    );
}

#[test]
fn criterion_9_selector_properties() {
    let _g = gate();
    // Excess risk of the automatic selection is never negative on the
    // blocks comparison runs.
    let report = blocks_report();
    let ours = report
        .rows
        .iter()
        .find(|r| r.selector == "ours")
        .expect("ours row");
    assert!(ours.d_min >= 0.0, "negative excess risk {}", ours.d_min);

    // Bit-reproducibility under a fixed seed.
    let cfg = ExperimentConfig {
        kind: SignalKind::Blocks,
        n: 300,
        noise: NoiseSpec::gaussian(1.0),
        replications: 10,
        seed: 77,
        selectors: vec![
            SelectorSpec::Ours { log10_q: None },
            SelectorSpec::Cv { folds: 5 },
            SelectorSpec::Min,
        ],
        sigma_known: true,
    };
    // Everything except wall-clock timing must reproduce bit for bit.
    let strip = |r: &ExperimentReport| {
        r.rows
            .iter()
            .map(|row| {
                (
                    row.selector.clone(),
                    row.mean_r100.to_bits(),
                    row.d25.to_bits(),
                    row.d50.to_bits(),
                    row.d95.to_bits(),
                    row.d_min.to_bits(),
                )
            })
            .collect::<Vec<_>>()
    };
    let a = strip(&run_experiment(&cfg).unwrap());
    let b = strip(&run_experiment(&cfg).unwrap());
    assert_eq!(a, b, "experiment not reproducible");

    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE09);
    let t: Vec<f64> = (0..200).map(|i| i as f64).collect();
    let y: Vec<f64> = (0..200)
        .map(|i| if i % 40 < 20 { 0.0 } else { 2.0 } + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let ws = build_weighted_signal(&t, &y).unwrap();
    let grid = breakpoint_candidate_grid(&solve_path(&collapse_constant_pieces(&ws)));
    let c1 = tvpath::baselines::cv_select(&ws, 10, &grid, 5).unwrap();
    let c2 = tvpath::baselines::cv_select(&ws, 10, &grid, 5).unwrap();
    assert_eq!(c1.lambda.to_bits(), c2.lambda.to_bits());
    assert_eq!(c1.diagnostics.criterion, c2.diagnostics.criterion);

    println!(
        "criterion 9: PASS — d_min {:.3e} >= 0, experiment and cv bit-reproducible",
        ours.d_min
    );
}

// Reconstruction cost grows linearly: doubling the input roughly doubles
// the time, far from the solver's log factor.
#[test]
fn reconstruction_scales_linearly() {
    let _g = gate();
    let time_at = |n: usize| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let ws = random_signal(&mut rng, n, false);
        let path = solve_path(&ws);
        let lambda = 0.3 * path.max_lambda().unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..7 {
            let start = Instant::now();
            let r = reconstruct(&ws, &path, lambda).unwrap();
            best = best.min(start.elapsed().as_secs_f64());
            std::hint::black_box(r);
        }
        best
    };
    time_at(4_000); // warm-up
    let ratio = time_at(20_000) / time_at(10_000);
    assert!(ratio <= 4.0, "reconstruct scaling ratio {ratio:.2}");
    println!("reconstruct scaling ratio {ratio:.2}");
}

// Cross-module sanity used while assembling the suite: the AUT and SURE
// entry points agree with their definitions on one blocks realization.
#[test]
fn selector_consistency_on_blocks() {
    let _g = gate();
    let n = 999;
    let u_net = gen_blocks(n);
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let y: Vec<f64> = u_net
        .iter()
        .map(|v| v + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let ws = collapse_constant_pieces(&build_weighted_signal(&t, &y).unwrap());
    let path = solve_path(&ws);

    let aut = aut_select(&ws, &path, 1.0).unwrap();
    assert!(aut.lambda > 0.0);
    let grid = breakpoint_candidate_grid(&path);
    let sure = sure_select(&ws, &path, 1.0, &grid).unwrap();
    assert!(grid.contains(&sure.lambda));
    let (lambda_op, r_min) = optimal_lambda(&ws, &path, &u_net).unwrap();
    assert!(lambda_op > 0.0 && r_min > 0.0);
}
