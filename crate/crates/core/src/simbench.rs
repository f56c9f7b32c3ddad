//! Signal generators and the simulation harness: seeded replications over
//! synthetic signals, one row of summary statistics per selector.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{
    aut_select, breakpoint_candidate_grid, cv_select, estimate_sigma, optimal_lambda,
    restoration_error, sure_select,
};
use crate::error::{TvError, TvResult};
use crate::restore::reconstruct;
use crate::select::{build_g_ladder, select_lambda};
use crate::signal::{build_weighted_signal, collapse_constant_pieces};
use crate::stream::{LambdaHatPolicy, StreamState};

/// Jump positions and heights of the standard blocks test signal.
const BLOCKS_POS: [f64; 11] = [
    0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81,
];
const BLOCKS_HEIGHTS: [f64; 11] = [
    4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2,
];
/// Amplitude factor putting the sampled signal power at 16.91 dB relative to
/// unit noise variance (computed once from the n = 999 sampling).
const BLOCKS_SCALE: f64 = 2.8427277393363934;

/// The blocks waveform sampled at `n` uniform points.
pub fn gen_blocks(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) / n as f64;
            let level: f64 = BLOCKS_POS
                .iter()
                .zip(BLOCKS_HEIGHTS)
                .filter(|(&p, _)| x >= p)
                .map(|(_, h)| h)
                .sum();
            BLOCKS_SCALE * level
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeriodicKind {
    /// Square wave between 0 and the amplitude.
    Pwc,
    /// Triangle wave between 0 and the amplitude.
    Pwl,
}

/// Periodic test waveforms; `period` is in samples.
pub fn gen_periodic(kind: PeriodicKind, n: usize, period: usize, amplitude: f64) -> Vec<f64> {
    assert!(period >= 2, "period must cover at least two samples");
    (0..n)
        .map(|i| {
            let phase = (i % period) as f64 / period as f64;
            match kind {
                PeriodicKind::Pwc => {
                    if phase < 0.5 {
                        0.0
                    } else {
                        amplitude
                    }
                }
                PeriodicKind::Pwl => amplitude * (1.0 - (2.0 * phase - 1.0).abs()),
            }
        })
        .collect()
}

/// Additive noise: independent Gaussian plus uniform terms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    /// Half-width `a` of an additional uniform term on `[-a, a]`; zero for
    /// pure Gaussian noise.
    pub uniform_halfwidth: f64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Self {
        NoiseSpec {
            sigma,
            uniform_halfwidth: 0.0,
        }
    }

    /// Standard deviation of the combined noise.
    pub fn total_std(&self) -> f64 {
        (self.sigma * self.sigma + self.uniform_halfwidth * self.uniform_halfwidth / 3.0).sqrt()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let mut e = 0.0;
        if self.sigma > 0.0 {
            e += self.sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        if self.uniform_halfwidth > 0.0 {
            e += rng.gen_range(-self.uniform_halfwidth..=self.uniform_halfwidth);
        }
        e
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalKind {
    Blocks,
    Periodic {
        kind: PeriodicKind,
        period: usize,
        amplitude: f64,
    },
    /// Clean signal loaded from a CSV file (`t,y` columns).
    Custom(Vec<f64>),
}

impl SignalKind {
    fn generate(&self, n: usize) -> TvResult<Vec<f64>> {
        match self {
            SignalKind::Blocks => Ok(gen_blocks(n)),
            SignalKind::Periodic {
                kind,
                period,
                amplitude,
            } => Ok(gen_periodic(*kind, n, *period, *amplitude)),
            SignalKind::Custom(values) => {
                if values.is_empty() {
                    Err(TvError::EmptySignal)
                } else {
                    Ok(values.clone())
                }
            }
        }
    }
}

/// A selector entry of an experiment.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorSpec {
    /// Extremum-count selector; `log10_q = None` chooses q automatically.
    Ours { log10_q: Option<f64> },
    Aut,
    Sure,
    Cv { folds: usize },
    /// Risk minimizer with the clean signal revealed; the comparison floor.
    Min,
}

impl SelectorSpec {
    pub fn label(&self) -> String {
        match self {
            SelectorSpec::Ours { log10_q: None } => "ours".to_string(),
            SelectorSpec::Ours { log10_q: Some(q) } => format!("ours:{q}"),
            SelectorSpec::Aut => "aut".to_string(),
            SelectorSpec::Sure => "sure".to_string(),
            SelectorSpec::Cv { folds } => format!("cv:{folds}"),
            SelectorSpec::Min => "min".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub kind: SignalKind,
    pub n: usize,
    pub noise: NoiseSpec,
    pub replications: usize,
    pub seed: u64,
    pub selectors: Vec<SelectorSpec>,
    /// Whether sigma-based selectors see the true noise level or estimate it
    /// from the data.
    pub sigma_known: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> TvResult<()> {
        if self.replications == 0 {
            return Err(TvError::InvalidConfig("replications must be >= 1".into()));
        }
        if self.noise.sigma < 0.0 || self.noise.uniform_halfwidth < 0.0 {
            return Err(TvError::InvalidConfig("noise spec must be non-negative".into()));
        }
        if self.n == 0 {
            return Err(TvError::InvalidConfig("n must be >= 1".into()));
        }
        if self.selectors.is_empty() {
            return Err(TvError::InvalidConfig("no selectors requested".into()));
        }
        Ok(())
    }
}

/// Summary row of one selector over all replications.
#[derive(Debug, Clone, Serialize)]
pub struct SelectorRow {
    pub selector: String,
    /// Mean of 100 * mean-squared reconstruction error.
    pub mean_r100: f64,
    /// Quantiles of the excess risk over the per-replication optimum.
    pub d25: f64,
    pub d50: f64,
    pub d95: f64,
    /// Smallest excess risk seen; never negative since the optimum is exact.
    pub d_min: f64,
    pub mean_millis: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub rows: Vec<SelectorRow>,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("selector,mean_r100,d25,d50,d95,d_min,mean_millis\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.selector,
                fmt_sig(row.mean_r100),
                fmt_sig(row.d25),
                fmt_sig(row.d50),
                fmt_sig(row.d95),
                fmt_sig(row.d_min),
                fmt_sig(row.mean_millis)
            );
        }
        out
    }
}

/// Formats a float with nine significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

struct RepOutcome {
    /// Per selector: (risk, excess over optimum, duration).
    cells: Vec<(f64, f64, Duration)>,
}

/// Runs the configured experiment: seeded noise per replication, every
/// selector scored by its reconstruction error against the clean signal.
/// Replications run in parallel; aggregation order is fixed, so reports are
/// reproducible bit for bit under one seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> TvResult<ExperimentReport> {
    cfg.validate()?;
    let u_net = cfg.kind.generate(cfg.n)?;
    let n = u_net.len();
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();

    let outcomes: Vec<TvResult<RepOutcome>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, rep, &t, &u_net))
        .collect();

    let mut risks = vec![Vec::with_capacity(cfg.replications); cfg.selectors.len()];
    let mut excesses = vec![Vec::with_capacity(cfg.replications); cfg.selectors.len()];
    let mut times = vec![Duration::ZERO; cfg.selectors.len()];
    for outcome in outcomes {
        let outcome = outcome?;
        for (s, &(risk, excess, elapsed)) in outcome.cells.iter().enumerate() {
            risks[s].push(risk);
            excesses[s].push(excess);
            times[s] += elapsed;
        }
    }

    let rows = cfg
        .selectors
        .iter()
        .enumerate()
        .map(|(s, spec)| {
            let mean_r = risks[s].iter().sum::<f64>() / cfg.replications as f64;
            let mut d = excesses[s].clone();
            d.sort_by(f64::total_cmp);
            SelectorRow {
                selector: spec.label(),
                mean_r100: 100.0 * mean_r,
                d25: quantile(&d, 0.25),
                d50: quantile(&d, 0.50),
                d95: quantile(&d, 0.95),
                d_min: d[0],
                mean_millis: times[s].as_secs_f64() * 1e3 / cfg.replications as f64,
            }
        })
        .collect();

    Ok(ExperimentReport {
        n,
        replications: cfg.replications,
        seed: cfg.seed,
        rows,
    })
}

fn run_replication(
    cfg: &ExperimentConfig,
    rep: usize,
    t: &[f64],
    u_net: &[f64],
) -> TvResult<RepOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep as u64 + 1);
    let y: Vec<f64> = u_net.iter().map(|v| v + cfg.noise.sample(&mut rng)).collect();

    let ws = collapse_constant_pieces(&build_weighted_signal(t, &y)?);
    let path = crate::path::solve_path(&ws);
    let (_, r_min) = optimal_lambda(&ws, &path, u_net)?;

    let risk_at = |lambda: f64| -> TvResult<f64> {
        let r = reconstruct(&ws, &path, lambda)?;
        restoration_error(u_net, &ws.expand_to_original(&r.expand()))
    };
    let sigma = if cfg.sigma_known {
        cfg.noise.total_std()
    } else {
        estimate_sigma(&y)?
    };

    let mut cells = Vec::with_capacity(cfg.selectors.len());
    for spec in &cfg.selectors {
        let start = Instant::now();
        let risk = match spec {
            SelectorSpec::Ours { log10_q } => {
                let ladder = build_g_ladder(&path);
                let report = select_lambda(&ladder, log10_q.map(|e| 10f64.powf(e)))?;
                risk_at(report.lambda_ours)?
            }
            SelectorSpec::Aut => risk_at(aut_select(&ws, &path, sigma)?.lambda)?,
            SelectorSpec::Sure => {
                let grid = breakpoint_candidate_grid(&path);
                risk_at(sure_select(&ws, &path, sigma, &grid)?.lambda)?
            }
            SelectorSpec::Cv { folds } => {
                let grid = breakpoint_candidate_grid(&path);
                let full = build_weighted_signal(t, &y)?;
                risk_at(cv_select(&full, *folds, &grid, cfg.seed ^ rep as u64)?.lambda)?
            }
            SelectorSpec::Min => r_min,
        };
        cells.push((risk, risk - r_min, start.elapsed()));
    }
    Ok(RepOutcome { cells })
}

/// Linear-interpolation quantile of pre-sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// One step of the streaming-versus-offline timing protocol.
#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub n: usize,
    pub online_millis: f64,
    pub offline_millis: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    pub online_total_millis: f64,
    pub offline_total_millis: f64,
}

impl TimingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,online_millis,offline_millis\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{}",
                row.n,
                fmt_sig(row.online_millis),
                fmt_sig(row.offline_millis)
            );
        }
        out
    }
}

/// Streams a noisy periodic piecewise-linear signal sample by sample,
/// timing every online update against a full offline re-solve of the same
/// prefix. Times are averaged over the replications.
pub fn run_timing(n_max: usize, replications: usize, noise: NoiseSpec, seed: u64) -> TvResult<TimingReport> {
    if replications == 0 || n_max == 0 {
        return Err(TvError::InvalidConfig("empty timing protocol".into()));
    }
    let u_net = gen_periodic(PeriodicKind::Pwl, n_max, 50, 4.0);
    let mut online = vec![0.0f64; n_max];
    let mut offline = vec![0.0f64; n_max];

    for rep in 0..replications {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep as u64 + 1);
        let y: Vec<f64> = u_net.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let t: Vec<f64> = (0..n_max).map(|i| i as f64).collect();

        let mut state = StreamState::new(LambdaHatPolicy::Ours);
        for i in 0..n_max {
            let start = Instant::now();
            state.push_sample(t[i], y[i])?;
            online[i] += start.elapsed().as_secs_f64();

            let start = Instant::now();
            let ws = collapse_constant_pieces(&build_weighted_signal(&t[..=i], &y[..=i])?);
            let path = crate::path::solve_path(&ws);
            offline[i] += start.elapsed().as_secs_f64();
            std::hint::black_box(path);
        }
    }

    let rows: Vec<TimingRow> = (0..n_max)
        .map(|i| TimingRow {
            n: i + 1,
            online_millis: online[i] * 1e3 / replications as f64,
            offline_millis: offline[i] * 1e3 / replications as f64,
        })
        .collect();
    Ok(TimingReport {
        online_total_millis: rows.iter().map(|r| r.online_millis).sum(),
        offline_total_millis: rows.iter().map(|r| r.offline_millis).sum(),
        rows,
    })
}

/// Parses the flat `key = value` experiment configuration format.
///
/// Recognised keys: `kind` (blocks | periodic-pwc | periodic-pwl |
/// csv:<path> | timing), `n`, `sigma`, `uniform`, `replications`, `seed`,
/// `selectors` (comma list of ours[:log10q] | aut | sure | cv:<folds> |
/// min), `sigma-known` (true | false), `period`, `amplitude`.
pub fn parse_config(text: &str) -> TvResult<(ExperimentConfig, bool)> {
    let mut kind_str = "blocks".to_string();
    let mut n = 999usize;
    let mut sigma = 1.0f64;
    let mut uniform = 0.0f64;
    let mut replications = 100usize;
    let mut seed = 0u64;
    let mut selectors_str = "ours,aut,sure,min".to_string();
    let mut sigma_known = true;
    let mut period = 50usize;
    let mut amplitude = 4.0f64;

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, '=');
        let key = parts.next().unwrap_or("").trim();
        let value = parts
            .next()
            .ok_or_else(|| TvError::Parse {
                line: idx + 1,
                message: "expected key = value".into(),
            })?
            .trim();
        let bad = |msg: String| TvError::Parse {
            line: idx + 1,
            message: msg,
        };
        match key {
            "kind" => kind_str = value.to_string(),
            "n" => n = value.parse().map_err(|e| bad(format!("n: {e}")))?,
            "sigma" => sigma = value.parse().map_err(|e| bad(format!("sigma: {e}")))?,
            "uniform" => uniform = value.parse().map_err(|e| bad(format!("uniform: {e}")))?,
            "replications" => {
                replications = value.parse().map_err(|e| bad(format!("replications: {e}")))?
            }
            "seed" => seed = value.parse().map_err(|e| bad(format!("seed: {e}")))?,
            "selectors" => selectors_str = value.to_string(),
            "sigma-known" => {
                sigma_known = value.parse().map_err(|e| bad(format!("sigma-known: {e}")))?
            }
            "period" => period = value.parse().map_err(|e| bad(format!("period: {e}")))?,
            "amplitude" => amplitude = value.parse().map_err(|e| bad(format!("amplitude: {e}")))?,
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }

    let timing = kind_str == "timing";
    let kind = match kind_str.as_str() {
        "blocks" | "timing" => SignalKind::Blocks,
        "periodic-pwc" => SignalKind::Periodic {
            kind: PeriodicKind::Pwc,
            period,
            amplitude,
        },
        "periodic-pwl" => SignalKind::Periodic {
            kind: PeriodicKind::Pwl,
            period,
            amplitude,
        },
        other => {
            if let Some(path) = other.strip_prefix("csv:") {
                let file = std::fs::File::open(path)?;
                let (_, y) = crate::signal::read_csv(std::io::BufReader::new(file))?;
                SignalKind::Custom(y)
            } else {
                return Err(TvError::InvalidConfig(format!("unknown kind {other:?}")));
            }
        }
    };

    let mut selectors = Vec::new();
    for item in selectors_str.split(',') {
        let item = item.trim();
        selectors.push(match item {
            "ours" => SelectorSpec::Ours { log10_q: None },
            "aut" => SelectorSpec::Aut,
            "sure" => SelectorSpec::Sure,
            "min" => SelectorSpec::Min,
            other => {
                if let Some(q) = other.strip_prefix("ours:") {
                    SelectorSpec::Ours {
                        log10_q: Some(q.parse().map_err(|_| {
                            TvError::InvalidConfig(format!("bad selector {other:?}"))
                        })?),
                    }
                } else if let Some(f) = other.strip_prefix("cv:") {
                    SelectorSpec::Cv {
                        folds: f.parse().map_err(|_| {
                            TvError::InvalidConfig(format!("bad selector {other:?}"))
                        })?,
                    }
                } else {
                    return Err(TvError::InvalidConfig(format!("unknown selector {other:?}")));
                }
            }
        });
    }

    let cfg = ExperimentConfig {
        kind,
        n,
        noise: NoiseSpec {
            sigma,
            uniform_halfwidth: uniform,
        },
        replications,
        seed,
        selectors,
        sigma_known,
    };
    cfg.validate()?;
    Ok((cfg, timing))
}
