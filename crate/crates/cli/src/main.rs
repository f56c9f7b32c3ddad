//! Command-line surface: batch denoising, path export, streaming, the
//! benchmark harness and a brute-force verification mode.
//!
//! Exit codes: 0 on success, 2 on input errors, 3 on numerical failures.

use std::io::{BufRead, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tvpath::baselines::{
    aut_select, breakpoint_candidate_grid, cv_select, estimate_sigma, sure_select,
};
use tvpath::oracle::{objective, oracle_tv};
use tvpath::path::solve_path;
use tvpath::restore::{g_of_lambda, reconstruct};
use tvpath::select::{build_g_ladder, select_lambda};
use tvpath::signal::{build_weighted_signal, collapse_constant_pieces, parse_pair, read_csv};
use tvpath::simbench::{fmt_sig, parse_config, run_experiment, run_timing};
use tvpath::stream::{LambdaHatPolicy, StreamState};
use tvpath::TvError;

#[derive(Parser)]
#[command(name = "tvpath", version, about = "1D total-variation denoising with automatic weight selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Ours,
    Aut,
    Sure,
    Cv,
}

#[derive(Subcommand)]
enum Command {
    /// Denoise a t,y CSV file and write a t,y,u CSV.
    Denoise {
        /// Input CSV; use '-' for standard input.
        input: String,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Fixed weight; skips selection.
        #[arg(long)]
        lambda: Option<f64>,
        /// Selection rule when no fixed weight is given.
        #[arg(long, value_enum, default_value_t = Method::Ours)]
        method: Method,
        /// Noise standard deviation for aut/sure; estimated when absent.
        #[arg(long)]
        sigma: Option<f64>,
        /// Log-scale step for the extremum-count selector (> 1).
        #[arg(long)]
        q: Option<f64>,
        /// Choose the log-scale step from the ladder (the default).
        #[arg(long)]
        auto_q: bool,
        /// Folds for cross-validation.
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Seed for the cross-validation split.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Export the full solution path as JSON.
    Path {
        input: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Read `t y` lines from standard input, emitting
    /// `n,lambda_ours,K,last_level` after every sample.
    Stream {
        /// ours | 2ours | fixed:<value>
        #[arg(long, default_value = "ours")]
        lambda_hat_policy: String,
        /// Dump the final path as JSON when the stream ends.
        #[arg(long)]
        emit_path: bool,
        /// Destination of the emitted path (defaults to standard output).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run an experiment configuration and write report files.
    Bench {
        config: PathBuf,
        /// Directory for report.csv / report.json (defaults to `.`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the path solver against the brute-force minimizer at one
    /// weight.
    Verify {
        input: String,
        #[arg(long)]
        lambda: f64,
        /// Convergence tolerance of the brute-force solve.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                TvError::OracleDiverged { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, TvError> {
    match cli.command {
        Command::Denoise {
            input,
            output,
            lambda,
            method,
            sigma,
            q,
            auto_q,
            folds,
            seed,
        } => cmd_denoise(&input, output, lambda, method, sigma, q, auto_q, folds, seed),
        Command::Path { input, output } => cmd_path(&input, output),
        Command::Stream {
            lambda_hat_policy,
            emit_path,
            output,
        } => cmd_stream(&lambda_hat_policy, emit_path, output),
        Command::Bench { config, output } => cmd_bench(&config, output),
        Command::Verify { input, lambda, tol } => cmd_verify(&input, lambda, tol),
    }
}

fn load_signal(input: &str) -> Result<(Vec<f64>, Vec<f64>), TvError> {
    let (t, y) = if input == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        read_csv(buf.as_bytes())?
    } else {
        let file = std::fs::File::open(input)?;
        read_csv(std::io::BufReader::new(file))?
    };
    if t.is_empty() {
        return Err(TvError::EmptySignal);
    }
    Ok((t, y))
}

fn out_writer(output: Option<PathBuf>) -> Result<Box<dyn Write>, TvError> {
    Ok(match output {
        Some(path) => Box::new(BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_denoise(
    input: &str,
    output: Option<PathBuf>,
    lambda: Option<f64>,
    method: Method,
    sigma: Option<f64>,
    q: Option<f64>,
    auto_q: bool,
    folds: usize,
    seed: u64,
) -> Result<ExitCode, TvError> {
    let (t, y) = load_signal(input)?;
    let raw = build_weighted_signal(&t, &y)?;
    let ws = collapse_constant_pieces(&raw);
    let path = solve_path(&ws);

    let chosen = match lambda {
        Some(value) => {
            if value < 0.0 {
                return Err(TvError::NegativeLambda { lambda: value });
            }
            value
        }
        None => match method {
            Method::Ours => {
                let ladder = build_g_ladder(&path);
                let q = if auto_q { None } else { q };
                select_lambda(&ladder, q)?.lambda_ours
            }
            Method::Aut => aut_select(&ws, &path, sigma_or_estimate(sigma, &y)?)?.lambda,
            Method::Sure => {
                let grid = breakpoint_candidate_grid(&path);
                sure_select(&ws, &path, sigma_or_estimate(sigma, &y)?, &grid)?.lambda
            }
            Method::Cv => {
                let grid = breakpoint_candidate_grid(&path);
                cv_select(&raw, folds, &grid, seed)?.lambda
            }
        },
    };

    let restoration = reconstruct(&ws, &path, chosen)?;
    let u = ws.expand_to_original(&restoration.expand());
    let mut out = out_writer(output)?;
    writeln!(out, "t,y,u")?;
    for i in 0..t.len() {
        writeln!(out, "{},{},{}", fmt_sig(t[i]), fmt_sig(y[i]), fmt_sig(u[i]))?;
    }
    out.flush()?;
    eprintln!(
        "lambda = {}, K = {}, g = {}",
        fmt_sig(chosen),
        restoration.k(),
        g_of_lambda(&path, chosen)
    );
    Ok(ExitCode::SUCCESS)
}

fn sigma_or_estimate(sigma: Option<f64>, y: &[f64]) -> Result<f64, TvError> {
    match sigma {
        Some(s) => Ok(s),
        None => {
            let estimate = estimate_sigma(y)?;
            eprintln!("sigma estimated as {}", fmt_sig(estimate));
            Ok(estimate)
        }
    }
}

fn cmd_path(input: &str, output: Option<PathBuf>) -> Result<ExitCode, TvError> {
    let (t, y) = load_signal(input)?;
    let ws = collapse_constant_pieces(&build_weighted_signal(&t, &y)?);
    let path = solve_path(&ws);
    let mut out = out_writer(output)?;
    serde_json::to_writer(&mut out, &path).map_err(std::io::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_stream(
    policy: &str,
    emit_path: bool,
    output: Option<PathBuf>,
) -> Result<ExitCode, TvError> {
    let policy = match policy {
        "ours" => LambdaHatPolicy::Ours,
        "2ours" => LambdaHatPolicy::TwiceOurs,
        other => match other.strip_prefix("fixed:") {
            Some(value) => LambdaHatPolicy::Fixed(value.parse().map_err(|_| {
                TvError::InvalidConfig(format!("bad fixed cutting point {value:?}"))
            })?),
            None => {
                return Err(TvError::InvalidConfig(format!(
                    "unknown cutting-point policy {other:?}"
                )))
            }
        },
    };

    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut state = StreamState::new(policy);
    for (idx, line) in stdin.lock().lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (t, y) = parse_pair(line.trim()).map_err(|message| TvError::Parse {
            line: idx + 1,
            message,
        })?;
        state.push_sample(t, y)?;
        let (k, last_level) = match state.restoration() {
            Some(r) => (r.k(), *r.levels.last().expect("non-empty restoration")),
            None => (state.signal().len(), y),
        };
        writeln!(
            out,
            "{},{},{},{}",
            state.len(),
            fmt_sig(state.lambda_ours().unwrap_or(0.0)),
            k,
            fmt_sig(last_level)
        )?;
    }
    out.flush()?;
    if emit_path {
        let mut sink = out_writer(output)?;
        serde_json::to_writer(&mut sink, state.path()).map_err(std::io::Error::from)?;
        writeln!(sink)?;
        sink.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(config: &PathBuf, output: Option<PathBuf>) -> Result<ExitCode, TvError> {
    let text = std::fs::read_to_string(config)?;
    let (cfg, timing) = parse_config(&text)?;
    let dir = output.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;

    if timing {
        let report = run_timing(cfg.n, cfg.replications, cfg.noise, cfg.seed)?;
        std::fs::write(dir.join("timing.csv"), report.to_csv())?;
        std::fs::write(
            dir.join("timing.json"),
            serde_json::to_string_pretty(&report).map_err(std::io::Error::from)?,
        )?;
        println!(
            "online total {:.3} ms, offline total {:.3} ms over {} samples",
            report.online_total_millis,
            report.offline_total_millis,
            report.rows.len()
        );
    } else {
        let report = run_experiment(&cfg)?;
        std::fs::write(dir.join("report.csv"), report.to_csv())?;
        std::fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(&report).map_err(std::io::Error::from)?,
        )?;
        print!("{}", report.to_csv());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(input: &str, lambda: f64, tol: f64) -> Result<ExitCode, TvError> {
    let (t, y) = load_signal(input)?;
    let ws = collapse_constant_pieces(&build_weighted_signal(&t, &y)?);
    let path = solve_path(&ws);
    let restoration = reconstruct(&ws, &path, lambda)?;
    let u_path = restoration.expand();
    let u_oracle = oracle_tv(&ws, lambda, tol)?;

    let gap = sup_gap(&u_path, &u_oracle);
    let obj_path = objective(&ws, &u_path, lambda);
    let obj_oracle = objective(&ws, &u_oracle, lambda);
    println!(
        "sup gap {} | objective path {} | objective reference {}",
        fmt_sig(gap),
        fmt_sig(obj_path),
        fmt_sig(obj_oracle)
    );
    if gap <= 1e-6 {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: solutions disagree beyond tolerance");
        Ok(ExitCode::from(3))
    }
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
