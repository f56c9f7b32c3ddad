//! Error type shared by the whole crate.

use thiserror::Error;

/// Errors produced by signal construction, solvers and selectors.
#[derive(Debug, Error)]
pub enum TvError {
    #[error("length mismatch: {t_len} sample times but {y_len} values")]
    LengthMismatch { t_len: usize, y_len: usize },

    #[error("signal must contain at least one sample")]
    EmptySignal,

    #[error("sample times must be strictly increasing (violated at index {index})")]
    NonIncreasingTime { index: usize },

    #[error("regularization weight must be non-negative, got {lambda}")]
    NegativeLambda { lambda: f64 },

    #[error("log-scale step q must be > 1, got {q}")]
    InvalidQ { q: f64 },

    #[error("signal too short for selection")]
    SignalTooShort,

    #[error("noise standard deviation must be positive, got {sigma}")]
    InvalidSigma { sigma: f64 },

    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("invalid fold configuration: {folds} folds for {n} samples")]
    InvalidFolds { folds: usize, n: usize },

    #[error("candidate list must not be empty")]
    EmptyCandidates,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("oracle did not converge within {max_sweeps} sweeps")]
    OracleDiverged { max_sweeps: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type TvResult<T> = Result<T, TvError>;
