//! Exact 1D total-variation denoising on irregularly sampled signals.
//!
//! The solver computes the complete solution path of the weighted TV
//! objective — every weight at which two neighbouring segments of the
//! restoration fuse — in `O(n log n)`, from which the restoration at any
//! weight and the extremum count of that restoration follow in `O(n)`. The
//! extremum-count curve drives an automatic, noise-model-free choice of the
//! weight, and an online solver keeps the path current while samples stream
//! in. Reference selectors (SURE, AUT, cross-validation), a brute-force
//! verifier and a simulation harness round the crate out.

// Negated comparisons like `!(x > 0.0)` are NaN guards, not style slips.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod oracle;
pub mod path;
pub mod restore;
pub mod select;
pub mod signal;
pub mod simbench;
pub mod stream;

pub use error::{TvError, TvResult};
pub use path::{solve_path, PathResult};
pub use restore::{g_of_lambda, reconstruct, total_variation, Restoration};
pub use select::{build_g_ladder, select_lambda, GLadder, SelectionReport};
pub use signal::{build_weighted_signal, collapse_constant_pieces, WeightedSignal};
pub use stream::{LambdaHatPolicy, StreamState};
