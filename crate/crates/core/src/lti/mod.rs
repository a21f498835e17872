//! Linear time-invariant utilities: rational transfer functions, state-space
//! realizations, frequency responses, LQR, and loop-gain robustness analysis.

mod analysis;
mod riccati;
mod state_space;
mod transfer_function;

pub use analysis::{default_grid, log_grid, loop_gain_compare, stability_margin, LoopAnalysis};
pub use riccati::{are_residual, lqr_gain, LqrSolution};
pub use state_space::{balanced_first_order, ss_freq_response, StateSpaceRealization};
pub use transfer_function::{tf_eval, RationalTransferFunction};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtiError {
    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),
    #[error("invalid frequency {0}")]
    InvalidFrequency(f64),
    #[error("evaluation at a pole (ω = {omega} rad/s)")]
    EvaluationAtPole { omega: f64 },
    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("frequency grid must be strictly increasing")]
    InvalidGrid,
    #[error("LQR synthesis failed: {0}")]
    Synthesis(String),
}
