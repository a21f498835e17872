//! Per-input frequency shaping: shaping functions, their inverse filter
//! realizations, and the filter-augmented optimal-control problem.

mod augmented;
mod bank;
mod spec;

pub use augmented::{augment_ocp, derivative_augmentation, AugmentedOcp, DERIVATIVE_PENALTY};
pub use bank::{
    make_filter_bank, propagate_filter_state, recover_input, FilterBank, FilterChannel,
};
pub use spec::{make_r_filter, InputShaping, ShapingSpec};

use thiserror::Error;

use crate::lti::LtiError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapingError {
    #[error("invalid shaping spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("plan covers [{start}, {end}] s but propagation needs [{from}, {to}] s")]
    Extrapolation {
        from: f64,
        to: f64,
        start: f64,
        end: f64,
    },
    #[error(transparent)]
    Lti(#[from] LtiError),
}
