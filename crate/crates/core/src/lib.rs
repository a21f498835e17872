//! Frequency-shaped trajectory optimization and model predictive control for
//! a kinodynamic quadruped.
//!
//! Inputs of an optimal-control problem are shaped in the frequency domain by
//! augmenting the dynamics with the inverse of a per-input lead filter. The
//! crate provides the LTI tooling, the augmentation, a constrained SLQ solver,
//! the quadruped model, a compliant-contact simulation plant, the MPC loop and
//! the experiment studies.

pub mod experiments;
pub mod loopshaping;
pub mod lti;
pub mod quadruped;
pub mod runtime;
pub mod sim;
pub mod slq;
