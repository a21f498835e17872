//! Discretized sequential linear-quadratic (SLQ) optimal control with
//! state-input equality constraints, plus the single-iteration MPC step.

mod backward;
mod integrator;
mod linear_quadratic;
mod ocp;
mod solver;

pub use backward::{backward_pass, ExpectedDecrease, LqData, LqNode, PolicyUpdate};
pub use integrator::{
    rk4_linearization, rk4_path_linearization, rk4_path_step, rk4_step, InputPath,
};
pub use linear_quadratic::LinearQuadraticOcp;
pub use ocp::{
    fd_expansion, fd_jacobian, ConstraintJacobians, CostExpansion, Horizon, InputCost,
    OcpDefinition, StepLinearization,
};
pub use solver::{
    evaluate, line_search, linearize, mpc_step, rollout, shift_policy, solve, write_iteration_log,
    Evaluation, FeedbackPolicy, IterationRecord, LineSearchResult, Solution, SolverSettings,
    Trajectory,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("rollout diverged at node {node}")]
    Divergence { node: usize },
    #[error("non-finite linearization at node {node}")]
    Linearization { node: usize },
    #[error("equality constraints are rank deficient at node {node}")]
    ConstraintDegeneracy { node: usize },
    #[error("input Hessian not positive definite (regularization {regularization:e})")]
    NotPositiveDefinite { regularization: f64 },
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
