//! Kinodynamic quadruped: single-rigid-body base driven by contact forces,
//! joint-velocity-driven legs, gait schedule and swing profile, mode-dependent
//! equality constraints and the tracking cost.

mod cone;
mod cost;
mod dynamics;
mod gait;
mod kinematics;
mod ocp;
mod params;
pub mod rotation;

pub use cone::{in_cone, project_to_cone};
pub use cost::{equilibrium_input, Anchor, BaseCommand, CostWeights, QuadrupedCost};
pub use dynamics::{
    block, check_chart, leg_force, leg_joint_velocity, leg_joints, set_block, QuadrupedModel,
    FORCES, INPUT_DIM, JOINTS, JOINT_VELOCITIES, OMEGA, POSITION, STATE_DIM, THETA, VELOCITY,
};
pub use gait::{swing_reference, Contact, GaitSchedule, SwingCurve, SwingProfile};
pub use kinematics::{
    condition_number, damped_inverse, foot_position, forward_kinematics, is_near_singular,
    jacobian_product_derivative, leg_jacobian, SINGULAR_CONDITION,
};
pub use ocp::{anchor_from_state, origin_anchor, QuadrupedOcp};
pub use params::{Leg, RobotParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("Euler-angle chart singularity (pitch {pitch} rad)")]
    ChartSingularity { pitch: f64 },
    #[error("non-finite state or input")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid robot parameters: {0}")]
    InvalidParams(String),
    #[error("invalid gait: {0}")]
    InvalidGait(String),
    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),
}

#[cfg(test)]
mod tests;
