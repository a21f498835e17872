//! Simulation plant with unmodeled dynamics: the kinodynamic skeleton on
//! spring-damper ground with first-order actuator lag and force-controlled
//! legs, plus a PD-plus-feedforward tracking controller.

mod plant;
mod terrain;
mod tracker;

pub use plant::{plant_step, Plant, PlantCommand, PlantConfig, PlantState, PlantStep};
pub use terrain::{contact_force, TerrainModel};
pub use tracker::{
    planned_inputs, tracking_controller, PlanSnapshot, Tracker, TrackerGains, TrackerOutput,
};

use thiserror::Error;

use crate::loopshaping::ShapingError;
use crate::quadruped::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("plant diverged at t = {time} s")]
    Divergence { time: f64 },
    #[error("plan expired: t = {time} s is past the plan end {end} s")]
    PlanExpired { time: f64, end: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Shaping(#[from] ShapingError),
}
