//! Receding-horizon loop: real-time-iteration SLQ on the (optionally
//! frequency-shaped) quadruped OCP, the tracking controller and the plant.

mod episode;
mod failure;
mod log;
mod scenario;

pub use episode::{run_episode, Episode};
pub use failure::{failure_detector, FailureMonitor, FailureReason, FailureStatus};
pub use log::{EpisodeLog, Failure, ReplanRecord, Sample, Touchdown};
pub use scenario::{
    CommandProfile, Disturbance, FailureThresholds, RuntimeConfig, Scenario, ShapingConfig,
};

use thiserror::Error;

use crate::loopshaping::ShapingError;
use crate::quadruped::ModelError;
use crate::sim::SimError;
use crate::slq::SolverError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuntimeError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Shaping(#[from] ShapingError),
}
