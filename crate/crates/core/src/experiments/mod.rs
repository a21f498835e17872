//! Desk-scale studies: metrics, configuration and table output.

mod analyze;
mod config;
mod grid;
mod metrics;
mod output;
mod ramp;
mod single;
mod sweep;

pub use analyze::{demo_plant, study_loopshaping_analysis, AnalysisReport, ShapingCurve};
pub use config::{
    apply_override, AnalyzeConfig, ExperimentConfig, GridConfig, NamedTerrain, RampConfig,
    SweepConfig,
};
pub use grid::{study_terrain_grid, GridCell, GridReport, REFERENCE_TRACKING};
pub use metrics::{
    episode_metrics, metrics_mae_mse, spectral_power_above, vector_mae_mse, MetricsReport,
};
pub use output::{aligned, cutoff_label, write_outputs, Table};
pub use ramp::{
    lateral_widths, low_speed_gap, study_velocity_ramp, RampReport, RampRun,
    REFERENCE_FAILURE_SPEEDS,
};
pub use single::{study_plan, study_simulation, PlanReport, SimulationReport};
pub use sweep::{study_smoothness_sweep, SweepReport, SweepRow};

use thiserror::Error;

use crate::runtime::RuntimeError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("metric: {0}")]
    Metric(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
