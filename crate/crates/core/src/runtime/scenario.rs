use serde::{Deserialize, Serialize};

use super::RuntimeError;
use crate::loopshaping::{InputShaping, ShapingSpec};
use crate::quadruped::{
    BaseCommand, CostWeights, GaitSchedule, RobotParams, SwingProfile, INPUT_DIM,
};
use crate::sim::{PlantConfig, TerrainModel, TrackerGains};
use crate::slq::SolverSettings;

/// Frequency-shaping choice for the MPC cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapingConfig {
    /// Cutoff `β⁻¹` (rad/s); absent or infinite selects the baseline cost.
    pub cutoff: Option<f64>,
    /// `α/β`, the inverse of the high-frequency cost multiplier's square root.
    pub ratio: f64,
    /// Also shape the joint-velocity inputs.
    pub shape_joint_velocities: bool,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        Self {
            cutoff: None,
            ratio: 0.1,
            shape_joint_velocities: false,
        }
    }
}

impl ShapingConfig {
    pub fn baseline() -> Self {
        Self::default()
    }

    pub fn with_cutoff(cutoff: f64) -> Self {
        Self {
            cutoff: Some(cutoff),
            ..Self::default()
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.cutoff.is_none_or(|c| c.is_infinite())
    }

    /// Label used in tables: `baseline` or the cutoff value.
    pub fn label(&self) -> String {
        match self.cutoff {
            Some(c) if c.is_finite() => format!("{c}"),
            _ => "baseline".into(),
        }
    }

    pub fn spec(&self) -> Result<ShapingSpec, RuntimeError> {
        let shaped = match self.cutoff {
            Some(c) if c.is_finite() => InputShaping::from_cutoff_with_ratio(c, self.ratio)?,
            _ => InputShaping::unshaped(),
        };
        let inputs = (0..INPUT_DIM)
            .map(|i| {
                if i < 12 || self.shape_joint_velocities {
                    shaped
                } else {
                    InputShaping::unshaped()
                }
            })
            .collect();
        Ok(ShapingSpec::new(inputs)?)
    }
}

/// Desired base twist over time; the forward speed may ramp linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommandProfile {
    /// Initial forward speed (m/s).
    pub forward: f64,
    pub lateral: f64,
    pub yaw_rate: f64,
    pub height: f64,
    /// Forward acceleration after `ramp_start` (m/s²).
    pub acceleration: f64,
    pub ramp_start: f64,
}

impl Default for CommandProfile {
    fn default() -> Self {
        Self {
            forward: 0.0,
            lateral: 0.0,
            yaw_rate: 0.0,
            height: 0.45,
            acceleration: 0.0,
            ramp_start: 0.0,
        }
    }
}

impl CommandProfile {
    pub fn at(&self, t: f64) -> BaseCommand {
        BaseCommand {
            forward: self.forward + self.acceleration * (t - self.ramp_start).max(0.0),
            lateral: self.lateral,
            yaw_rate: self.yaw_rate,
            height: self.height,
        }
    }
}

/// Thresholds of the failure detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FailureThresholds {
    /// Failure below this fraction of the nominal height...
    pub height_fraction: f64,
    /// ...sustained for longer than this (s).
    pub persistence: f64,
    /// Largest admissible roll or pitch (rad).
    pub max_tilt: f64,
}

impl Default for FailureThresholds {
    fn default() -> Self {
        Self {
            height_fraction: 0.6,
            persistence: 0.1,
            max_tilt: 0.6,
        }
    }
}

/// Horizontal push applied to the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub time: f64,
    /// World-frame impulse (N·s).
    pub impulse: [f64; 3],
}

/// Loop timing and episode settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    /// Episode length (s).
    pub duration: f64,
    /// MPC horizon (s).
    pub horizon: f64,
    pub nodes: usize,
    /// Time between replans (s).
    pub replan_period: f64,
    /// Synchronous solver and plant; bit-reproducible.
    pub deterministic: bool,
    /// Anchor the desired pose to the integrated command instead of the
    /// measured pose, penalizing drift from the start.
    pub hold_position: bool,
    pub seed: u64,
    /// Half-width of the uniform initial base-velocity perturbation (m/s).
    pub initial_noise: f64,
    pub failure: FailureThresholds,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            duration: 4.2,
            horizon: 1.0,
            nodes: 100,
            replan_period: 0.025,
            deterministic: true,
            hold_position: false,
            seed: 0,
            initial_noise: 0.0,
            failure: FailureThresholds::default(),
        }
    }
}

/// Everything needed to run one closed-loop episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub robot: RobotParams,
    pub gait: GaitSchedule,
    pub swing: SwingProfile,
    pub weights: CostWeights,
    pub terrain: TerrainModel,
    pub plant: PlantConfig,
    pub tracker: TrackerGains,
    pub shaping: ShapingConfig,
    pub command: CommandProfile,
    pub solver: SolverSettings,
    pub runtime: RuntimeConfig,
    pub disturbance: Option<Disturbance>,
}

impl Scenario {
    /// Sim steps between replans.
    pub fn replan_steps(&self) -> Result<usize, RuntimeError> {
        let ratio = self.runtime.replan_period / self.plant.dt;
        let steps = ratio.round();
        if steps < 1.0 || (self.runtime.deterministic && (ratio - steps).abs() > 1e-9 * ratio) {
            return Err(RuntimeError::InvalidScenario(format!(
                "replan period {} s is not a positive multiple of the sim step {} s",
                self.runtime.replan_period, self.plant.dt
            )));
        }
        Ok(steps as usize)
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        let bad = |s: &str| Err(RuntimeError::InvalidScenario(s.into()));
        let r = &self.runtime;
        if !(r.duration.is_finite() && r.duration > 0.0) {
            return bad("duration must be positive");
        }
        if !(r.horizon.is_finite() && r.horizon > 0.0) || r.nodes == 0 {
            return bad("horizon and node count must be positive");
        }
        if !(r.replan_period.is_finite() && r.replan_period > 0.0) {
            return bad("replan period must be positive");
        }
        if r.replan_period >= r.horizon {
            return bad("replan period must be shorter than the horizon");
        }
        if !(r.initial_noise.is_finite() && r.initial_noise >= 0.0) {
            return bad("initial noise must be non-negative");
        }
        let f = &r.failure;
        if !(f.height_fraction > 0.0 && f.persistence >= 0.0 && f.max_tilt > 0.0) {
            return bad("failure thresholds must be positive");
        }
        if let Some(c) = self.shaping.cutoff {
            if !(c > 0.0) {
                return bad("shaping cutoff must be positive");
            }
        }
        self.robot.validate()?;
        self.gait.validate()?;
        self.weights.validate()?;
        self.terrain.validate()?;
        self.plant.validate()?;
        self.tracker.validate()?;
        self.solver.validate()?;
        self.replan_steps()?;
        self.shaping.spec()?;
        Ok(())
    }
}
