use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::quadruped::{CostWeights, GaitSchedule, RobotParams, SwingProfile};
use crate::runtime::{CommandProfile, Disturbance, RuntimeConfig, Scenario, ShapingConfig};
use crate::sim::{PlantConfig, TerrainModel, TrackerGains};
use crate::slq::SolverSettings;

/// Open-loop smoothness sweep over shaping cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Cutoffs `β⁻¹` (rad/s); `inf` is the baseline cost.
    pub cutoffs: Vec<f64>,
    /// Forward speed command (m/s).
    pub forward: f64,
    pub horizon: f64,
    pub nodes: usize,
    /// Start of the analyzed gait cycle (s).
    pub cycle_start: f64,
    /// Leg whose vertical force is analyzed.
    pub leg: usize,
    /// Common cutoff (rad/s) of the high-frequency power comparison.
    pub power_cutoff: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            cutoffs: vec![f64::INFINITY, 50.0, 25.0, 10.0, 5.0],
            forward: 0.5,
            horizon: 2.1,
            nodes: 210,
            cycle_start: 0.7,
            leg: 0,
            power_cutoff: 10.0,
        }
    }
}

/// Ground contact parameters of one grid row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedTerrain {
    pub name: String,
    pub stiffness: f64,
    pub damping: f64,
}

/// Closed-loop terrain by cost grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub terrains: Vec<NamedTerrain>,
    pub cutoffs: Vec<f64>,
    /// Gait cycles run before measuring.
    pub warmup_cycles: usize,
    /// Gait cycles the metrics average over.
    pub cycles: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let named = |name: &str, t: TerrainModel| NamedTerrain {
            name: name.into(),
            stiffness: t.stiffness,
            damping: t.damping,
        };
        Self {
            terrains: vec![
                named("hard", TerrainModel::hard()),
                named("medium", TerrainModel::medium()),
                named("soft", TerrainModel::soft()),
            ],
            cutoffs: vec![f64::INFINITY, 50.0, 10.0],
            warmup_cycles: 1,
            cycles: 6,
        }
    }
}

/// Closed-loop forward-speed ramp until failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RampConfig {
    pub cutoffs: Vec<f64>,
    /// Forward acceleration of the command (m/s²).
    pub acceleration: f64,
    /// Longest episode (s).
    pub duration: f64,
    /// Fraction of the run forming the early and late windows.
    pub window_fraction: f64,
    /// Commanded speed (m/s) below which touchdown maps are compared.
    pub low_speed: f64,
}

impl Default for RampConfig {
    fn default() -> Self {
        Self {
            cutoffs: vec![f64::INFINITY, 10.0],
            acceleration: 0.05,
            duration: 50.0,
            window_fraction: 0.25,
            low_speed: 0.05,
        }
    }
}

/// Frequency-domain tables of the shaping functions and the loop demo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// `[α, β]` pairs of the tabulated shaping functions.
    pub specs: Vec<[f64; 2]>,
    /// `[α, β]` of the shaped loop on the double-integrator demo plant.
    pub loop_spec: [f64; 2],
    /// Diagonal of the demo state weight.
    pub state_weight: [f64; 2],
    pub input_weight: f64,
    pub min_frequency: f64,
    pub max_frequency: f64,
    pub points: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            specs: vec![[0.01, 0.1], [0.002, 0.02], [0.01, 0.01]],
            loop_spec: [0.01, 0.1],
            state_weight: [1.0, 1.0],
            input_weight: 1.0,
            min_frequency: 1e-2,
            max_frequency: 1e4,
            points: 200,
        }
    }
}

/// Scenario sections plus one section per study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
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
    pub sweep: SweepConfig,
    pub grid: GridConfig,
    pub ramp: RampConfig,
    pub analyze: AnalyzeConfig,
}

impl ExperimentConfig {
    /// Parse TOML text, then apply `key.path=value` overrides in order.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ExperimentError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// The closed-loop scenario described by the scenario sections.
    pub fn scenario(&self) -> Scenario {
        Scenario {
            robot: self.robot.clone(),
            gait: self.gait.clone(),
            swing: self.swing.clone(),
            weights: self.weights.clone(),
            terrain: self.terrain.clone(),
            plant: self.plant.clone(),
            tracker: self.tracker.clone(),
            shaping: self.shaping.clone(),
            command: self.command.clone(),
            solver: self.solver.clone(),
            runtime: self.runtime.clone(),
            disturbance: self.disturbance.clone(),
        }
    }
}

/// Set one dotted key. The value is parsed as a TOML value and falls back
/// to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ExperimentError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ExperimentError::Config(format!("override `{spec}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ExperimentError::Config(format!(
            "bad override key `{path}`"
        )));
    }
    let value = parse_value(raw.trim());
    let (last, parents) = keys.split_last().expect("non-empty key path");
    let mut node = table;
    for k in parents {
        let entry = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| {
            ExperimentError::Config(format!("`{k}` in `{path}` is not a section"))
        })?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
