use rayon::prelude::*;

use super::output::{aligned, cutoff_label, num, opt, Table};
use super::{episode_metrics, ExperimentConfig, ExperimentError, MetricsReport};
use crate::quadruped::Leg;
use crate::runtime::{run_episode, Failure, ShapingConfig};

/// Force-tracking MAE (MSE) reported for the original robot in simulation,
/// by terrain (hard, medium, soft) and cost (baseline, 50, 10). A different
/// plant: kept for side-by-side logging only.
pub const REFERENCE_TRACKING: [(&str, [(f64, f64); 3]); 3] = [
    ("hard", [(4.8, 303.5), (3.6, 58.5), (5.0, 104.2)]),
    ("medium", [(5.5, 316.2), (4.6, 110.1), (5.0, 100.4)]),
    ("soft", [(13.5, 525.5), (11.6, 286.9), (7.4, 146.5)]),
];

fn reference_value(terrain: &str, cutoff: f64) -> Option<(f64, f64)> {
    let col = [f64::INFINITY, 50.0, 10.0]
        .iter()
        .position(|&c| c == cutoff)?;
    REFERENCE_TRACKING
        .iter()
        .find(|(name, _)| *name == terrain)
        .map(|(_, row)| row[col])
}

/// One terrain and cost combination.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub terrain: String,
    pub stiffness: f64,
    pub damping: f64,
    pub cutoff: f64,
    pub failure: Option<Failure>,
    /// Metrics over the measured cycles; absent if the episode failed first.
    pub metrics: Option<MetricsReport>,
}

impl GridCell {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub terrains: Vec<String>,
    pub cutoffs: Vec<f64>,
    /// Row-major by terrain, then cost.
    pub cells: Vec<GridCell>,
}

/// Trot in place on every terrain with every cost; cells run in parallel.
pub fn study_terrain_grid(config: &ExperimentConfig) -> Result<GridReport, ExperimentError> {
    let g = &config.grid;
    if g.terrains.is_empty() || g.cutoffs.is_empty() || g.cycles == 0 {
        return Err(ExperimentError::Config(
            "grid needs terrains, cutoffs and at least one measured cycle".into(),
        ));
    }
    let jobs: Vec<(usize, f64)> = (0..g.terrains.len())
        .flat_map(|i| g.cutoffs.iter().map(move |&c| (i, c)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(i, c)| grid_cell(config, i, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GridReport {
        terrains: g.terrains.iter().map(|t| t.name.clone()).collect(),
        cutoffs: g.cutoffs.clone(),
        cells,
    })
}

fn grid_cell(
    config: &ExperimentConfig,
    terrain: usize,
    cutoff: f64,
) -> Result<GridCell, ExperimentError> {
    let g = &config.grid;
    let named = &g.terrains[terrain];
    let period = config.gait.period;
    let mut s = config.scenario();
    s.terrain.stiffness = named.stiffness;
    s.terrain.damping = named.damping;
    s.shaping = ShapingConfig {
        cutoff: Some(cutoff),
        ..config.shaping.clone()
    };
    s.command.forward = 0.0;
    s.command.acceleration = 0.0;
    let from = g.warmup_cycles as f64 * period;
    let to = from + g.cycles as f64 * period;
    s.runtime.duration = to + s.plant.dt;
    let log = run_episode(&s)?;
    let metrics = if log.failed() {
        None
    } else {
        Some(episode_metrics(&log, from, to)?)
    };
    Ok(GridCell {
        terrain: named.name.clone(),
        stiffness: named.stiffness,
        damping: named.damping,
        cutoff,
        failure: log.failure,
        metrics,
    })
}

impl GridReport {
    pub fn columns() -> Vec<String> {
        let mut cols: Vec<String> = [
            "terrain",
            "stiffness",
            "damping",
            "cost",
            "completed",
            "failure_reason",
            "failure_time",
            "mae",
            "mse",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for leg in Leg::ALL {
            cols.push(format!("mae_{}", leg.name()));
            cols.push(format!("mse_{}", leg.name()));
        }
        cols.extend(
            ["height_min", "height_max", "reference_mae", "reference_mse"]
                .iter()
                .map(|s| s.to_string()),
        );
        cols
    }

    pub fn cell(&self, terrain: &str, cutoff: f64) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.terrain == terrain && c.cutoff == cutoff)
    }

    pub fn tables(&self) -> Vec<Table> {
        let cols = Self::columns();
        let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
        let mut t = Table::new("grid", &refs);
        for c in &self.cells {
            let m = c.metrics.as_ref();
            let reference = reference_value(&c.terrain, c.cutoff);
            let mut row = vec![
                c.terrain.clone(),
                num(c.stiffness),
                num(c.damping),
                cutoff_label(c.cutoff),
                u8::from(c.completed()).to_string(),
                c.failure
                    .map(|f| f.reason.name().to_string())
                    .unwrap_or_default(),
                opt(c.failure.map(|f| f.time)),
                opt(m.map(|m| m.mae)),
                opt(m.map(|m| m.mse)),
            ];
            for i in 0..4 {
                row.push(opt(m.map(|m| m.legs[i].0)));
                row.push(opt(m.map(|m| m.legs[i].1)));
            }
            row.push(opt(m.map(|m| m.base_height_min)));
            row.push(opt(m.map(|m| m.base_height_max)));
            row.push(opt(reference.map(|p| p.0)));
            row.push(opt(reference.map(|p| p.1)));
            t.push(row);
        }
        vec![t]
    }

    /// Table of `MAE (MSE)` by terrain and cost, with reference values
    /// underneath for reference.
    pub fn summary(&self) -> String {
        let header: Vec<String> = std::iter::once("terrain".to_string())
            .chain(self.cutoffs.iter().map(|&c| cutoff_label(c)))
            .collect();
        let mut ours = vec![header.clone()];
        let mut reference = vec![header];
        for t in &self.terrains {
            let mut row = vec![t.clone()];
            let mut prow = vec![t.clone()];
            for &c in &self.cutoffs {
                let cell = self.cell(t, c).expect("grid cell");
                row.push(match (&cell.metrics, cell.failure) {
                    (_, Some(f)) => format!("failed ({} at {:.2} s)", f.reason.name(), f.time),
                    (Some(m), None) => format!("{:.1} ({:.1})", m.mae, m.mse),
                    (None, None) => "-".into(),
                });
                prow.push(
                    reference_value(t, c).map_or("-".into(), |p| format!("{} ({})", p.0, p.1)),
                );
            }
            ours.push(row);
            reference.push(prow);
        }
        let mut out = String::from("Force tracking MAE (MSE) [N (N^2)], commanded vs realized\n\n");
        out.push_str(&aligned(&ours));
        out.push_str("\nReference values from a different plant\n\n");
        out.push_str(&aligned(&reference));
        out
    }
}
