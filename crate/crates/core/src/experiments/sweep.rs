use std::time::Instant;

use super::output::{aligned, cutoff_label, num, opt, Table};
use super::{spectral_power_above, ExperimentConfig, ExperimentError};
use crate::quadruped::{anchor_from_state, Contact, Leg, POSITION};
use crate::runtime::{Episode, ShapingConfig};
use crate::sim::PlantConfig;
use crate::slq::solve;

/// Open-loop plan of one cutoff over the analyzed gait cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cutoff: f64,
    /// Solver error, when the solve failed.
    pub error: Option<String>,
    pub converged: bool,
    pub iterations: usize,
    /// Wall time of the solve (s); kept out of the CSV tables.
    pub solve_seconds: f64,
    /// Node times of the cycle (`nodes` per period plus the closing node).
    pub times: Vec<f64>,
    /// Planned vertical force of the analyzed leg at the cycle's input nodes.
    pub force: Vec<f64>,
    /// Planned base height at the cycle's state nodes.
    pub height: Vec<f64>,
    pub peak_force: f64,
    /// Largest force change between adjacent nodes.
    pub max_jump: f64,
    /// Force at the last stance node before lift-off.
    pub liftoff_force: f64,
    /// Force at the first swing node.
    pub first_swing_force: f64,
    /// Power fraction above the common cutoff.
    pub power_fraction: f64,
    /// Power fraction above twice this cutoff; undefined for the baseline.
    pub own_power_fraction: Option<f64>,
    pub height_peak_to_peak: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub power_cutoff: f64,
    pub rows: Vec<SweepRow>,
}

/// Solve the trot OCP on the planner model for every configured cutoff.
pub fn study_smoothness_sweep(config: &ExperimentConfig) -> Result<SweepReport, ExperimentError> {
    let sw = &config.sweep;
    if sw.cutoffs.is_empty() {
        return Err(ExperimentError::Config(
            "sweep needs at least one cutoff".into(),
        ));
    }
    if sw.leg >= 4 {
        return Err(ExperimentError::Config(format!(
            "sweep leg {} out of range",
            sw.leg
        )));
    }
    let period = config.gait.period;
    if sw.cycle_start < 0.0 || sw.cycle_start + period > sw.horizon + 1e-9 {
        return Err(ExperimentError::Config(
            "the analyzed cycle must lie inside the sweep horizon".into(),
        ));
    }
    let rows = sw
        .cutoffs
        .iter()
        .map(|&c| sweep_row(config, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepReport {
        power_cutoff: sw.power_cutoff,
        rows,
    })
}

fn sweep_row(config: &ExperimentConfig, cutoff: f64) -> Result<SweepRow, ExperimentError> {
    let sw = &config.sweep;
    let mut s = config.scenario();
    s.command.forward = sw.forward;
    s.command.acceleration = 0.0;
    s.runtime.horizon = sw.horizon;
    s.runtime.nodes = sw.nodes;
    s.plant = PlantConfig::perfect();
    s.shaping = ShapingConfig {
        cutoff: Some(cutoff),
        ..config.shaping.clone()
    };
    let episode = Episode::new(&s)?;
    let x0 = episode.initial_state();
    let ocp = episode.problem_at(0.0, anchor_from_state(&x0, 0.0));
    let u0 = ocp.inner().cost().input_reference().clone();
    let xs0 = ocp
        .bank()
        .steady_state(&u0)
        .map_err(|e| ExperimentError::Runtime(e.into()))?;
    let clock = Instant::now();
    let solved = solve(&ocp, &ocp.join_state(&x0, &xs0), &s.solver, None);
    let solve_seconds = clock.elapsed().as_secs_f64();
    let sol = match solved {
        Ok(sol) => sol,
        Err(e) => return Ok(failed_row(cutoff, e.to_string(), solve_seconds)),
    };

    let dt = sw.horizon / sw.nodes as f64;
    let first = (sw.cycle_start / dt).round() as usize;
    let count = (s.gait.period / dt).round() as usize;
    let inputs = ocp.recovered_inputs(&sol.trajectory);
    let states = ocp.plant_states(&sol.trajectory);
    let leg = Leg::from_index(sw.leg);
    let force: Vec<f64> = inputs[first..first + count]
        .iter()
        .map(|u| u[3 * sw.leg + 2])
        .collect();
    let height: Vec<f64> = states[first..=first + count]
        .iter()
        .map(|x| x[POSITION + 2])
        .collect();
    let times: Vec<f64> = (first..=first + count)
        .map(|k| sol.trajectory.horizon.time(k))
        .collect();

    let peak_force = force.iter().copied().fold(0.0, f64::max);
    let max_jump = force
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    // Nodes sample the mode just after their time, as the OCP does.
    let stance = |t: f64| matches!(s.gait.mode_at(t + 1e-9, leg).0, Contact::Stance);
    let liftoff = (1..count).find(|&k| stance(times[k - 1]) && !stance(times[k]));
    let (liftoff_force, first_swing_force) =
        liftoff.map_or((f64::NAN, f64::NAN), |k| (force[k - 1], force[k]));
    let rate = 1.0 / dt;
    let power_fraction = spectral_power_above(&force, rate, sw.power_cutoff)?;
    let own_power_fraction = if cutoff.is_finite() {
        spectral_power_above(&force, rate, 2.0 * cutoff).ok()
    } else {
        None
    };
    let hmax = height.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hmin = height.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SweepRow {
        cutoff,
        error: None,
        converged: sol.converged,
        iterations: sol.log.len(),
        solve_seconds,
        times,
        force,
        height,
        peak_force,
        max_jump,
        liftoff_force,
        first_swing_force,
        power_fraction,
        own_power_fraction,
        height_peak_to_peak: hmax - hmin,
    })
}

fn failed_row(cutoff: f64, error: String, solve_seconds: f64) -> SweepRow {
    SweepRow {
        cutoff,
        error: Some(error),
        converged: false,
        iterations: 0,
        solve_seconds,
        times: Vec::new(),
        force: Vec::new(),
        height: Vec::new(),
        peak_force: f64::NAN,
        max_jump: f64::NAN,
        liftoff_force: f64::NAN,
        first_swing_force: f64::NAN,
        power_fraction: f64::NAN,
        own_power_fraction: None,
        height_peak_to_peak: f64::NAN,
    }
}

impl SweepReport {
    pub const SUMMARY_COLUMNS: [&'static str; 12] = [
        "cost",
        "cutoff",
        "converged",
        "iterations",
        "peak_force",
        "max_jump",
        "liftoff_force",
        "first_swing_force",
        "power_fraction",
        "own_power_fraction",
        "height_peak_to_peak",
        "error",
    ];
    pub const TRAJECTORY_COLUMNS: [&'static str; 4] = ["cost", "time", "force_z", "height"];

    pub fn row(&self, cutoff: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.cutoff == cutoff)
    }

    /// True when every row solved and the power fraction strictly decreases
    /// in sweep order.
    pub fn power_strictly_decreasing(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_none())
            && self
                .rows
                .windows(2)
                .all(|w| w[1].power_fraction < w[0].power_fraction)
    }

    /// True when the base-height excursion never shrinks in sweep order.
    pub fn height_non_decreasing(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_none())
            && self
                .rows
                .windows(2)
                .all(|w| w[1].height_peak_to_peak >= w[0].height_peak_to_peak)
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut summary = Table::new("sweep_summary", &Self::SUMMARY_COLUMNS);
        let mut traj = Table::new("sweep_trajectories", &Self::TRAJECTORY_COLUMNS);
        for r in &self.rows {
            let label = cutoff_label(r.cutoff);
            summary.push(vec![
                label.clone(),
                num(r.cutoff),
                u8::from(r.converged).to_string(),
                r.iterations.to_string(),
                num(r.peak_force),
                num(r.max_jump),
                num(r.liftoff_force),
                num(r.first_swing_force),
                num(r.power_fraction),
                opt(r.own_power_fraction),
                num(r.height_peak_to_peak),
                r.error.clone().unwrap_or_default(),
            ]);
            for (k, t) in r.times.iter().enumerate() {
                // The closing state node has no input of its own.
                let f = r.force.get(k).copied();
                traj.push(vec![label.clone(), num(*t), opt(f), num(r.height[k])]);
            }
        }
        vec![summary, traj]
    }

    pub fn summary(&self) -> String {
        let mut rows = vec![vec![
            "cost".to_string(),
            "peak N".into(),
            "jump N".into(),
            "liftoff N".into(),
            format!("power>{}", self.power_cutoff),
            "power>2c".into(),
            "height p2p mm".into(),
            "solve s".into(),
        ]];
        for r in &self.rows {
            if let Some(e) = &r.error {
                rows.push(vec![cutoff_label(r.cutoff), format!("failed: {e}")]);
                continue;
            }
            rows.push(vec![
                cutoff_label(r.cutoff),
                format!("{:.1}", r.peak_force),
                format!("{:.1}", r.max_jump),
                format!("{:.1}", r.liftoff_force),
                format!("{:.4}", r.power_fraction),
                r.own_power_fraction
                    .map_or("-".into(), |f| format!("{f:.4}")),
                format!("{:.2}", 1e3 * r.height_peak_to_peak),
                format!("{:.2}", r.solve_seconds),
            ]);
        }
        let mut out = String::from("Planned vertical force over one gait cycle\n\n");
        out.push_str(&aligned(&rows));
        out.push_str(&format!(
            "\npower fraction strictly decreasing: {}\nheight excursion non-decreasing: {}\n",
            self.power_strictly_decreasing(),
            self.height_non_decreasing()
        ));
        out
    }
}
