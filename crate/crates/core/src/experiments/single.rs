use super::output::{aligned, num, Table};
use super::{episode_metrics, ExperimentConfig, ExperimentError, MetricsReport};
use crate::quadruped::{anchor_from_state, Leg};
use crate::runtime::{run_episode, Episode, EpisodeLog};
use crate::slq::{solve, write_iteration_log, Solution};

const STATE_NAMES: [&str; 12] = [
    "roll", "pitch", "yaw", "x", "y", "z", "wx", "wy", "wz", "vx", "vy", "vz",
];

/// Open-loop solve of the configured scenario from its initial state.
#[derive(Debug, Clone)]
pub struct PlanReport {
    pub solution: Solution,
    pub times: Vec<f64>,
    /// Plant states at the nodes.
    pub states: Vec<nalgebra::DVector<f64>>,
    /// Recovered inputs at the nodes.
    pub inputs: Vec<nalgebra::DVector<f64>>,
}

pub fn study_plan(config: &ExperimentConfig) -> Result<PlanReport, ExperimentError> {
    let episode = Episode::new(&config.scenario())?;
    let x0 = episode.initial_state();
    let ocp = episode.problem_at(0.0, anchor_from_state(&x0, 0.0));
    let u0 = ocp.inner().cost().input_reference().clone();
    let xs0 = ocp
        .bank()
        .steady_state(&u0)
        .map_err(|e| ExperimentError::Runtime(e.into()))?;
    let solution = solve(&ocp, &ocp.join_state(&x0, &xs0), &config.solver, None)
        .map_err(|e| ExperimentError::Runtime(e.into()))?;
    Ok(PlanReport {
        times: solution.trajectory.times(),
        states: ocp.plant_states(&solution.trajectory),
        inputs: ocp.recovered_inputs(&solution.trajectory),
        solution,
    })
}

impl PlanReport {
    pub fn columns() -> Vec<String> {
        let mut cols = vec!["time".to_string()];
        cols.extend(STATE_NAMES.iter().map(|s| s.to_string()));
        cols.extend((0..12).map(|j| format!("q{j}")));
        for leg in Leg::ALL {
            cols.extend(
                ["x", "y", "z"]
                    .iter()
                    .map(|a| format!("f{a}_{}", leg.name())),
            );
        }
        cols.extend((0..12).map(|j| format!("dq{j}")));
        cols
    }

    pub fn tables(&self) -> Result<Vec<Table>, ExperimentError> {
        let cols = Self::columns();
        let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
        let mut t = Table::new("plan", &refs);
        for (k, time) in self.times.iter().enumerate() {
            let mut row = vec![num(*time)];
            row.extend(self.states[k].iter().map(|v| num(*v)));
            match self.inputs.get(k) {
                Some(u) => row.extend(u.iter().map(|v| num(*v))),
                None => row.extend(std::iter::repeat_n(String::new(), 24)),
            }
            t.push(row);
        }
        let mut buf = Vec::new();
        write_iteration_log(&self.solution.log, &mut buf)?;
        let mut reader = csv::Reader::from_reader(buf.as_slice());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut it = Table::new("plan_iterations", &refs);
        for rec in reader.records() {
            it.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(vec![t, it])
    }

    pub fn summary(&self) -> String {
        let e = &self.solution.evaluation;
        aligned(&[
            vec!["converged".into(), self.solution.converged.to_string()],
            vec!["iterations".into(), self.solution.log.len().to_string()],
            vec!["cost".into(), format!("{:.6}", e.cost)],
            vec!["max violation".into(), format!("{:.3e}", e.max_violation)],
        ])
    }
}

/// One closed-loop episode with force-tracking metrics over its whole length.
#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub log: EpisodeLog,
    /// Absent when the episode is too short to integrate.
    pub metrics: Option<MetricsReport>,
}

pub fn study_simulation(config: &ExperimentConfig) -> Result<SimulationReport, ExperimentError> {
    let log = run_episode(&config.scenario())?;
    let metrics = if log.samples.len() >= 2 {
        Some(episode_metrics(&log, 0.0, log.duration())?)
    } else {
        None
    };
    Ok(SimulationReport { log, metrics })
}

impl SimulationReport {
    pub fn tables(&self) -> Result<Vec<Table>, ExperimentError> {
        let mut out = Vec::new();
        for (name, which) in [("samples", 0), ("replans", 1), ("touchdowns", 2)] {
            let mut buf = Vec::new();
            match which {
                0 => self.log.write_samples(&mut buf)?,
                1 => self.log.write_replans(&mut buf)?,
                _ => self.log.write_touchdowns(&mut buf)?,
            }
            let mut reader = csv::Reader::from_reader(buf.as_slice());
            let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
            let refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut t = Table::new(name, &refs);
            for rec in reader.records() {
                t.push(rec?.iter().map(str::to_string).collect());
            }
            out.push(t);
        }
        Ok(out)
    }

    pub fn summary(&self) -> String {
        let mut rows = vec![
            vec![
                "duration s".to_string(),
                format!("{:.4}", self.log.duration()),
            ],
            vec![
                "failure".into(),
                self.log.failure.map_or("none".into(), |f| {
                    format!("{} at {:.4} s", f.reason.name(), f.time)
                }),
            ],
            vec!["replans".into(), self.log.replans.len().to_string()],
            vec!["touchdowns".into(), self.log.touchdowns.len().to_string()],
        ];
        if let Some(m) = &self.metrics {
            rows.push(vec!["force MAE N".into(), format!("{:.4}", m.mae)]);
            rows.push(vec!["force MSE N^2".into(), format!("{:.4}", m.mse)]);
            rows.push(vec![
                "base height m".into(),
                format!("{:.4} .. {:.4}", m.base_height_min, m.base_height_max),
            ]);
        }
        aligned(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_table_layout() {
        let mut c = ExperimentConfig::default();
        c.runtime.horizon = 0.5;
        c.runtime.nodes = 50;
        let p = study_plan(&c).unwrap();
        let t = p.tables().unwrap();
        assert_eq!(t[0].columns.len(), 1 + 24 + 24);
        assert_eq!(t[0].columns, PlanReport::columns());
        assert_eq!(t[0].rows.len(), 51);
        assert_eq!(t[0].rows[50][48], "");
        assert_eq!(t[1].rows.len(), p.solution.log.len());
        assert!(p.summary().contains("converged"));
    }

    #[test]
    fn simulation_tables_match_the_log_writers() {
        let mut c = ExperimentConfig::default();
        c.plant = crate::sim::PlantConfig::perfect();
        c.runtime.duration = 0.1;
        let r = study_simulation(&c).unwrap();
        let t = r.tables().unwrap();
        assert_eq!(t[0].columns, EpisodeLog::sample_columns());
        assert_eq!(t[0].rows.len(), 40);
        let mut direct = Vec::new();
        r.log.write_samples(&mut direct).unwrap();
        assert_eq!(t[0].to_csv().unwrap(), direct);
        assert!(r.metrics.unwrap().mae >= 0.0);
    }
}
