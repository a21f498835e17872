use rayon::prelude::*;

use super::output::{aligned, cutoff_label, num, opt, Table};
use super::{ExperimentConfig, ExperimentError};
use crate::runtime::{run_episode, EpisodeLog, Failure, ShapingConfig, Touchdown};

/// Failure speeds reported for the original robot (baseline, β⁻¹ = 10), m/s.
/// Reference values from a different plant.
pub const REFERENCE_FAILURE_SPEEDS: [(f64, f64); 2] = [(f64::INFINITY, 0.6), (10.0, 0.9)];

/// One cost's ramp episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RampRun {
    pub cutoff: f64,
    pub failure: Option<Failure>,
    /// Commanded speed at failure.
    pub failure_speed: Option<f64>,
    /// Commanded speed at the last sample.
    pub max_speed: f64,
    /// Last sample time (s).
    pub end_time: f64,
    pub touchdowns: Vec<Touchdown>,
    /// Mean |lateral foot offset| from the base, heading frame, over the
    /// first and the last window of the run.
    pub early_width: f64,
    pub late_width: f64,
}

impl RampRun {
    /// Speed reached: the failure speed, or the final command if it survived.
    pub fn survived_speed(&self) -> f64 {
        self.failure_speed.unwrap_or(self.max_speed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RampReport {
    pub runs: Vec<RampRun>,
    pub low_speed: f64,
    /// Largest distance between matching low-speed touchdowns of the first
    /// two runs (m); absent with fewer than two runs or no such touchdowns.
    pub low_speed_gap: Option<f64>,
}

/// Trot with a linearly increasing forward command until failure, for every
/// configured cost; runs execute in parallel.
pub fn study_velocity_ramp(config: &ExperimentConfig) -> Result<RampReport, ExperimentError> {
    let r = &config.ramp;
    if r.cutoffs.is_empty() || !(r.window_fraction > 0.0 && r.window_fraction <= 0.5) {
        return Err(ExperimentError::Config(
            "ramp needs cutoffs and a window fraction in (0, 0.5]".into(),
        ));
    }
    let runs = r
        .cutoffs
        .par_iter()
        .map(|&c| ramp_run(config, c))
        .collect::<Result<Vec<_>, _>>()?;
    let low_speed_gap = match runs.as_slice() {
        [a, b, ..] => low_speed_gap(&a.touchdowns, &b.touchdowns, r.low_speed),
        _ => None,
    };
    Ok(RampReport {
        runs,
        low_speed: r.low_speed,
        low_speed_gap,
    })
}

fn ramp_run(config: &ExperimentConfig, cutoff: f64) -> Result<RampRun, ExperimentError> {
    let r = &config.ramp;
    let mut s = config.scenario();
    s.shaping = ShapingConfig {
        cutoff: Some(cutoff),
        ..config.shaping.clone()
    };
    s.command.forward = 0.0;
    s.command.acceleration = r.acceleration;
    s.command.ramp_start = 0.0;
    s.runtime.duration = r.duration;
    let log = run_episode(&s)?;
    let end_time = log.duration();
    let speed = |t: f64| s.command.at(t).forward;
    let (early_width, late_width) = lateral_widths(&log, r.window_fraction);
    Ok(RampRun {
        cutoff,
        failure: log.failure,
        failure_speed: log.failure.map(|f| speed(f.time)),
        max_speed: speed(end_time),
        end_time,
        touchdowns: log.touchdowns,
        early_width,
        late_width,
    })
}

/// Mean |lateral offset| of touchdowns in the first and last `fraction` of
/// the run.
pub fn lateral_widths(log: &EpisodeLog, fraction: f64) -> (f64, f64) {
    let end = log.duration();
    let mean = |keep: &dyn Fn(f64) -> bool| {
        let w: Vec<f64> = log
            .touchdowns
            .iter()
            .filter(|d| keep(d.time))
            .map(|d| d.heading_offset().1.abs())
            .collect();
        if w.is_empty() {
            f64::NAN
        } else {
            w.iter().sum::<f64>() / w.len() as f64
        }
    };
    (
        mean(&|t| t <= fraction * end),
        mean(&|t| t >= (1.0 - fraction) * end),
    )
}

/// Largest heading-frame offset difference between touchdowns of the same
/// leg at the same time, over those commanded below `speed`.
pub fn low_speed_gap(a: &[Touchdown], b: &[Touchdown], speed: f64) -> Option<f64> {
    let gaps: Vec<f64> = a
        .iter()
        .filter(|d| d.commanded_speed <= speed)
        .filter_map(|d| {
            let m = b
                .iter()
                .find(|e| e.leg == d.leg && (e.time - d.time).abs() < 1e-9)?;
            let (fa, la) = d.heading_offset();
            let (fb, lb) = m.heading_offset();
            Some((fa - fb).hypot(la - lb))
        })
        .collect();
    if gaps.is_empty() {
        None
    } else {
        Some(gaps.iter().copied().fold(0.0, f64::max))
    }
}

impl RampReport {
    pub const SUMMARY_COLUMNS: [&'static str; 9] = [
        "cost",
        "cutoff",
        "failed",
        "failure_reason",
        "failure_time",
        "failure_speed",
        "max_speed",
        "early_width",
        "late_width",
    ];

    pub fn touchdown_columns() -> Vec<&'static str> {
        let mut cols = vec!["cost"];
        cols.extend(EpisodeLog::touchdown_columns());
        cols
    }

    pub fn run(&self, cutoff: f64) -> Option<&RampRun> {
        self.runs.iter().find(|r| r.cutoff == cutoff)
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut summary = Table::new("ramp_summary", &Self::SUMMARY_COLUMNS);
        let mut map = Table::new("ramp_touchdowns", &Self::touchdown_columns());
        for r in &self.runs {
            let label = cutoff_label(r.cutoff);
            summary.push(vec![
                label.clone(),
                num(r.cutoff),
                u8::from(r.failure.is_some()).to_string(),
                r.failure
                    .map(|f| f.reason.name().to_string())
                    .unwrap_or_default(),
                opt(r.failure.map(|f| f.time)),
                opt(r.failure_speed),
                num(r.max_speed),
                num(r.early_width),
                num(r.late_width),
            ]);
            for d in &r.touchdowns {
                let (fwd, lat) = d.heading_offset();
                map.push(vec![
                    label.clone(),
                    num(d.time),
                    d.leg.name().to_string(),
                    num(d.foot.x),
                    num(d.foot.y),
                    num(d.foot.z),
                    num(d.base.x),
                    num(d.base.y),
                    num(d.yaw),
                    num(fwd),
                    num(lat),
                    num(d.commanded_speed),
                ]);
            }
        }
        vec![summary, map]
    }

    pub fn summary(&self) -> String {
        let mut rows = vec![vec![
            "cost".to_string(),
            "outcome".into(),
            "speed m/s".into(),
            "early width m".into(),
            "late width m".into(),
            "reference speed m/s".into(),
        ]];
        for r in &self.runs {
            let outcome = match r.failure {
                Some(f) => format!("failed ({}) at {:.2} s", f.reason.name(), f.time),
                None => format!("survived {:.1} s", r.end_time),
            };
            let reference = REFERENCE_FAILURE_SPEEDS
                .iter()
                .find(|p| p.0 == r.cutoff)
                .map_or("-".into(), |p| format!("{}", p.1));
            rows.push(vec![
                cutoff_label(r.cutoff),
                outcome,
                format!("{:.3}", r.survived_speed()),
                format!("{:.4}", r.early_width),
                format!("{:.4}", r.late_width),
                reference,
            ]);
        }
        let mut out =
            String::from("Forward-speed ramp (reference values from a different plant)\n\n");
        out.push_str(&aligned(&rows));
        out.push_str(&format!(
            "\nlow-speed touchdown gap (commanded <= {} m/s): {}\n",
            self.low_speed,
            self.low_speed_gap
                .map_or("-".into(), |g| format!("{g:.4} m"))
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.plant = crate::sim::PlantConfig::perfect();
        c.ramp.duration = 2.0;
        c.ramp.acceleration = 0.1;
        c.ramp.low_speed = 0.1;
        c
    }

    #[test]
    fn short_ramp_logs_touchdowns_and_speeds() {
        let r = study_velocity_ramp(&short()).unwrap();
        assert_eq!(r.runs.len(), 2);
        for run in &r.runs {
            assert!(run.failure.is_none(), "{:?}", run.failure);
            assert!((run.max_speed - 0.1 * run.end_time).abs() < 1e-12);
            assert!(!run.touchdowns.is_empty());
            assert!(run.early_width > 0.2 && run.late_width > 0.2);
            assert!(run
                .touchdowns
                .windows(2)
                .all(|w| w[1].commanded_speed >= w[0].commanded_speed));
        }
        let gap = r.low_speed_gap.unwrap();
        assert!(gap.is_finite() && gap >= 0.0);
        let tables = r.tables();
        assert_eq!(tables[0].columns, RampReport::SUMMARY_COLUMNS);
        assert_eq!(tables[1].columns, RampReport::touchdown_columns());
        assert_eq!(
            tables[1].rows.len(),
            r.runs.iter().map(|x| x.touchdowns.len()).sum::<usize>()
        );
    }

    #[test]
    fn identical_maps_have_no_gap() {
        let r = study_velocity_ramp(&short()).unwrap();
        let t = &r.runs[0].touchdowns;
        assert_eq!(low_speed_gap(t, t, 1.0), Some(0.0));
        assert_eq!(low_speed_gap(t, t, -1.0), None);
    }

    #[test]
    fn invalid_window_is_rejected() {
        let mut c = short();
        c.ramp.window_fraction = 0.8;
        assert!(study_velocity_ramp(&c).is_err());
    }
}
