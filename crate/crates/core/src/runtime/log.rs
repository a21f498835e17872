use std::io::Write;

use nalgebra::{DVector, Vector3};

use super::FailureReason;
use crate::quadruped::Leg;

/// One simulation-rate record.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    /// Plant state (24).
    pub state: DVector<f64>,
    /// Foot in contact with the ground.
    pub contact: [bool; 4],
    /// Foot scheduled in stance.
    pub stance: [bool; 4],
    /// Forces sent to the plant (12, world frame).
    pub commanded: DVector<f64>,
    /// Ground reaction forces acting at `time` (12).
    pub realized: DVector<f64>,
    /// Forces of the plan's recovered input (12).
    pub planned: DVector<f64>,
    /// Planned base position at `time`.
    pub planned_base: Vector3<f64>,
}

/// Solver statistics of one replan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplanRecord {
    pub time: f64,
    pub cost: f64,
    pub merit: f64,
    pub step: f64,
    pub violation: f64,
    pub max_violation: f64,
    pub converged: bool,
    /// Largest gap between the tracker's filter state and the exact filter
    /// state of the previous plan at this instant.
    pub filter_gap: f64,
    /// Wall time of the solve (s); not written to CSV.
    pub solve_seconds: f64,
}

/// Scheduled swing-to-stance transition of one foot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Touchdown {
    pub time: f64,
    pub leg: Leg,
    pub foot: Vector3<f64>,
    pub base: Vector3<f64>,
    pub yaw: f64,
    /// Commanded forward speed at touchdown (m/s).
    pub commanded_speed: f64,
}

impl Touchdown {
    /// Foot offset from the base in the heading frame (forward, lateral).
    pub fn heading_offset(&self) -> (f64, f64) {
        let d = self.foot - self.base;
        let (s, c) = self.yaw.sin_cos();
        (c * d.x + s * d.y, -s * d.x + c * d.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Failure {
    pub time: f64,
    pub reason: FailureReason,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeLog {
    pub dt: f64,
    pub nominal_height: f64,
    pub samples: Vec<Sample>,
    pub replans: Vec<ReplanRecord>,
    pub touchdowns: Vec<Touchdown>,
    pub failure: Option<Failure>,
}

const STATE_NAMES: [&str; 12] = [
    "roll", "pitch", "yaw", "x", "y", "z", "wx", "wy", "wz", "vx", "vy", "vz",
];
const AXES: [&str; 3] = ["x", "y", "z"];

impl EpisodeLog {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.time)
    }

    /// Column names of the sample table.
    pub fn sample_columns() -> Vec<String> {
        let mut cols = vec!["time".to_string()];
        cols.extend(STATE_NAMES.iter().map(|s| s.to_string()));
        cols.extend((0..12).map(|j| format!("q{j}")));
        for prefix in ["contact", "stance"] {
            cols.extend(Leg::ALL.iter().map(|l| format!("{prefix}_{}", l.name())));
        }
        for prefix in ["cmd", "real", "plan"] {
            for leg in Leg::ALL {
                cols.extend(AXES.iter().map(|a| format!("{prefix}_f{a}_{}", leg.name())));
            }
        }
        cols.extend(AXES.iter().map(|a| format!("plan_{a}")));
        cols
    }

    pub fn write_samples<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::sample_columns())?;
        for s in &self.samples {
            let mut row = vec![fmt(s.time)];
            row.extend(s.state.iter().map(|v| fmt(*v)));
            row.extend(
                s.contact
                    .iter()
                    .chain(&s.stance)
                    .map(|b| u8::from(*b).to_string()),
            );
            for v in [&s.commanded, &s.realized, &s.planned] {
                row.extend(v.iter().map(|x| fmt(*x)));
            }
            row.extend(s.planned_base.iter().map(|v| fmt(*v)));
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn replan_columns() -> Vec<&'static str> {
        vec![
            "time",
            "cost",
            "merit",
            "step",
            "violation",
            "max_violation",
            "converged",
            "filter_gap",
        ]
    }

    pub fn write_replans<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::replan_columns())?;
        for r in &self.replans {
            w.write_record([
                fmt(r.time),
                fmt(r.cost),
                fmt(r.merit),
                fmt(r.step),
                fmt(r.violation),
                fmt(r.max_violation),
                u8::from(r.converged).to_string(),
                fmt(r.filter_gap),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn touchdown_columns() -> Vec<&'static str> {
        vec![
            "time",
            "leg",
            "foot_x",
            "foot_y",
            "foot_z",
            "base_x",
            "base_y",
            "yaw",
            "forward_offset",
            "lateral_offset",
            "commanded_speed",
        ]
    }

    pub fn write_touchdowns<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::touchdown_columns())?;
        for d in &self.touchdowns {
            let (fwd, lat) = d.heading_offset();
            w.write_record([
                fmt(d.time),
                d.leg.name().to_string(),
                fmt(d.foot.x),
                fmt(d.foot.y),
                fmt(d.foot.z),
                fmt(d.base.x),
                fmt(d.base.y),
                fmt(d.yaw),
                fmt(fwd),
                fmt(lat),
                fmt(d.commanded_speed),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that round-trips.
pub(crate) fn fmt(v: f64) -> String {
    format!("{v:?}")
}
