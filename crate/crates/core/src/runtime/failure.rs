use nalgebra::DVector;
use serde::Serialize;

use super::FailureThresholds;
use crate::quadruped::{POSITION, THETA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Height,
    Tilt,
    NonFinite,
    Solver,
    Plant,
}

impl FailureReason {
    pub fn name(self) -> &'static str {
        match self {
            FailureReason::Height => "height",
            FailureReason::Tilt => "tilt",
            FailureReason::NonFinite => "non_finite",
            FailureReason::Solver => "solver",
            FailureReason::Plant => "plant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureStatus {
    Ok,
    Failed(FailureReason),
}

/// Streaming failure check over uniformly or non-uniformly sampled states.
#[derive(Debug, Clone)]
pub struct FailureMonitor {
    thresholds: FailureThresholds,
    nominal_height: f64,
    low_since: Option<f64>,
}

impl FailureMonitor {
    pub fn new(thresholds: FailureThresholds, nominal_height: f64) -> Self {
        Self {
            thresholds,
            nominal_height,
            low_since: None,
        }
    }

    pub fn update(&mut self, t: f64, x: &DVector<f64>) -> FailureStatus {
        if !x.iter().all(|v| v.is_finite()) {
            return FailureStatus::Failed(FailureReason::NonFinite);
        }
        let tilt = x[THETA].abs().max(x[THETA + 1].abs());
        if tilt > self.thresholds.max_tilt {
            return FailureStatus::Failed(FailureReason::Tilt);
        }
        if x[POSITION + 2] < self.thresholds.height_fraction * self.nominal_height {
            let since = *self.low_since.get_or_insert(t);
            if t - since > self.thresholds.persistence {
                return FailureStatus::Failed(FailureReason::Height);
            }
        } else {
            self.low_since = None;
        }
        FailureStatus::Ok
    }
}

/// Check a window of `(time, state)` samples; the first failure wins.
pub fn failure_detector(
    times: &[f64],
    states: &[DVector<f64>],
    nominal_height: f64,
    thresholds: &FailureThresholds,
) -> FailureStatus {
    let mut monitor = FailureMonitor::new(thresholds.clone(), nominal_height);
    for (t, x) in times.iter().zip(states) {
        if let FailureStatus::Failed(r) = monitor.update(*t, x) {
            return FailureStatus::Failed(r);
        }
    }
    FailureStatus::Ok
}
