use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{Leg, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contact {
    Stance,
    Swing,
}

/// Periodic gait timing, terrain normal and friction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitSchedule {
    /// Gait period (s).
    pub period: f64,
    /// Fraction of the period each leg spends in stance.
    pub duty: f64,
    /// Phase offsets (fraction of the period), LF, RF, LH, RH.
    pub offsets: [f64; 4],
    pub normal: [f64; 3],
    pub friction: f64,
    /// All legs stay in stance before this time (s); the cycle starts here.
    pub standing_until: f64,
}

impl Default for GaitSchedule {
    fn default() -> Self {
        Self::trot(0.7)
    }
}

impl GaitSchedule {
    /// Trot pairing LF+RH and RF+LH with duty 0.5.
    pub fn trot(period: f64) -> Self {
        Self {
            period,
            duty: 0.5,
            offsets: [0.0, 0.5, 0.5, 0.0],
            normal: [0.0, 0.0, 1.0],
            friction: 0.7,
            standing_until: 0.0,
        }
    }

    /// All legs in permanent stance.
    pub fn standing() -> Self {
        Self {
            duty: 1.0,
            ..Self::trot(0.7)
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |s: &str| Err(ModelError::InvalidGait(s.into()));
        if !(self.period.is_finite() && self.period > 0.0) {
            return bad("period must be positive");
        }
        if !(self.duty > 0.0 && self.duty <= 1.0) {
            return bad("duty factor must lie in (0, 1]");
        }
        if self.offsets.iter().any(|o| !(0.0..1.0).contains(o)) {
            return bad("phase offsets must lie in [0, 1)");
        }
        if !(self.friction.is_finite() && self.friction > 0.0) {
            return bad("friction coefficient must be positive");
        }
        let n = Vector3::from(self.normal);
        if !(n.norm().is_finite() && n.norm() > 0.0) {
            return bad("terrain normal must be nonzero");
        }
        Ok(())
    }

    pub fn normal(&self) -> Vector3<f64> {
        Vector3::from(self.normal).normalize()
    }

    /// Swing duration (s).
    pub fn swing_duration(&self) -> f64 {
        (1.0 - self.duty) * self.period
    }

    /// Contact state of `leg` at time `t` and the phase within that mode in `[0, 1]`.
    pub fn mode_at(&self, t: f64, leg: Leg) -> (Contact, f64) {
        if self.duty >= 1.0 {
            return (Contact::Stance, 0.0);
        }
        if t < self.standing_until {
            return (Contact::Stance, 0.0);
        }
        let cycles = (t - self.standing_until) / self.period - self.offsets[leg.index()] + 1e-9;
        let phase = cycles - cycles.floor();
        if phase < self.duty {
            (Contact::Stance, phase / self.duty)
        } else {
            (
                Contact::Swing,
                ((phase - self.duty) / (1.0 - self.duty)).min(1.0),
            )
        }
    }

    pub fn stance_count(&self, t: f64) -> usize {
        Leg::ALL
            .iter()
            .filter(|&&l| self.mode_at(t, l).0 == Contact::Stance)
            .count()
    }
}

/// Normal-velocity profile `c` followed by swing feet.
///
/// The curve rises as `K s(1 − s)²` on the lift phase and descends with a
/// cubic blend from 0 to the touchdown velocity with zero end slopes. The
/// split point is chosen so the foot returns to its lift-off height exactly
/// at touchdown; `K` sets the apex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwingProfile {
    /// Apex height above lift-off (m).
    pub apex: f64,
    /// Normal velocity at touchdown (m/s, negative).
    pub touchdown_velocity: f64,
}

impl Default for SwingProfile {
    fn default() -> Self {
        Self {
            apex: 0.08,
            touchdown_velocity: -0.75,
        }
    }
}

/// Swing curve evaluated for a given swing duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingCurve {
    duration: f64,
    apex: f64,
    touchdown: f64,
    split: f64,
    gain: f64,
}

impl SwingProfile {
    pub fn curve(&self, swing_duration: f64) -> Result<SwingCurve, ModelError> {
        if !(self.apex > 0.0 && self.touchdown_velocity < 0.0 && swing_duration > 0.0) {
            return Err(ModelError::InvalidGait(
                "swing needs positive apex, negative touchdown velocity and positive duration"
                    .into(),
            ));
        }
        let descent = -0.5 * self.touchdown_velocity * swing_duration;
        let split = 1.0 - self.apex / descent;
        if split <= 0.0 {
            return Err(ModelError::InvalidGait(format!(
                "swing of {swing_duration} s is too short to reach apex {} m",
                self.apex
            )));
        }
        Ok(SwingCurve {
            duration: swing_duration,
            apex: self.apex,
            touchdown: self.touchdown_velocity,
            split,
            gain: 12.0 * self.apex / (swing_duration * split),
        })
    }
}

impl SwingCurve {
    /// Normal velocity `c` and displacement since lift-off at swing phase `s`.
    pub fn at(&self, phase: f64) -> (f64, f64) {
        let s = phase.clamp(0.0, 1.0);
        if s <= self.split {
            let w = s / self.split;
            let c = self.gain * w * (1.0 - w) * (1.0 - w);
            // ∫₀^w ω(1−ω)² dω = w²/2 − 2w³/3 + w⁴/4
            let z = self.gain
                * self.duration
                * self.split
                * (w * w / 2.0 - 2.0 * w.powi(3) / 3.0 + w.powi(4) / 4.0);
            (c, z)
        } else {
            let span = 1.0 - self.split;
            let w = (s - self.split) / span;
            let c = self.touchdown * (3.0 * w * w - 2.0 * w.powi(3));
            let z =
                self.apex + self.touchdown * self.duration * span * (w.powi(3) - 0.5 * w.powi(4));
            (c, z)
        }
    }

    pub fn split(&self) -> f64 {
        self.split
    }
}

/// Convenience wrapper: `c` and displacement at `phase` for the given swing duration.
pub fn swing_reference(
    profile: &SwingProfile,
    swing_duration: f64,
    phase: f64,
) -> Result<(f64, f64), ModelError> {
    Ok(profile.curve(swing_duration)?.at(phase))
}
