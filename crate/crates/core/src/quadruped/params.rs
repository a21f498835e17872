use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Legs in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Leg {
    LeftFront = 0,
    RightFront = 1,
    LeftHind = 2,
    RightHind = 3,
}

impl Leg {
    pub const ALL: [Leg; 4] = [
        Leg::LeftFront,
        Leg::RightFront,
        Leg::LeftHind,
        Leg::RightHind,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Leg {
        Self::ALL[i]
    }

    /// +1 for left legs, −1 for right legs.
    pub fn side(self) -> f64 {
        match self {
            Leg::LeftFront | Leg::LeftHind => 1.0,
            Leg::RightFront | Leg::RightHind => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Leg::LeftFront => "LF",
            Leg::RightFront => "RF",
            Leg::LeftHind => "LH",
            Leg::RightHind => "RH",
        }
    }
}

/// Rigid-body and kinematic parameters of the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    /// Total mass (kg).
    pub mass: f64,
    /// Body-frame inertia about the CoM (kg·m²), row major.
    pub inertia: [[f64; 3]; 3],
    /// Hip positions relative to the CoM in the body frame (m), LF, RF, LH, RH.
    pub hip_offsets: [[f64; 3]; 4],
    /// Hip-abduction offset, thigh and shank lengths (m).
    pub link_lengths: [f64; 3],
    /// Default height of the CoM above the feet (m).
    pub stance_height: f64,
    /// Gravitational acceleration magnitude (m/s²).
    pub gravity: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            mass: 30.0,
            inertia: [[0.88, 0.0, 0.0], [0.0, 1.85, 0.0], [0.0, 0.0, 1.97]],
            hip_offsets: [
                [0.34, 0.19, 0.0],
                [0.34, -0.19, 0.0],
                [-0.34, 0.19, 0.0],
                [-0.34, -0.19, 0.0],
            ],
            link_lengths: [0.11, 0.25, 0.33],
            stance_height: 0.45,
            gravity: 9.81,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |s: String| Err(ModelError::InvalidParams(s));
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return bad(format!("mass must be positive, got {}", self.mass));
        }
        let i = self.inertia_matrix();
        if (i - i.transpose()).amax() > 1e-12 * i.amax() || i.cholesky().is_none() {
            return bad("inertia must be symmetric positive definite".into());
        }
        let [_, thigh, shank] = self.link_lengths;
        if self
            .link_lengths
            .iter()
            .any(|l| !(l.is_finite() && *l >= 0.0))
            || thigh <= 0.0
            || shank <= 0.0
        {
            return bad("link lengths must be non-negative with positive thigh and shank".into());
        }
        if !(self.stance_height > (thigh - shank).abs() && self.stance_height < thigh + shank) {
            return bad(format!(
                "stance height {} is outside the leg workspace",
                self.stance_height
            ));
        }
        if !(self.gravity.is_finite() && self.gravity >= 0.0) {
            return bad("gravity must be non-negative".into());
        }
        Ok(())
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.inertia[r][c])
    }

    pub fn hip(&self, leg: Leg) -> Vector3<f64> {
        Vector3::from(self.hip_offsets[leg.index()])
    }

    pub fn gravity_world(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.gravity)
    }

    /// Default foot position relative to the CoM in the body frame: under the
    /// abduction offset, `stance_height` below the hip.
    pub fn default_foot(&self, leg: Leg) -> Vector3<f64> {
        self.hip(leg) + Vector3::new(0.0, leg.side() * self.link_lengths[0], -self.stance_height)
    }

    /// Joint angles placing the foot at [`RobotParams::default_foot`], knee bent backwards.
    pub fn default_leg_joints(&self) -> Vector3<f64> {
        let [_, a, b] = self.link_lengths;
        let h = self.stance_height;
        let cos_knee = ((h * h - a * a - b * b) / (2.0 * a * b)).clamp(-1.0, 1.0);
        let knee = -cos_knee.acos();
        let along = a + b * knee.cos();
        let across = b * knee.sin();
        let flexion = 0.0f64.atan2(h) - across.atan2(along);
        Vector3::new(0.0, flexion, knee)
    }

    /// Default joint configuration `q₀` for all legs.
    pub fn default_joints(&self) -> [f64; 12] {
        let leg = self.default_leg_joints();
        let mut q = [0.0; 12];
        for l in 0..4 {
            q[3 * l..3 * l + 3].copy_from_slice(leg.as_slice());
        }
        q
    }
}
