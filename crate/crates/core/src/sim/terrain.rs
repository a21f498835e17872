use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Flat spring-damper ground with viscous friction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainModel {
    /// Normal stiffness `k_p` (N/m).
    pub stiffness: f64,
    /// Normal damping `k_d` (N·s/m).
    pub damping: f64,
    /// Friction coefficient `μ`.
    pub friction: f64,
    /// Viscous tangential coefficient (N·s/m).
    pub tangential_damping: f64,
    /// Ground height (m).
    pub height: f64,
    pub normal: [f64; 3],
}

impl Default for TerrainModel {
    fn default() -> Self {
        Self::hard()
    }
}

impl TerrainModel {
    pub fn new(stiffness: f64, damping: f64) -> Result<Self, SimError> {
        let t = Self {
            stiffness,
            damping,
            ..Self::hard()
        };
        t.validate()?;
        Ok(t)
    }

    pub fn hard() -> Self {
        Self {
            stiffness: 1e6,
            damping: 100.0,
            friction: 0.7,
            tangential_damping: 5e3,
            height: 0.0,
            normal: [0.0, 0.0, 1.0],
        }
    }

    pub fn medium() -> Self {
        Self {
            stiffness: 1e5,
            damping: 50.0,
            ..Self::hard()
        }
    }

    pub fn soft() -> Self {
        Self {
            stiffness: 1e4,
            damping: 30.0,
            ..Self::hard()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |s: &str| Err(SimError::InvalidConfig(s.into()));
        if !(self.stiffness.is_finite() && self.stiffness > 0.0) {
            return bad("terrain stiffness must be positive");
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return bad("terrain damping must be non-negative");
        }
        if !(self.friction.is_finite() && self.friction > 0.0) {
            return bad("terrain friction must be positive");
        }
        if !(self.tangential_damping.is_finite() && self.tangential_damping >= 0.0) {
            return bad("tangential damping must be non-negative");
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

    /// Ground height below a horizontal position.
    pub fn height_at(&self, _x: f64, _y: f64) -> f64 {
        self.height
    }

    /// Penetration depth of a world point (0 above ground).
    pub fn penetration(&self, p: &Vector3<f64>) -> f64 {
        (self.height_at(p.x, p.y) - p.z).max(0.0)
    }
}

/// World-frame ground reaction force on a foot.
///
/// `depth_rate` is the rate of penetration; `tangential_velocity` is the
/// foot velocity component in the ground plane.
pub fn contact_force(
    depth: f64,
    depth_rate: f64,
    tangential_velocity: &Vector3<f64>,
    terrain: &TerrainModel,
) -> Vector3<f64> {
    if depth <= 0.0 {
        return Vector3::zeros();
    }
    let n = terrain.normal();
    let f_n = (terrain.stiffness * depth + terrain.damping * depth_rate).max(0.0);
    let mut f_t = -tangential_velocity * terrain.tangential_damping;
    let limit = terrain.friction * f_n;
    let norm = f_t.norm();
    if norm > limit {
        f_t *= limit / norm;
    }
    n * f_n + f_t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contact_force_examples() {
        let t = TerrainModel::new(1e5, 50.0).unwrap();
        assert_eq!(contact_force(0.0, 1.0, &Vector3::x(), &t), Vector3::zeros());
        let f = contact_force(1e-3, 0.0, &Vector3::zeros(), &t);
        assert!((f - Vector3::new(0.0, 0.0, 100.0)).amax() < 1e-9);
        let f = contact_force(1e-3, 0.0, &Vector3::new(100.0, 0.0, 0.0), &t);
        assert!((f.x + 70.0).abs() < 1e-9 && (f.z - 100.0).abs() < 1e-9);
    }

    #[test]
    fn pulling_damping_does_not_create_adhesion() {
        let t = TerrainModel::soft();
        let f = contact_force(1e-4, -10.0, &Vector3::zeros(), &t);
        assert_eq!(f, Vector3::zeros());
    }

    #[test]
    fn invalid_terrain_is_rejected() {
        assert!(TerrainModel::new(0.0, 1.0).is_err());
        assert!(TerrainModel::new(1.0, -1.0).is_err());
    }
}
