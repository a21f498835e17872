//! Three-joint serial legs: hip abduction about x, hip flexion and knee about y.

use nalgebra::{Matrix3, Vector3};

use super::rotation::{rot_x, rot_y, rotation, skew};
use super::{Leg, RobotParams};

/// Condition number above which a leg Jacobian is reported as near-singular.
pub const SINGULAR_CONDITION: f64 = 1e6;

struct LegFrames {
    rx: Matrix3<f64>,
    ry2: Matrix3<f64>,
    ry3: Matrix3<f64>,
    d: Vector3<f64>,
    a: Vector3<f64>,
    b: Vector3<f64>,
}

impl LegFrames {
    fn new(params: &RobotParams, leg: Leg, q: &Vector3<f64>) -> Self {
        let [off, thigh, shank] = params.link_lengths;
        Self {
            rx: rot_x(q.x),
            ry2: rot_y(q.y),
            ry3: rot_y(q.z),
            d: Vector3::new(0.0, leg.side() * off, 0.0),
            a: Vector3::new(0.0, 0.0, -thigh),
            b: Vector3::new(0.0, 0.0, -shank),
        }
    }

    /// Knee-to-foot and flexion-to-foot vectors in the flexion frame.
    fn chain(&self) -> (Vector3<f64>, Vector3<f64>) {
        let s2 = self.a + self.ry3 * self.b;
        let s1 = self.d + self.ry2 * s2;
        (s1, s2)
    }
}

/// Foot position relative to the CoM in the body frame.
pub fn foot_position(params: &RobotParams, leg: Leg, q: &Vector3<f64>) -> Vector3<f64> {
    let f = LegFrames::new(params, leg, q);
    params.hip(leg) + f.rx * f.chain().0
}

/// `∂(foot position)/∂q` in the body frame.
pub fn leg_jacobian(params: &RobotParams, leg: Leg, q: &Vector3<f64>) -> Matrix3<f64> {
    let f = LegFrames::new(params, leg, q);
    let (s1, s2) = f.chain();
    let ex = skew(&Vector3::x());
    let ey = skew(&Vector3::y());
    Matrix3::from_columns(&[
        f.rx * ex * s1,
        f.rx * f.ry2 * ey * s2,
        f.rx * f.ry2 * f.ry3 * ey * f.b,
    ])
}

/// `∂(J(q) u)/∂q` for a fixed joint-velocity vector `u`.
pub fn jacobian_product_derivative(
    params: &RobotParams,
    leg: Leg,
    q: &Vector3<f64>,
    u: &Vector3<f64>,
) -> Matrix3<f64> {
    let f = LegFrames::new(params, leg, q);
    let (s1, s2) = f.chain();
    let ex = skew(&Vector3::x());
    let ey = skew(&Vector3::y());
    let (rx, ry2, ry3) = (f.rx, f.ry2, f.ry3);
    let p11 = rx * ex * ex * s1;
    let p12 = rx * ex * ry2 * ey * s2;
    let p13 = rx * ex * ry2 * ry3 * ey * f.b;
    let p22 = rx * ry2 * ey * ey * s2;
    let p23 = rx * ry2 * ey * ry3 * ey * f.b;
    let p33 = rx * ry2 * ry3 * ey * ey * f.b;
    Matrix3::from_columns(&[
        p11 * u.x + p12 * u.y + p13 * u.z,
        p12 * u.x + p22 * u.y + p23 * u.z,
        p13 * u.x + p23 * u.y + p33 * u.z,
    ])
}

/// Ratio of extreme singular values; infinite for a rank-deficient matrix.
pub fn condition_number(j: &Matrix3<f64>) -> f64 {
    let sv = j.singular_values();
    let (max, min) = (sv.max(), sv.min());
    if min <= f64::EPSILON * max {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn is_near_singular(j: &Matrix3<f64>) -> bool {
    condition_number(j) > SINGULAR_CONDITION
}

/// World-frame foot positions for joint angles `q` (12) and base pose `(θ, p)`.
pub fn forward_kinematics(
    params: &RobotParams,
    q: &[f64],
    theta: &Vector3<f64>,
    position: &Vector3<f64>,
) -> [Vector3<f64>; 4] {
    let r = rotation(theta);
    Leg::ALL.map(|leg| {
        let i = leg.index();
        let ql = Vector3::new(q[3 * i], q[3 * i + 1], q[3 * i + 2]);
        position + r * foot_position(params, leg, &ql)
    })
}

/// Damped least-squares inverse `Jᵀ(JJᵀ + λ²I)⁻¹`; plain inverse when well conditioned.
pub fn damped_inverse(j: &Matrix3<f64>, damping: f64) -> (Matrix3<f64>, bool) {
    if !is_near_singular(j) {
        if let Some(inv) = j.try_inverse() {
            return (inv, false);
        }
    }
    let jjt = j * j.transpose() + Matrix3::identity() * (damping * damping);
    let inv = jjt
        .try_inverse()
        .map(|m| j.transpose() * m)
        .unwrap_or_else(Matrix3::zeros);
    (inv, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_fk(params: &RobotParams, leg: Leg, q: &Vector3<f64>) -> Matrix3<f64> {
        let h = 1e-6;
        Matrix3::from_fn(|r, c| {
            let mut p = *q;
            let mut m = *q;
            p[c] += h;
            m[c] -= h;
            (foot_position(params, leg, &p)[r] - foot_position(params, leg, &m)[r]) / (2.0 * h)
        })
    }

    #[test]
    fn default_joints_reach_default_footprint() {
        let params = RobotParams::default();
        let q0 = params.default_leg_joints();
        assert!((q0.z + 1.3812).abs() < 1e-3);
        assert!((q0.y - 0.8044).abs() < 1e-3);
        for leg in Leg::ALL {
            let p = foot_position(&params, leg, &q0);
            assert!((p - params.default_foot(leg)).amax() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        let params = RobotParams::default();
        let q = Vector3::new(0.2, 0.6, -1.1);
        let u = Vector3::new(0.5, -1.2, 2.0);
        for leg in Leg::ALL {
            let analytic = jacobian_product_derivative(&params, leg, &q, &u);
            let h = 1e-6;
            let fd = Matrix3::from_fn(|r, c| {
                let mut p = q;
                let mut m = q;
                p[c] += h;
                m[c] -= h;
                ((leg_jacobian(&params, leg, &p) * u)[r] - (leg_jacobian(&params, leg, &m) * u)[r])
                    / (2.0 * h)
            });
            assert!((analytic - fd).amax() < 1e-8);
            assert!((leg_jacobian(&params, leg, &q) - fd_fk(&params, leg, &q)).amax() < 1e-9);
        }
    }

    #[test]
    fn stretched_leg_is_singular() {
        let params = RobotParams::default();
        let j = leg_jacobian(&params, Leg::LeftFront, &Vector3::new(0.0, 0.3, 0.0));
        assert!(is_near_singular(&j));
        let (_, damped) = damped_inverse(&j, 1e-2);
        assert!(damped);
        let j0 = leg_jacobian(&params, Leg::LeftFront, &params.default_leg_joints());
        assert!(!is_near_singular(&j0));
    }
}
