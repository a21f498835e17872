//! Z-Y-X (yaw-pitch-roll) Euler angles `θ = (roll, pitch, yaw)`.

use nalgebra::{Matrix3, Vector3};

/// Pitch magnitude at which the rate mapping is treated as singular.
pub const PITCH_LIMIT: f64 = std::f64::consts::FRAC_PI_2 - 1e-3;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Body-to-world rotation `R = R_z(yaw) R_y(pitch) R_x(roll)`.
pub fn rotation(theta: &Vector3<f64>) -> Matrix3<f64> {
    rot_z(theta.z) * rot_y(theta.y) * rot_x(theta.x)
}

/// `∂R/∂θᵢ` for each Euler angle.
pub fn rotation_derivatives(theta: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let (rx, ry, rz) = (rot_x(theta.x), rot_y(theta.y), rot_z(theta.z));
    let ex = skew(&Vector3::x());
    let ey = skew(&Vector3::y());
    let ez = skew(&Vector3::z());
    [rz * ry * rx * ex, rz * ry * ey * rx, ez * rz * ry * rx]
}

/// Maps body angular velocity to Euler-angle rates, `θ̇ = T(θ) ω`.
pub fn rate_matrix(theta: &Vector3<f64>) -> Matrix3<f64> {
    let (sr, cr) = theta.x.sin_cos();
    let (sp, cp) = theta.y.sin_cos();
    let tp = sp / cp;
    Matrix3::new(1.0, sr * tp, cr * tp, 0.0, cr, -sr, 0.0, sr / cp, cr / cp)
}

/// `∂T/∂θᵢ`; the yaw derivative vanishes.
pub fn rate_matrix_derivatives(theta: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let (sr, cr) = theta.x.sin_cos();
    let (sp, cp) = theta.y.sin_cos();
    let tp = sp / cp;
    let sec2 = 1.0 / (cp * cp);
    let d_roll = Matrix3::new(
        0.0,
        cr * tp,
        -sr * tp,
        0.0,
        -sr,
        -cr,
        0.0,
        cr / cp,
        -sr / cp,
    );
    let d_pitch = Matrix3::new(
        0.0,
        sr * sec2,
        cr * sec2,
        0.0,
        0.0,
        0.0,
        0.0,
        sr * sp * sec2,
        cr * sp * sec2,
    );
    [d_roll, d_pitch, Matrix3::zeros()]
}

/// Euler angles of a rotation matrix (inverse of [`rotation`] away from the singularity).
pub fn euler_from_rotation(r: &Matrix3<f64>) -> Vector3<f64> {
    let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    Vector3::new(roll, pitch, yaw)
}
