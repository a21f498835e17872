use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, Vector3};

use super::kinematics::{foot_position, jacobian_product_derivative, leg_jacobian};
use super::rotation::{
    rate_matrix, rate_matrix_derivatives, rotation, rotation_derivatives, skew, PITCH_LIMIT,
};
use super::{Leg, ModelError, RobotParams};

pub const STATE_DIM: usize = 24;
pub const INPUT_DIM: usize = 24;

/// Offsets of the state blocks.
pub const THETA: usize = 0;
pub const POSITION: usize = 3;
pub const OMEGA: usize = 6;
pub const VELOCITY: usize = 9;
pub const JOINTS: usize = 12;
/// Offsets of the input blocks; forces of leg `i` start at `3i`.
pub const FORCES: usize = 0;
pub const JOINT_VELOCITIES: usize = 12;

pub fn block(x: &DVector<f64>, offset: usize) -> Vector3<f64> {
    Vector3::new(x[offset], x[offset + 1], x[offset + 2])
}

pub fn set_block(x: &mut DVector<f64>, offset: usize, v: &Vector3<f64>) {
    x.rows_mut(offset, 3).copy_from(v);
}

pub fn leg_joints(x: &DVector<f64>, leg: Leg) -> Vector3<f64> {
    block(x, JOINTS + 3 * leg.index())
}

pub fn leg_force(u: &DVector<f64>, leg: Leg) -> Vector3<f64> {
    block(u, FORCES + 3 * leg.index())
}

pub fn leg_joint_velocity(u: &DVector<f64>, leg: Leg) -> Vector3<f64> {
    block(u, JOINT_VELOCITIES + 3 * leg.index())
}

/// Kinodynamic model with cached inertia terms.
#[derive(Debug, Clone)]
pub struct QuadrupedModel {
    params: RobotParams,
    inertia: Matrix3<f64>,
    inertia_inv: Matrix3<f64>,
}

type Mat3x24 = SMatrix<f64, 3, 24>;

impl QuadrupedModel {
    pub fn new(params: RobotParams) -> Result<Self, ModelError> {
        params.validate()?;
        let inertia = params.inertia_matrix();
        let inertia_inv = inertia
            .try_inverse()
            .ok_or_else(|| ModelError::InvalidParams("singular inertia".into()))?;
        Ok(Self {
            params,
            inertia,
            inertia_inv,
        })
    }

    pub fn params(&self) -> &RobotParams {
        &self.params
    }

    fn check(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<(), ModelError> {
        if x.len() != STATE_DIM || u.len() != INPUT_DIM {
            return Err(ModelError::Dimension(format!(
                "state {} and input {} (expected {STATE_DIM}, {INPUT_DIM})",
                x.len(),
                u.len()
            )));
        }
        if !x.iter().chain(u.iter()).all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        check_chart(x)
    }

    /// State derivative of the kinodynamic equations of motion.
    pub fn eom(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check(x, u)?;
        let theta = block(x, THETA);
        let omega = block(x, OMEGA);
        let v = block(x, VELOCITY);
        let r = rotation(&theta);
        let rt = r.transpose();
        let mut torque = -omega.cross(&(self.inertia * omega));
        let mut force = Vector3::zeros();
        for leg in Leg::ALL {
            let f_body = rt * leg_force(u, leg);
            let foot = foot_position(&self.params, leg, &leg_joints(x, leg));
            torque += foot.cross(&f_body);
            force += f_body;
        }
        let mut dx = DVector::zeros(STATE_DIM);
        set_block(&mut dx, THETA, &(rate_matrix(&theta) * omega));
        set_block(&mut dx, POSITION, &(r * v));
        set_block(&mut dx, OMEGA, &(self.inertia_inv * torque));
        set_block(
            &mut dx,
            VELOCITY,
            &(rt * self.params.gravity_world() + force / self.params.mass),
        );
        dx.rows_mut(JOINTS, 12)
            .copy_from(&u.rows(JOINT_VELOCITIES, 12));
        Ok(dx)
    }

    /// `(∂f/∂x, ∂f/∂u)` of [`QuadrupedModel::eom`].
    pub fn eom_jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), ModelError> {
        self.check(x, u)?;
        let theta = block(x, THETA);
        let omega = block(x, OMEGA);
        let v = block(x, VELOCITY);
        let r = rotation(&theta);
        let rt = r.transpose();
        let dr = rotation_derivatives(&theta);
        let dt = rate_matrix_derivatives(&theta);
        let mut a = DMatrix::zeros(STATE_DIM, STATE_DIM);
        let mut b = DMatrix::zeros(STATE_DIM, INPUT_DIM);
        let m = self.params.mass;

        let mut force_world = Vector3::zeros();
        let mut torque_theta = Matrix3::zeros();
        for leg in Leg::ALL {
            let i = leg.index();
            let lam = leg_force(u, leg);
            force_world += lam;
            let q = leg_joints(x, leg);
            let foot = foot_position(&self.params, leg, &q);
            let f_body = rt * lam;
            for (j, d) in dr.iter().enumerate() {
                let col = foot.cross(&(d.transpose() * lam));
                torque_theta.set_column(j, &col);
            }
            let mut ath = a.view_mut((OMEGA, THETA), (3, 3));
            ath += self.inertia_inv * torque_theta;
            let jq = leg_jacobian(&self.params, leg, &q);
            a.view_mut((OMEGA, JOINTS + 3 * i), (3, 3))
                .copy_from(&(self.inertia_inv * (-skew(&f_body) * jq)));
            b.view_mut((OMEGA, FORCES + 3 * i), (3, 3))
                .copy_from(&(self.inertia_inv * skew(&foot) * rt));
            b.view_mut((VELOCITY, FORCES + 3 * i), (3, 3))
                .copy_from(&(rt / m));
        }
        let accel_world = self.params.gravity_world() + force_world / m;
        for j in 0..3 {
            a.view_mut((THETA, THETA + j), (3, 1))
                .copy_from(&(dt[j] * omega));
            a.view_mut((POSITION, THETA + j), (3, 1))
                .copy_from(&(dr[j] * v));
            a.view_mut((VELOCITY, THETA + j), (3, 1))
                .copy_from(&(dr[j].transpose() * accel_world));
        }
        a.view_mut((THETA, OMEGA), (3, 3))
            .copy_from(&rate_matrix(&theta));
        a.view_mut((POSITION, VELOCITY), (3, 3)).copy_from(&r);
        let iw = self.inertia * omega;
        a.view_mut((OMEGA, OMEGA), (3, 3))
            .copy_from(&(self.inertia_inv * (skew(&iw) - skew(&omega) * self.inertia)));
        for k in 0..12 {
            b[(JOINTS + k, JOINT_VELOCITIES + k)] = 1.0;
        }
        Ok((a, b))
    }

    /// World-frame foot velocity `R(v + ω×r + J u_J)`.
    pub fn foot_velocity(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        leg: Leg,
    ) -> Result<Vector3<f64>, ModelError> {
        self.check(x, u)?;
        let q = leg_joints(x, leg);
        let foot = foot_position(&self.params, leg, &q);
        let jq = leg_jacobian(&self.params, leg, &q);
        let w = block(x, VELOCITY) + block(x, OMEGA).cross(&foot) + jq * leg_joint_velocity(u, leg);
        Ok(rotation(&block(x, THETA)) * w)
    }

    /// `(∂v_EE/∂x, ∂v_EE/∂u)` of [`QuadrupedModel::foot_velocity`].
    pub fn foot_velocity_jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        leg: Leg,
    ) -> Result<(Mat3x24, Mat3x24), ModelError> {
        self.check(x, u)?;
        let i = leg.index();
        let theta = block(x, THETA);
        let omega = block(x, OMEGA);
        let q = leg_joints(x, leg);
        let uj = leg_joint_velocity(u, leg);
        let foot = foot_position(&self.params, leg, &q);
        let jq = leg_jacobian(&self.params, leg, &q);
        let r = rotation(&theta);
        let w = block(x, VELOCITY) + omega.cross(&foot) + jq * uj;
        let mut dx = Mat3x24::zeros();
        let mut du = Mat3x24::zeros();
        for (j, d) in rotation_derivatives(&theta).iter().enumerate() {
            dx.set_column(THETA + j, &(d * w));
        }
        dx.fixed_view_mut::<3, 3>(0, OMEGA)
            .copy_from(&(-r * skew(&foot)));
        dx.fixed_view_mut::<3, 3>(0, VELOCITY).copy_from(&r);
        let dq = skew(&omega) * jq + jacobian_product_derivative(&self.params, leg, &q, &uj);
        dx.fixed_view_mut::<3, 3>(0, JOINTS + 3 * i)
            .copy_from(&(r * dq));
        du.fixed_view_mut::<3, 3>(0, JOINT_VELOCITIES + 3 * i)
            .copy_from(&(r * jq));
        Ok((dx, du))
    }

    /// World-frame foot position.
    pub fn foot_world(&self, x: &DVector<f64>, leg: Leg) -> Vector3<f64> {
        block(x, POSITION)
            + rotation(&block(x, THETA)) * foot_position(&self.params, leg, &leg_joints(x, leg))
    }

    /// Default standing state at the given CoM position and yaw.
    pub fn default_state(&self, position: &Vector3<f64>, yaw: f64) -> DVector<f64> {
        let mut x = DVector::zeros(STATE_DIM);
        set_block(&mut x, THETA, &Vector3::new(0.0, 0.0, yaw));
        set_block(&mut x, POSITION, position);
        x.rows_mut(JOINTS, 12)
            .copy_from_slice(&self.params.default_joints());
        x
    }
}

/// Reject states too close to the Euler-angle singularity.
pub fn check_chart(x: &DVector<f64>) -> Result<(), ModelError> {
    let pitch = x[THETA + 1];
    if pitch.abs() >= PITCH_LIMIT {
        return Err(ModelError::ChartSingularity { pitch });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slq::fd_jacobian;

    fn model() -> QuadrupedModel {
        QuadrupedModel::new(RobotParams::default()).unwrap()
    }

    fn sample() -> (DVector<f64>, DVector<f64>) {
        let x = DVector::from_fn(STATE_DIM, |i, _| 0.1 * ((i * 7 % 11) as f64 - 5.0) / 5.0);
        let mut x = x;
        x.rows_mut(JOINTS, 12)
            .copy_from_slice(&RobotParams::default().default_joints());
        x[JOINTS + 4] += 0.2;
        let u = DVector::from_fn(INPUT_DIM, |i, _| ((i * 5 % 13) as f64 - 6.0) * 3.0 + 20.0);
        (x, u)
    }

    #[test]
    fn standing_equilibrium() {
        let m = model();
        let x = m.default_state(&Vector3::new(0.0, 0.0, 0.45), 0.0);
        let mut u = DVector::zeros(INPUT_DIM);
        for leg in Leg::ALL {
            u[3 * leg.index() + 2] = 30.0 * 9.81 / 4.0;
        }
        let dx = m.eom(&x, &u).unwrap();
        assert!(dx.rows(OMEGA, 6).amax() <= 1e-10);
    }

    #[test]
    fn free_fall() {
        let m = model();
        let mut x = m.default_state(&Vector3::zeros(), 0.3);
        x[THETA] = 0.4;
        x[THETA + 1] = -0.2;
        let dx = m.eom(&x, &DVector::zeros(INPUT_DIM)).unwrap();
        assert!((block(&dx, VELOCITY).norm() - 9.81).abs() < 1e-12);
    }

    #[test]
    fn chart_guard() {
        let m = model();
        let mut x = m.default_state(&Vector3::zeros(), 0.0);
        x[THETA + 1] = PITCH_LIMIT;
        assert!(matches!(
            m.eom(&x, &DVector::zeros(INPUT_DIM)),
            Err(ModelError::ChartSingularity { .. })
        ));
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let m = model();
        let (x, u) = sample();
        let (a, b) = m.eom_jacobians(&x, &u).unwrap();
        let fa = fd_jacobian(|x| m.eom(x, &u).unwrap(), &x, 1e-6);
        let fb = fd_jacobian(|u| m.eom(&x, u).unwrap(), &u, 1e-6);
        assert!((a - fa).amax() < 1e-6);
        assert!((b - fb).amax() < 1e-6);
        for leg in Leg::ALL {
            let (vx, vu) = m.foot_velocity_jacobians(&x, &u, leg).unwrap();
            let fx = fd_jacobian(
                |x| DVector::from_column_slice(m.foot_velocity(x, &u, leg).unwrap().as_slice()),
                &x,
                1e-6,
            );
            let fu = fd_jacobian(
                |u| DVector::from_column_slice(m.foot_velocity(&x, u, leg).unwrap().as_slice()),
                &u,
                1e-6,
            );
            assert!((DMatrix::from_column_slice(3, 24, vx.as_slice()) - fx).amax() < 1e-6);
            assert!((DMatrix::from_column_slice(3, 24, vu.as_slice()) - fu).amax() < 1e-6);
        }
    }
}
