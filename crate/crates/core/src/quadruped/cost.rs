use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::dynamics::{
    set_block, INPUT_DIM, JOINTS, JOINT_VELOCITIES, OMEGA, POSITION, STATE_DIM, THETA, VELOCITY,
};
use super::kinematics::leg_jacobian;
use super::rotation::rot_z;
use super::{GaitSchedule, Leg, ModelError, RobotParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub orientation: f64,
    pub position: f64,
    pub angular_rate: f64,
    pub linear_velocity: f64,
    pub joints: f64,
    /// Per N².
    pub force: f64,
    /// Task-space weight on foot velocity caused by joint motion, per (m/s)².
    pub foot_velocity: f64,
    /// Terminal weight on the base block as a multiple of the running weight.
    pub terminal_scale: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            orientation: 100.0,
            position: 200.0,
            angular_rate: 5.0,
            linear_velocity: 10.0,
            joints: 2.0,
            force: 1e-3,
            foot_velocity: 5.0,
            terminal_scale: 10.0,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), ModelError> {
        let psd = [
            self.orientation,
            self.position,
            self.angular_rate,
            self.linear_velocity,
            self.joints,
            self.terminal_scale,
        ];
        if psd.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(ModelError::InvalidWeights(
                "state weights must be non-negative".into(),
            ));
        }
        if !(self.force > 0.0 && self.foot_velocity > 0.0) {
            return Err(ModelError::InvalidWeights(
                "input weights must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Commanded base motion: velocity in the heading frame, yaw rate and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseCommand {
    pub forward: f64,
    pub lateral: f64,
    pub yaw_rate: f64,
    pub height: f64,
}

impl Default for BaseCommand {
    fn default() -> Self {
        Self {
            forward: 0.0,
            lateral: 0.0,
            yaw_rate: 0.0,
            height: 0.45,
        }
    }
}

/// Pose from which the desired trajectory is extrapolated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub time: f64,
    pub position: Vector3<f64>,
    pub yaw: f64,
}

/// Running and terminal cost of the kinodynamic OCP.
#[derive(Debug, Clone)]
pub struct QuadrupedCost {
    q: DVector<f64>,
    q_terminal: DVector<f64>,
    r: DMatrix<f64>,
    u0: DVector<f64>,
    q0: [f64; 12],
    command: BaseCommand,
    anchor: Anchor,
}

/// Input with each foot carrying `mg/4` along world z and zero joint velocity.
pub fn equilibrium_input(
    params: &RobotParams,
    gait: &GaitSchedule,
) -> Result<DVector<f64>, ModelError> {
    let stance = if gait.duty >= 1.0 { 4 } else { 0 };
    if stance == 0 {
        return Err(ModelError::InvalidGait(
            "equilibrium input needs an all-stance gait".into(),
        ));
    }
    Ok(standing_input(params))
}

pub(crate) fn standing_input(params: &RobotParams) -> DVector<f64> {
    let mut u = DVector::zeros(INPUT_DIM);
    let share = params.mass * params.gravity / 4.0;
    for leg in Leg::ALL {
        u[3 * leg.index() + 2] = share;
    }
    u
}

impl QuadrupedCost {
    pub fn new(
        params: &RobotParams,
        weights: &CostWeights,
        command: BaseCommand,
        anchor: Anchor,
    ) -> Result<Self, ModelError> {
        weights.validate()?;
        let mut q = DVector::zeros(STATE_DIM);
        let blocks = [
            (THETA, weights.orientation),
            (POSITION, weights.position),
            (OMEGA, weights.angular_rate),
            (VELOCITY, weights.linear_velocity),
        ];
        for (offset, w) in blocks {
            q.rows_mut(offset, 3).fill(w);
        }
        let mut q_terminal = &q * weights.terminal_scale;
        q.rows_mut(JOINTS, 12).fill(weights.joints);
        q_terminal.rows_mut(JOINTS, 12).fill(0.0);

        let q0 = params.default_joints();
        let mut r = DMatrix::zeros(INPUT_DIM, INPUT_DIM);
        for k in 0..12 {
            r[(k, k)] = weights.force;
        }
        for leg in Leg::ALL {
            let i = leg.index();
            let j = leg_jacobian(
                params,
                leg,
                &Vector3::new(q0[3 * i], q0[3 * i + 1], q0[3 * i + 2]),
            );
            let block = j.transpose() * j * weights.foot_velocity;
            r.view_mut((JOINT_VELOCITIES + 3 * i, JOINT_VELOCITIES + 3 * i), (3, 3))
                .copy_from(&block);
        }
        if r.clone().cholesky().is_none() {
            return Err(ModelError::InvalidWeights(
                "input weight is not positive definite".into(),
            ));
        }
        Ok(Self {
            q,
            q_terminal,
            r,
            u0: standing_input(params),
            q0,
            command,
            anchor,
        })
    }

    pub fn with_anchor(&self, anchor: Anchor) -> Self {
        Self {
            anchor,
            ..self.clone()
        }
    }

    pub fn with_target(&self, command: BaseCommand, anchor: Anchor) -> Self {
        Self {
            command,
            anchor,
            ..self.clone()
        }
    }

    pub fn command(&self) -> &BaseCommand {
        &self.command
    }

    pub fn anchor(&self) -> &Anchor {
        &self.anchor
    }

    pub fn input_weight(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn input_reference(&self) -> &DVector<f64> {
        &self.u0
    }

    pub fn state_weight(&self) -> &DVector<f64> {
        &self.q
    }

    /// Desired state `x_d(t)`.
    pub fn desired_state(&self, t: f64) -> DVector<f64> {
        let c = &self.command;
        let dt = t - self.anchor.time;
        let yaw = self.anchor.yaw + c.yaw_rate * dt;
        let planar = rot_z(self.anchor.yaw) * Vector3::new(c.forward, c.lateral, 0.0) * dt;
        let mut position = self.anchor.position + planar;
        position.z = c.height;
        let mut x = DVector::zeros(STATE_DIM);
        set_block(&mut x, THETA, &Vector3::new(0.0, 0.0, yaw));
        set_block(&mut x, POSITION, &position);
        set_block(&mut x, OMEGA, &Vector3::new(0.0, 0.0, c.yaw_rate));
        set_block(&mut x, VELOCITY, &Vector3::new(c.forward, c.lateral, 0.0));
        x.rows_mut(JOINTS, 12).copy_from_slice(&self.q0);
        x
    }

    pub fn running_state_cost(&self, x: &DVector<f64>, t: f64) -> f64 {
        let e = x - self.desired_state(t);
        0.5 * e.dot(&e.component_mul(&self.q))
    }

    pub fn running_state_expansion(
        &self,
        x: &DVector<f64>,
        t: f64,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let e = x - self.desired_state(t);
        (e.component_mul(&self.q), DMatrix::from_diagonal(&self.q))
    }

    pub fn input_cost(&self, u: &DVector<f64>) -> f64 {
        let du = u - &self.u0;
        0.5 * du.dot(&(&self.r * &du))
    }

    pub fn terminal(&self, x: &DVector<f64>, t: f64) -> f64 {
        let e = x - self.desired_state(t);
        0.5 * e.dot(&e.component_mul(&self.q_terminal))
    }

    pub fn terminal_expansion(&self, x: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let e = x - self.desired_state(t);
        (
            e.component_mul(&self.q_terminal),
            DMatrix::from_diagonal(&self.q_terminal),
        )
    }
}
