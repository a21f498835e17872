use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::plant::{PlantCommand, PlantState};
use super::SimError;
use crate::loopshaping::{propagate_filter_state, recover_input, FilterBank};
use crate::quadruped::rotation::{rotation, skew};
use crate::quadruped::{
    block, damped_inverse, foot_position, leg_jacobian, leg_joints, project_to_cone, set_block,
    Contact, GaitSchedule, Leg, QuadrupedModel, FORCES, INPUT_DIM, JOINT_VELOCITIES, OMEGA,
    POSITION, STATE_DIM, THETA, VELOCITY,
};
use crate::slq::{FeedbackPolicy, Trajectory};

/// Damping of the leg-Jacobian inverse near singular configurations.
const JACOBIAN_DAMPING: f64 = 1e-2;
/// Gait sampling offset so that a boundary instant takes the upcoming mode.
const MODE_EPS: f64 = 1e-9;

/// Gains of the simplified tracking controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerGains {
    /// CoM position gain (N/m).
    pub position: f64,
    /// CoM velocity gain (N·s/m).
    pub velocity: f64,
    /// Orientation gain (N·m/rad).
    pub orientation: f64,
    /// Angular-rate gain (N·m·s/rad).
    pub angular_rate: f64,
    /// Swing-foot position gain (1/s).
    pub swing_position: f64,
    /// Swing-foot velocity-error feedback, dimensionless.
    pub swing_velocity: f64,
    /// Feedback cancelling the kinematic velocity of stance feet,
    /// dimensionless; 1 holds stance feet in place.
    pub stance_velocity: f64,
    /// Weight on the planned contact forces, in `[0, 1]`.
    pub force_feedforward: f64,
}

impl Default for TrackerGains {
    fn default() -> Self {
        Self {
            position: 500.0,
            velocity: 50.0,
            orientation: 100.0,
            angular_rate: 10.0,
            swing_position: 30.0,
            swing_velocity: 1.0,
            stance_velocity: 1.0,
            force_feedforward: 1.0,
        }
    }
}

impl TrackerGains {
    pub fn validate(&self) -> Result<(), SimError> {
        let gains = [
            self.position,
            self.velocity,
            self.orientation,
            self.angular_rate,
            self.swing_position,
            self.swing_velocity,
            self.stance_velocity,
        ];
        if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(SimError::InvalidConfig(
                "tracker gains must be non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.force_feedforward) {
            return Err(SimError::InvalidConfig(
                "force feedforward weight must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Immutable plan handed from the solver to the tracker.
#[derive(Debug, Clone)]
pub struct PlanSnapshot {
    /// Solver trajectory; augmented `(x, x_s)` states and `ν` inputs when shaped.
    pub trajectory: Trajectory,
    pub policy: FeedbackPolicy,
    /// Filter bank recovering `u` from `(x_s, ν)`; `None` for baseline plans.
    pub bank: Option<FilterBank>,
}

impl PlanSnapshot {
    pub fn start(&self) -> f64 {
        self.trajectory.horizon.start
    }

    pub fn end(&self) -> f64 {
        self.trajectory.horizon.end()
    }

    pub fn covers(&self, t: f64) -> bool {
        let tol = 1e-9;
        t >= self.start() - tol && t <= self.end() + tol
    }

    /// Planned plant state at `t` (interpolated).
    pub fn planned_state(&self, t: f64) -> DVector<f64> {
        self.trajectory.state_at(t).rows(0, STATE_DIM).into_owned()
    }

    /// Solver input held at `t` (`ν` when shaped).
    pub fn solver_input(&self, t: f64) -> &DVector<f64> {
        self.trajectory.input_at(t)
    }

    /// Filter-state trajectory of the solver at its nodes.
    pub fn filter_states(&self) -> Vec<DVector<f64>> {
        self.trajectory
            .states
            .iter()
            .map(|z| z.rows(STATE_DIM, z.len() - STATE_DIM).into_owned())
            .collect()
    }

    /// Recovered plant input `u = C_s x_s + D_s ν` at `t` given the tracker's
    /// filter state.
    pub fn planned_input(
        &self,
        t: f64,
        filter_state: &DVector<f64>,
    ) -> Result<DVector<f64>, SimError> {
        let nu = self.solver_input(t);
        match &self.bank {
            None => Ok(nu.clone()),
            Some(bank) => Ok(recover_input(bank, filter_state, nu)?),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackerOutput {
    pub command: PlantCommand,
    /// Planned (recovered) input at the current time.
    pub planned_input: DVector<f64>,
    /// A near-singular swing-leg Jacobian forced the damped inverse.
    pub damped: bool,
}

/// PD-plus-feedforward tracking of the most recent plan.
pub fn tracking_controller(
    model: &QuadrupedModel,
    gait: &GaitSchedule,
    gains: &TrackerGains,
    plan: &PlanSnapshot,
    filter_state: &DVector<f64>,
    measured: &PlantState,
) -> Result<TrackerOutput, SimError> {
    let t = measured.time;
    if !plan.covers(t) {
        return Err(SimError::PlanExpired {
            time: t,
            end: plan.end(),
        });
    }
    let params = model.params();
    let u_plan = plan.planned_input(t, filter_state)?;
    let x_ref = plan.planned_state(t);
    let x = &measured.x;

    let stance: Vec<Leg> = Leg::ALL
        .iter()
        .copied()
        .filter(|&l| gait.mode_at(t + MODE_EPS, l).0 == Contact::Stance)
        .collect();

    let r = rotation(&block(x, THETA));
    let r_ref = rotation(&block(&x_ref, THETA));
    let position_error = block(&x_ref, POSITION) - block(x, POSITION);
    let velocity_error = r_ref * block(&x_ref, VELOCITY) - r * block(x, VELOCITY);
    let delta_force = position_error * gains.position + velocity_error * gains.velocity;
    let rot_error = {
        let e = r_ref * r.transpose();
        0.5 * Vector3::new(
            e[(2, 1)] - e[(1, 2)],
            e[(0, 2)] - e[(2, 0)],
            e[(1, 0)] - e[(0, 1)],
        )
    };
    let rate_error = r_ref * block(&x_ref, OMEGA) - r * block(x, OMEGA);
    let delta_torque = rot_error * gains.orientation + rate_error * gains.angular_rate;
    let torque_share = distribute_torque(model, x, &stance, &delta_torque);

    let normal = gait.normal();
    let mut forces = DVector::zeros(12);
    for (j, &leg) in stance.iter().enumerate() {
        let i = leg.index();
        let mut f = block(&u_plan, FORCES + 3 * i) * gains.force_feedforward;
        if delta_force != Vector3::zeros() {
            f += delta_force / stance.len() as f64;
        }
        f += torque_share[j];
        let f = project_to_cone(&f, &normal, gait.friction);
        set_block(&mut forces, 3 * i, &f);
    }

    let mut joint_velocities = u_plan.rows(JOINT_VELOCITIES, 12).into_owned();
    let mut damped = false;
    for leg in Leg::ALL {
        let i = leg.index();
        let v = model.foot_velocity(x, &u_plan, leg)?;
        let correction = if stance.contains(&leg) {
            -v * gains.stance_velocity
        } else {
            let p_ref = model.foot_world(&x_ref, leg);
            let p = model.foot_world(x, leg);
            let v_ref = model.foot_velocity(&x_ref, &u_plan, leg)?;
            (p_ref - p) * gains.swing_position + (v_ref - v) * gains.swing_velocity
        };
        if correction == Vector3::zeros() {
            continue;
        }
        let q = leg_joints(x, leg);
        let (inv, flag) = damped_inverse(&leg_jacobian(params, leg, &q), JACOBIAN_DAMPING);
        damped |= flag;
        let dq = inv * (r.transpose() * correction);
        for k in 0..3 {
            joint_velocities[3 * i + k] += dq[k];
        }
    }
    if damped {
        log::debug!("damped least-squares foot correction at t = {t:.4}");
    }
    Ok(TrackerOutput {
        command: PlantCommand {
            forces,
            joint_velocities,
        },
        planned_input: u_plan,
        damped,
    })
}

/// Minimum-norm stance-foot forces with zero net force producing `torque`
/// about the CoM.
fn distribute_torque(
    model: &QuadrupedModel,
    x: &DVector<f64>,
    stance: &[Leg],
    torque: &Vector3<f64>,
) -> Vec<Vector3<f64>> {
    let n = stance.len();
    if n < 2 || *torque == Vector3::zeros() {
        return vec![Vector3::zeros(); n];
    }
    let r = rotation(&block(x, THETA));
    let mut a = DMatrix::zeros(6, 3 * n);
    for (j, &leg) in stance.iter().enumerate() {
        let lever = r * foot_position(model.params(), leg, &leg_joints(x, leg));
        a.view_mut((0, 3 * j), (3, 3))
            .copy_from(&Matrix3::identity());
        a.view_mut((3, 3 * j), (3, 3)).copy_from(&skew(&lever));
    }
    let mut rhs = DVector::zeros(6);
    rhs.rows_mut(3, 3).copy_from(torque);
    let g = a
        .svd(true, true)
        .solve(&rhs, 1e-9)
        .unwrap_or_else(|_| DVector::zeros(3 * n));
    (0..n).map(|j| block(&g, 3 * j)).collect()
}

/// Tracker holding the filter state propagated with the current plan.
#[derive(Debug, Clone)]
pub struct Tracker {
    model: QuadrupedModel,
    gait: GaitSchedule,
    gains: TrackerGains,
    filter_state: DVector<f64>,
}

impl Tracker {
    pub fn new(
        model: QuadrupedModel,
        gait: GaitSchedule,
        gains: TrackerGains,
        filter_state: DVector<f64>,
    ) -> Result<Self, SimError> {
        gains.validate()?;
        Ok(Self {
            model,
            gait,
            gains,
            filter_state,
        })
    }

    pub fn filter_state(&self) -> &DVector<f64> {
        &self.filter_state
    }

    pub fn gait(&self) -> &GaitSchedule {
        &self.gait
    }

    pub fn command(
        &self,
        plan: &PlanSnapshot,
        measured: &PlantState,
    ) -> Result<TrackerOutput, SimError> {
        tracking_controller(
            &self.model,
            &self.gait,
            &self.gains,
            plan,
            &self.filter_state,
            measured,
        )
    }

    /// Propagate the filter state from `t` over `dt` with the plan's `ν`.
    pub fn advance(&mut self, plan: &PlanSnapshot, t: f64, dt: f64) -> Result<(), SimError> {
        if let Some(bank) = &plan.bank {
            self.filter_state =
                propagate_filter_state(bank, &self.filter_state, &plan.trajectory, t, dt)?;
        }
        Ok(())
    }
}

/// Recovered input trajectory of a plan at its nodes (24 per node).
pub fn planned_inputs(plan: &PlanSnapshot) -> Vec<DVector<f64>> {
    match &plan.bank {
        None => plan.trajectory.inputs.clone(),
        Some(bank) => plan
            .trajectory
            .inputs
            .iter()
            .zip(plan.filter_states())
            .map(|(nu, xs)| {
                recover_input(bank, &xs, nu).unwrap_or_else(|_| DVector::zeros(INPUT_DIM))
            })
            .collect(),
    }
}
