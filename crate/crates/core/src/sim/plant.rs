use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::terrain::{contact_force, TerrainModel};
use super::SimError;
use crate::quadruped::rotation::rotation;
use crate::quadruped::{
    block, damped_inverse, foot_position, leg_jacobian, leg_joints, set_block, Leg, QuadrupedModel,
    FORCES, INPUT_DIM, JOINT_VELOCITIES, OMEGA, POSITION, THETA, VELOCITY,
};

/// Damping of the leg-Jacobian inverse near singular configurations.
const JACOBIAN_DAMPING: f64 = 1e-2;

/// Plant integration and actuator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    /// Simulation step (s).
    pub dt: f64,
    /// First-order actuator time constant (s); 0 disables the lag.
    pub actuator_lag: f64,
    /// Leg force-control admittance (m/(N·s)): foot velocity per newton of
    /// force deficit.
    pub admittance: f64,
    /// Bypass the terrain: realized forces equal the lagged commands and the
    /// legs follow the lagged joint-velocity commands.
    pub rigid: bool,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            dt: 0.0025,
            actuator_lag: 0.0152,
            admittance: 5e-3,
            rigid: false,
        }
    }
}

impl PlantConfig {
    /// Planner-consistent plant: rigid, no lag.
    pub fn perfect() -> Self {
        Self {
            actuator_lag: 0.0,
            rigid: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |s: &str| Err(SimError::InvalidConfig(s.into()));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("simulation step must be positive");
        }
        if !(self.actuator_lag.is_finite() && self.actuator_lag >= 0.0) {
            return bad("actuator lag must be non-negative");
        }
        if !(self.admittance.is_finite() && self.admittance >= 0.0) {
            return bad("admittance must be non-negative");
        }
        Ok(())
    }
}

/// Desired world-frame foot forces and joint velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantCommand {
    pub forces: DVector<f64>,
    pub joint_velocities: DVector<f64>,
}

impl PlantCommand {
    pub fn from_input(u: &DVector<f64>) -> Self {
        Self {
            forces: u.rows(FORCES, 12).into_owned(),
            joint_velocities: u.rows(JOINT_VELOCITIES, 12).into_owned(),
        }
    }

    pub fn to_input(&self) -> DVector<f64> {
        let mut u = DVector::zeros(INPUT_DIM);
        u.rows_mut(FORCES, 12).copy_from(&self.forces);
        u.rows_mut(JOINT_VELOCITIES, 12)
            .copy_from(&self.joint_velocities);
        u
    }

    pub fn force(&self, leg: Leg) -> Vector3<f64> {
        block(&self.forces, 3 * leg.index())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub x: DVector<f64>,
    pub contact: [bool; 4],
    /// Penetration depth per foot (m), 0 without contact.
    pub penetration: [f64; 4],
    /// Actuator-lag force state (12).
    pub force_lag: DVector<f64>,
    /// Actuator-lag joint-velocity state (12).
    pub joint_rate_lag: DVector<f64>,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct PlantStep {
    pub state: PlantState,
    /// Ground reaction forces at the end of the step (12, world frame).
    pub realized: DVector<f64>,
    /// Steps in which a near-singular leg Jacobian forced the damped inverse.
    pub damped: bool,
}

/// Kinodynamic skeleton on spring-damper ground with actuator lag.
#[derive(Debug, Clone)]
pub struct Plant {
    model: QuadrupedModel,
    terrain: TerrainModel,
    config: PlantConfig,
    substeps: usize,
}

struct Evaluated {
    dx: DVector<f64>,
    forces: DVector<f64>,
    damped: bool,
}

impl Plant {
    pub fn new(
        model: QuadrupedModel,
        terrain: TerrainModel,
        config: PlantConfig,
    ) -> Result<Self, SimError> {
        terrain.validate()?;
        config.validate()?;
        let substeps = substeps_for(&model, &terrain, &config);
        Ok(Self {
            model,
            terrain,
            config,
            substeps,
        })
    }

    pub fn model(&self) -> &QuadrupedModel {
        &self.model
    }

    pub fn terrain(&self) -> &TerrainModel {
        &self.terrain
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    /// Internal RK4 substeps per simulation step.
    pub fn substeps(&self) -> usize {
        self.substeps
    }

    /// Plant at rest in `x` with the lag states settled on `command`.
    pub fn initial_state(&self, x: &DVector<f64>, command: &PlantCommand) -> PlantState {
        let mut s = PlantState {
            x: x.clone(),
            contact: [false; 4],
            penetration: [0.0; 4],
            force_lag: command.forces.clone(),
            joint_rate_lag: command.joint_velocities.clone(),
            time: 0.0,
        };
        self.update_contacts(&mut s);
        s
    }

    fn update_contacts(&self, s: &mut PlantState) {
        for leg in Leg::ALL {
            let i = leg.index();
            if self.config.rigid {
                s.penetration[i] = 0.0;
                s.contact[i] = block(&s.force_lag, 3 * i).norm() > 0.0;
            } else {
                let depth = self.terrain.penetration(&self.model.foot_world(&s.x, leg));
                s.penetration[i] = depth;
                s.contact[i] = depth > 0.0;
            }
        }
    }

    /// Ground reaction forces acting in `state` (12, world frame).
    pub fn realized_forces(&self, state: &PlantState) -> Result<DVector<f64>, SimError> {
        Ok(self
            .evaluate(
                &state.x,
                &state.force_lag,
                &state.joint_rate_lag,
                state.time,
            )?
            .forces)
    }

    /// State derivative with the contact/admittance loop solved per foot.
    fn evaluate(
        &self,
        x: &DVector<f64>,
        forces: &DVector<f64>,
        rates: &DVector<f64>,
        time: f64,
    ) -> Result<Evaluated, SimError> {
        let diverged = || SimError::Divergence { time };
        if self.config.rigid {
            let mut u = DVector::zeros(INPUT_DIM);
            u.rows_mut(FORCES, 12).copy_from(forces);
            u.rows_mut(JOINT_VELOCITIES, 12).copy_from(rates);
            let dx = self.model.eom(x, &u).map_err(|_| diverged())?;
            return Ok(Evaluated {
                dx,
                forces: forces.clone(),
                damped: false,
            });
        }
        let params = self.model.params();
        let r = rotation(&block(x, THETA));
        let v = block(x, VELOCITY);
        let omega = block(x, OMEGA);
        let n = self.terrain.normal();
        let k = self.config.admittance;
        let mut u = DVector::zeros(INPUT_DIM);
        let mut damped = false;
        for leg in Leg::ALL {
            let i = leg.index();
            let q = leg_joints(x, leg);
            let foot = foot_position(params, leg, &q);
            let jac = leg_jacobian(params, leg, &q);
            let q_dot = block(rates, 3 * i);
            let f_cmd = block(forces, 3 * i);
            let v_kin = r * (v + omega.cross(&foot) + jac * q_dot);
            let p = block(x, POSITION) + r * foot;
            let depth = self.terrain.penetration(&p);
            let (f, v_foot) = if depth > 0.0 {
                self.solve_contact(depth, &v_kin, &f_cmd, &n)
            } else {
                (Vector3::zeros(), v_kin - f_cmd * k)
            };
            let correction = v_foot - v_kin;
            let mut joint_rate = q_dot;
            if correction != Vector3::zeros() {
                let (inv, flag) = damped_inverse(&jac, JACOBIAN_DAMPING);
                damped |= flag;
                joint_rate += inv * (r.transpose() * correction);
            }
            set_block(&mut u, FORCES + 3 * i, &f);
            set_block(&mut u, JOINT_VELOCITIES + 3 * i, &joint_rate);
        }
        let dx = self.model.eom(x, &u).map_err(|_| diverged())?;
        Ok(Evaluated {
            dx,
            forces: u.rows(FORCES, 12).into_owned(),
            damped,
        })
    }

    /// Solve `v = v_kin − K(f_cmd − f)` with `f = contact_force(δ, −n·v, v_t)`.
    fn solve_contact(
        &self,
        depth: f64,
        v_kin: &Vector3<f64>,
        f_cmd: &Vector3<f64>,
        n: &Vector3<f64>,
    ) -> (Vector3<f64>, Vector3<f64>) {
        let t = &self.terrain;
        let k = self.config.admittance;
        let free = v_kin - f_cmd * k;
        let free_n = n.dot(&free);
        let w = free - n * free_n;
        let v_n = (free_n + k * t.stiffness * depth) / (1.0 + k * t.damping);
        let f_n = t.stiffness * depth - t.damping * v_n;
        let v_n = if f_n > 0.0 { v_n } else { free_n };
        let v_t = w / (1.0 + k * t.tangential_damping);
        let f = contact_force(depth, -v_n, &v_t, t);
        let f_t = f - n * n.dot(&f);
        let v_t = w + f_t * k;
        (f, n * v_n + v_t)
    }

    /// Advance one simulation step under `command`.
    pub fn step(&self, state: &PlantState, command: &PlantCommand) -> Result<PlantStep, SimError> {
        let h = self.config.dt / self.substeps as f64;
        let tau = self.config.actuator_lag;
        let mut x = state.x.clone();
        let mut force_lag = state.force_lag.clone();
        let mut rate_lag = state.joint_rate_lag.clone();
        let mut damped = false;
        let mut time = state.time;
        for _ in 0..self.substeps {
            let (f_avg, f_end) = lag(&force_lag, &command.forces, tau, h);
            let (r_avg, r_end) = lag(&rate_lag, &command.joint_velocities, tau, h);
            let stage = |x: &DVector<f64>| self.evaluate(x, &f_avg, &r_avg, time);
            let k1 = stage(&x)?;
            let k2 = stage(&(&x + &k1.dx * (0.5 * h)))?;
            let k3 = stage(&(&x + &k2.dx * (0.5 * h)))?;
            let k4 = stage(&(&x + &k3.dx * h))?;
            damped |= k1.damped || k2.damped || k3.damped || k4.damped;
            x += (k1.dx + (k2.dx + k3.dx) * 2.0 + k4.dx) * (h / 6.0);
            time += h;
            if !x.iter().all(|v| v.is_finite()) {
                return Err(SimError::Divergence { time });
            }
            force_lag = f_end;
            rate_lag = r_end;
        }
        let mut next = PlantState {
            x,
            contact: [false; 4],
            penetration: [0.0; 4],
            force_lag,
            joint_rate_lag: rate_lag,
            time: state.time + self.config.dt,
        };
        self.update_contacts(&mut next);
        let realized = self.realized_forces(&next)?;
        Ok(PlantStep {
            state: next,
            realized,
            damped,
        })
    }

    /// Kinetic plus gravitational plus ground-spring energy (J).
    pub fn energy(&self, state: &PlantState) -> f64 {
        let p = self.model.params();
        let v = block(&state.x, VELOCITY);
        let w = block(&state.x, OMEGA);
        let spring: f64 = if self.config.rigid {
            0.0
        } else {
            state
                .penetration
                .iter()
                .map(|d| 0.5 * self.terrain.stiffness * d * d)
                .sum()
        };
        0.5 * p.mass * v.norm_squared()
            + 0.5 * w.dot(&(p.inertia_matrix() * w))
            + p.mass * p.gravity * state.x[POSITION + 2]
            + spring
    }
}

/// Advance one step of the plant.
pub fn plant_step(
    plant: &Plant,
    state: &PlantState,
    command: &PlantCommand,
) -> Result<PlantStep, SimError> {
    plant.step(state, command)
}

/// `(mean over the step, value at the end)` of a first-order lag driven by
/// a held command.
fn lag(
    state: &DVector<f64>,
    command: &DVector<f64>,
    tau: f64,
    h: f64,
) -> (DVector<f64>, DVector<f64>) {
    if tau == 0.0 {
        return (command.clone(), command.clone());
    }
    let e = (-h / tau).exp();
    let gap = state - command;
    (command + &gap * (tau / h * (1.0 - e)), command + gap * e)
}

/// Substeps keeping `h·λ ≤ 1` for the fastest contact, admittance and
/// friction modes.
fn substeps_for(model: &QuadrupedModel, terrain: &TerrainModel, config: &PlantConfig) -> usize {
    if config.rigid {
        return 1;
    }
    let p = model.params();
    let i_min = p.inertia_matrix().symmetric_eigenvalues().min();
    let lever = Leg::ALL
        .iter()
        .map(|&l| p.default_foot(l).norm())
        .fold(0.0, f64::max);
    let compliance = (1.0 / p.mass).max(lever * lever / i_min) * 4.0;
    let k = config.admittance;
    let lambda = (terrain.stiffness * compliance).sqrt()
        + (terrain.damping + terrain.tangential_damping) * compliance
        + k * terrain.stiffness / (1.0 + k * terrain.damping);
    ((config.dt * lambda).ceil() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadruped::{equilibrium_input, GaitSchedule, RobotParams};

    fn model() -> QuadrupedModel {
        QuadrupedModel::new(RobotParams::default()).unwrap()
    }

    fn standing_command() -> PlantCommand {
        PlantCommand::from_input(
            &equilibrium_input(&RobotParams::default(), &GaitSchedule::standing()).unwrap(),
        )
    }

    fn zero_command() -> PlantCommand {
        PlantCommand {
            forces: DVector::zeros(12),
            joint_velocities: DVector::zeros(12),
        }
    }

    fn total_normal(f: &DVector<f64>) -> f64 {
        (0..4).map(|i| f[3 * i + 2]).sum()
    }

    #[test]
    fn lag_rise_time_matches_first_order_response() {
        let m = model();
        let config = PlantConfig {
            actuator_lag: 0.0152,
            rigid: true,
            dt: 1e-4,
            ..PlantConfig::default()
        };
        let plant = Plant::new(m.clone(), TerrainModel::hard(), config).unwrap();
        let x = m.default_state(&Vector3::new(0.0, 0.0, 5.0), 0.0);
        let mut s = plant.initial_state(&x, &zero_command());
        let mut cmd = zero_command();
        cmd.forces[2] = 100.0;
        let mut t90 = None;
        for k in 0..1000 {
            s = plant.step(&s, &cmd).unwrap().state;
            if t90.is_none() && s.force_lag[2] >= 90.0 {
                t90 = Some((k + 1) as f64 * 1e-4);
            }
        }
        let expected = 0.0152 * 10f64.ln();
        assert!((t90.unwrap() - expected).abs() <= 1e-4);
        assert!((expected - 0.035).abs() < 1e-3);
    }

    #[test]
    fn released_robot_settles_on_stiff_ground() {
        let m = model();
        let terrain = TerrainModel::new(1e6, 100.0).unwrap();
        let plant = Plant::new(m.clone(), terrain, PlantConfig::default()).unwrap();
        let x = m.default_state(&Vector3::new(0.0, 0.0, 0.46), 0.0);
        let cmd = standing_command();
        let mut s = plant.initial_state(&x, &cmd);
        let mut last = None;
        for _ in 0..200 {
            let out = plant.step(&s, &cmd).unwrap();
            s = out.state;
            last = Some(out.realized);
        }
        let weight = 30.0 * 9.81;
        assert!((total_normal(&last.unwrap()) - weight).abs() <= 0.01 * weight);
        assert!(s.contact.iter().all(|c| *c));
    }

    #[test]
    fn stiff_ground_converges_to_rigid_distribution() {
        let m = model();
        let kp = 1e8;
        let kd = 2.0 * (kp * 30.0 / 4.0f64).sqrt();
        let terrain = TerrainModel::new(kp, kd).unwrap();
        let plant = Plant::new(m.clone(), terrain, PlantConfig::default()).unwrap();
        let x = m.default_state(&Vector3::new(0.0, 0.0, 0.45), 0.0);
        let cmd = standing_command();
        let mut s = plant.initial_state(&x, &cmd);
        let mut f = DVector::zeros(12);
        for _ in 0..100 {
            let out = plant.step(&s, &cmd).unwrap();
            s = out.state;
            f = out.realized;
        }
        for i in 0..4 {
            assert!((f[3 * i + 2] - 73.575).abs() <= 0.01 * 73.575);
        }
    }

    #[test]
    fn energy_is_non_increasing_without_commands() {
        let m = model();
        let config = PlantConfig {
            admittance: 0.0,
            actuator_lag: 0.0,
            ..PlantConfig::default()
        };
        let plant = Plant::new(m.clone(), TerrainModel::medium(), config).unwrap();
        let mut x = m.default_state(&Vector3::new(0.0, 0.0, 0.46), 0.0);
        x[VELOCITY] = 0.2;
        let mut s = plant.initial_state(&x, &zero_command());
        let mut e = plant.energy(&s);
        for _ in 0..400 {
            s = plant.step(&s, &zero_command()).unwrap().state;
            let next = plant.energy(&s);
            assert!(next <= e + 1e-6 * e.abs().max(1.0));
            e = next;
        }
    }

    #[test]
    fn vanishing_lag_reproduces_no_lag() {
        let m = model();
        let run = |tau: f64| {
            let config = PlantConfig {
                actuator_lag: tau,
                ..PlantConfig::default()
            };
            let plant = Plant::new(m.clone(), TerrainModel::medium(), config).unwrap();
            let x = m.default_state(&Vector3::new(0.0, 0.0, 0.45), 0.0);
            let mut s = plant.initial_state(&x, &standing_command());
            for k in 0..200 {
                let mut cmd = standing_command();
                cmd.forces[2] += 20.0 * (k as f64 * 0.1).sin();
                cmd.joint_velocities[4] = 0.2 * (k as f64 * 0.05).cos();
                s = plant.step(&s, &cmd).unwrap().state;
            }
            s.x
        };
        assert!((run(1e-12) - run(0.0)).amax() <= 1e-6);
    }

    #[test]
    fn realized_forces_respect_the_cone() {
        let m = model();
        let plant = Plant::new(m.clone(), TerrainModel::soft(), PlantConfig::default()).unwrap();
        let mut x = m.default_state(&Vector3::new(0.0, 0.0, 0.44), 0.0);
        x[VELOCITY] = 1.0;
        let mut s = plant.initial_state(&x, &standing_command());
        for _ in 0..100 {
            let out = plant.step(&s, &standing_command()).unwrap();
            for i in 0..4 {
                let f = block(&out.realized, 3 * i);
                assert!((f.x * f.x + f.y * f.y).sqrt() <= 0.7 * f.z + 1e-9);
            }
            s = out.state;
        }
    }

    #[test]
    fn penetration_is_consistent_with_contact() {
        let m = model();
        let plant = Plant::new(m.clone(), TerrainModel::soft(), PlantConfig::default()).unwrap();
        let x = m.default_state(&Vector3::new(0.0, 0.0, 0.45), 0.0);
        let mut s = plant.initial_state(&x, &standing_command());
        for _ in 0..40 {
            s = plant.step(&s, &standing_command()).unwrap().state;
            for i in 0..4 {
                assert_eq!(s.contact[i], s.penetration[i] > 0.0);
                assert!(s.penetration[i] >= 0.0);
            }
        }
    }

    #[test]
    fn non_finite_state_is_divergence() {
        let m = model();
        let plant = Plant::new(m.clone(), TerrainModel::hard(), PlantConfig::default()).unwrap();
        let mut x = m.default_state(&Vector3::new(0.0, 0.0, 0.45), 0.0);
        x[VELOCITY] = f64::NAN;
        let s = plant.initial_state(&x, &standing_command());
        assert!(matches!(
            plant.step(&s, &standing_command()),
            Err(SimError::Divergence { .. })
        ));
    }
}
