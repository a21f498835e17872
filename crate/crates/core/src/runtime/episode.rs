use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::failure::{FailureMonitor, FailureReason, FailureStatus};
use super::log::{EpisodeLog, Failure, ReplanRecord, Sample, Touchdown};
use super::{RuntimeError, Scenario};
use crate::loopshaping::{augment_ocp, propagate_filter_state, AugmentedOcp};
use crate::quadruped::rotation::{rot_z, rotation};
use crate::quadruped::{
    anchor_from_state, block, set_block, Anchor, Contact, Leg, QuadrupedModel, QuadrupedOcp,
    POSITION, STATE_DIM, THETA, VELOCITY,
};
use crate::sim::{PlanSnapshot, Plant, PlantCommand, PlantState, SimError, Tracker};
use crate::slq::{mpc_step, solve, Horizon, Solution};

/// Gait sampling offset so that a boundary instant takes the upcoming mode.
const MODE_EPS: f64 = 1e-9;

/// Prepared closed-loop episode.
#[derive(Debug, Clone)]
pub struct Episode {
    scenario: Scenario,
    model: QuadrupedModel,
    ocp: AugmentedOcp<QuadrupedOcp>,
    plant: Plant,
    replan_steps: usize,
    steps: usize,
}

/// Run one episode. Configuration errors are returned; solver and plant
/// failures end the episode and are recorded in the log.
pub fn run_episode(scenario: &Scenario) -> Result<EpisodeLog, RuntimeError> {
    let episode = Episode::new(scenario)?;
    Ok(if scenario.runtime.deterministic {
        episode.run()
    } else {
        episode.run_free()
    })
}

struct Start {
    state: PlantState,
    tracker: Tracker,
    solution: Solution,
    plan: PlanSnapshot,
    record: ReplanRecord,
}

impl Episode {
    pub fn new(scenario: &Scenario) -> Result<Self, RuntimeError> {
        scenario.validate()?;
        let model = QuadrupedModel::new(scenario.robot.clone())?;
        let rt = &scenario.runtime;
        let x0 = model.default_state(&Vector3::new(0.0, 0.0, scenario.command.height), 0.0);
        let inner = QuadrupedOcp::new(
            model.clone(),
            scenario.gait.clone(),
            &scenario.swing,
            &scenario.weights,
            scenario.command.at(0.0),
            anchor_from_state(&x0, 0.0),
            Horizon::new(0.0, rt.horizon, rt.nodes),
        )?;
        let ocp = augment_ocp(inner, &scenario.shaping.spec()?)?;
        let plant = Plant::new(
            model.clone(),
            scenario.terrain.clone(),
            scenario.plant.clone(),
        )?;
        Ok(Self {
            replan_steps: scenario.replan_steps()?,
            steps: (rt.duration / scenario.plant.dt).round() as usize,
            scenario: scenario.clone(),
            model,
            ocp,
            plant,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn ocp(&self) -> &AugmentedOcp<QuadrupedOcp> {
        &self.ocp
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    /// Initial plant state: nominal stance, sunk to the static spring
    /// deflection on compliant ground, base velocity optionally perturbed.
    pub fn initial_state(&self) -> DVector<f64> {
        let p = self.model.params();
        let sag = if self.plant.config().rigid {
            0.0
        } else {
            p.mass * p.gravity / (4.0 * self.scenario.terrain.stiffness)
        };
        let height = self.scenario.command.height - sag;
        let mut x = self
            .model
            .default_state(&Vector3::new(0.0, 0.0, height), 0.0);
        let noise = self.scenario.runtime.initial_noise;
        if noise > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.scenario.runtime.seed);
            for k in 0..3 {
                x[VELOCITY + k] += rng.gen_range(-noise..=noise);
            }
        }
        x
    }

    /// The OCP over the horizon starting at `t`, anchored at `anchor`.
    pub fn problem_at(&self, t: f64, anchor: Anchor) -> AugmentedOcp<QuadrupedOcp> {
        let rt = &self.scenario.runtime;
        let mut ocp = self.ocp.clone();
        let next = ocp.inner().retargeted(
            Horizon::new(t, rt.horizon, rt.nodes),
            self.scenario.command.at(t),
            anchor,
        );
        *ocp.inner_mut() = next;
        ocp
    }

    /// Snapshot handed to the tracker; baseline plans carry no filter bank.
    pub fn snapshot(&self, solution: &Solution) -> PlanSnapshot {
        PlanSnapshot {
            trajectory: solution.trajectory.clone(),
            policy: solution.policy.clone(),
            bank: (self.ocp.filter_dim() > 0).then(|| self.ocp.bank().clone()),
        }
    }

    fn anchor(&self, x: &DVector<f64>, t: f64, reference: &Anchor) -> Anchor {
        if self.scenario.runtime.hold_position {
            *reference
        } else {
            anchor_from_state(x, t)
        }
    }

    fn start(&self) -> Result<Start, RuntimeError> {
        let x0 = self.initial_state();
        let u0 = self.ocp.inner().cost().input_reference().clone();
        let xs0 = self.ocp.bank().steady_state(&u0)?;
        let problem = self.problem_at(0.0, anchor_from_state(&x0, 0.0));
        let z0 = problem.join_state(&x0, &xs0);
        let clock = Instant::now();
        let solution = solve(&problem, &z0, &self.scenario.solver, None)?;
        let record = replan_record(0.0, &solution, 0.0, clock.elapsed());
        let plan = self.snapshot(&solution);
        let u_start = plan.planned_input(0.0, &xs0)?;
        let state = self
            .plant
            .initial_state(&x0, &PlantCommand::from_input(&u_start));
        let tracker = Tracker::new(
            self.model.clone(),
            self.scenario.gait.clone(),
            self.scenario.tracker.clone(),
            xs0,
        )?;
        Ok(Start {
            state,
            tracker,
            solution,
            plan,
            record,
        })
    }

    fn empty_log(&self) -> EpisodeLog {
        EpisodeLog {
            dt: self.scenario.plant.dt,
            nominal_height: self.scenario.command.height,
            ..EpisodeLog::default()
        }
    }

    /// Synchronous loop: one real-time iteration every replan tick.
    pub fn run(&self) -> EpisodeLog {
        let mut log = self.empty_log();
        let start = match self.start() {
            Ok(s) => s,
            Err(_) => {
                log.failure = Some(Failure {
                    time: 0.0,
                    reason: FailureReason::Solver,
                });
                return log;
            }
        };
        log.replans.push(start.record);
        let Start {
            mut state,
            mut tracker,
            mut solution,
            mut plan,
            ..
        } = start;
        let dt = self.scenario.plant.dt;
        let mut loop_state = LoopState::new(self, &state);
        for i in 0..self.steps {
            let t = i as f64 * dt;
            if i > 0 && i % self.replan_steps == 0 {
                let gap = filter_gap(&plan, tracker.filter_state(), t);
                let anchor = self.anchor(&state.x, t, &loop_state.reference);
                let problem = self.problem_at(t, anchor);
                let z0 = problem.join_state(&state.x, tracker.filter_state());
                let clock = Instant::now();
                match mpc_step(&problem, &z0, &solution, &self.scenario.solver) {
                    Ok(next) => {
                        assert_eq!(
                            next.trajectory.states[0], z0,
                            "plan must start at the measured state"
                        );
                        log.replans
                            .push(replan_record(t, &next, gap, clock.elapsed()));
                        plan = self.snapshot(&next);
                        solution = next;
                    }
                    Err(_) => {
                        log.failure = Some(Failure {
                            time: t,
                            reason: FailureReason::Solver,
                        });
                        return log;
                    }
                }
            }
            state.time = t;
            match loop_state.tick(self, &mut log, &mut tracker, &plan, &state, t) {
                Ok(next) => state = next,
                Err(reason) => {
                    log.failure = Some(Failure { time: t, reason });
                    return log;
                }
            }
        }
        log
    }

    /// Free-running loop: the solver runs in its own thread and publishes
    /// immutable plan snapshots (last writer wins); the plant and tracker are
    /// paced against the wall clock.
    pub fn run_free(&self) -> EpisodeLog {
        let mut log = self.empty_log();
        let start = match self.start() {
            Ok(s) => s,
            Err(_) => {
                log.failure = Some(Failure {
                    time: 0.0,
                    reason: FailureReason::Solver,
                });
                return log;
            }
        };
        log.replans.push(start.record);
        let Start {
            mut state,
            mut tracker,
            solution,
            plan,
            ..
        } = start;
        let dt = self.scenario.plant.dt;
        let period = self.scenario.runtime.replan_period;
        let latest_plan = Mutex::new(Arc::new(plan));
        let measured: Mutex<(f64, DVector<f64>, DVector<f64>, Anchor)> = Mutex::new((
            0.0,
            state.x.clone(),
            tracker.filter_state().clone(),
            anchor_from_state(&state.x, 0.0),
        ));
        let records = Mutex::new(Vec::new());
        let stop = AtomicBool::new(false);
        let solver_failed = Mutex::new(None::<f64>);

        std::thread::scope(|scope| {
            scope.spawn(|| {
                let mut previous = solution;
                let mut last = 0.0;
                while !stop.load(Ordering::Acquire) {
                    let (t, x, xs, reference) = measured.lock().unwrap().clone();
                    if t < last + period - 1e-12 {
                        std::thread::sleep(Duration::from_micros(200));
                        continue;
                    }
                    last = t;
                    let current = latest_plan.lock().unwrap().clone();
                    let gap = filter_gap(&current, &xs, t);
                    let problem = self.problem_at(t, self.anchor(&x, t, &reference));
                    let z0 = problem.join_state(&x, &xs);
                    let clock = Instant::now();
                    match mpc_step(&problem, &z0, &previous, &self.scenario.solver) {
                        Ok(next) => {
                            records.lock().unwrap().push(replan_record(
                                t,
                                &next,
                                gap,
                                clock.elapsed(),
                            ));
                            *latest_plan.lock().unwrap() = Arc::new(self.snapshot(&next));
                            previous = next;
                        }
                        Err(_) => {
                            *solver_failed.lock().unwrap() = Some(t);
                            stop.store(true, Ordering::Release);
                        }
                    }
                }
            });

            let wall = Instant::now();
            let mut loop_state = LoopState::new(self, &state);
            for i in 0..self.steps {
                let t = i as f64 * dt;
                if stop.load(Ordering::Acquire) {
                    break;
                }
                let ahead = Duration::from_secs_f64(t).saturating_sub(wall.elapsed());
                if !ahead.is_zero() {
                    std::thread::sleep(ahead);
                }
                let plan = latest_plan.lock().unwrap().clone();
                state.time = t;
                match loop_state.tick(self, &mut log, &mut tracker, &plan, &state, t) {
                    Ok(next) => state = next,
                    Err(reason) => {
                        log.failure = Some(Failure { time: t, reason });
                        break;
                    }
                }
                *measured.lock().unwrap() = (
                    t + dt,
                    state.x.clone(),
                    tracker.filter_state().clone(),
                    loop_state.reference,
                );
            }
            stop.store(true, Ordering::Release);
        });

        log.replans.extend(records.into_inner().unwrap());
        if let Some(t) = solver_failed.into_inner().unwrap() {
            if log.failure.is_none_or(|f| f.time > t) {
                log.failure = Some(Failure {
                    time: t,
                    reason: FailureReason::Solver,
                });
            }
        }
        log
    }
}

/// Per-step bookkeeping shared by both loop modes.
struct LoopState {
    monitor: FailureMonitor,
    realized: DVector<f64>,
    stance: [bool; 4],
    reference: Anchor,
}

impl LoopState {
    fn new(episode: &Episode, state: &PlantState) -> Self {
        let realized = episode
            .plant
            .realized_forces(state)
            .unwrap_or_else(|_| DVector::zeros(12));
        Self {
            monitor: FailureMonitor::new(
                episode.scenario.runtime.failure.clone(),
                episode.scenario.command.height,
            ),
            realized,
            stance: stance_flags(episode, 0.0),
            reference: anchor_from_state(&state.x, 0.0),
        }
    }

    /// Command, log, check and advance the plant over one sim step.
    fn tick(
        &mut self,
        episode: &Episode,
        log: &mut EpisodeLog,
        tracker: &mut Tracker,
        plan: &PlanSnapshot,
        state: &PlantState,
        t: f64,
    ) -> Result<PlantState, FailureReason> {
        let dt = episode.scenario.plant.dt;
        let stance = stance_flags(episode, t);
        for leg in Leg::ALL {
            let i = leg.index();
            if stance[i] && !self.stance[i] && t > 0.0 {
                log.touchdowns.push(Touchdown {
                    time: t,
                    leg,
                    foot: episode.model.foot_world(&state.x, leg),
                    base: block(&state.x, POSITION),
                    yaw: state.x[THETA + 2],
                    commanded_speed: episode.scenario.command.at(t).forward,
                });
            }
        }
        self.stance = stance;

        let out = tracker.command(plan, state).map_err(plant_failure)?;
        log.samples.push(Sample {
            time: t,
            state: state.x.clone(),
            contact: state.contact,
            stance,
            commanded: out.command.forces.clone(),
            realized: self.realized.clone(),
            planned: out.planned_input.rows(0, 12).into_owned(),
            planned_base: block(&plan.planned_state(t), POSITION),
        });
        if let FailureStatus::Failed(reason) = self.monitor.update(t, &state.x) {
            return Err(reason);
        }

        let mut current = state.clone();
        if let Some(d) = &episode.scenario.disturbance {
            if d.time >= t && d.time < t + dt {
                let p = episode.model.params();
                let r = rotation(&block(&current.x, THETA));
                let dv = r.transpose() * Vector3::from(d.impulse) / p.mass;
                let v = block(&current.x, VELOCITY) + dv;
                set_block(&mut current.x, VELOCITY, &v);
            }
        }
        let step = episode
            .plant
            .step(&current, &out.command)
            .map_err(plant_failure)?;
        tracker.advance(plan, t, dt).map_err(plant_failure)?;
        self.realized = step.realized;
        self.advance_reference(episode, t, dt);
        let mut next = step.state;
        next.time = t + dt;
        Ok(next)
    }

    fn advance_reference(&mut self, episode: &Episode, t: f64, dt: f64) {
        let c = episode.scenario.command.at(t);
        let planar = rot_z(self.reference.yaw) * Vector3::new(c.forward, c.lateral, 0.0) * dt;
        self.reference.position += planar;
        self.reference.yaw += c.yaw_rate * dt;
        self.reference.time = t + dt;
    }
}

fn stance_flags(episode: &Episode, t: f64) -> [bool; 4] {
    Leg::ALL.map(|leg| episode.scenario.gait.mode_at(t + MODE_EPS, leg).0 == Contact::Stance)
}

fn plant_failure(e: SimError) -> FailureReason {
    match e {
        SimError::Divergence { .. } => FailureReason::NonFinite,
        _ => FailureReason::Plant,
    }
}

fn replan_record(t: f64, s: &Solution, filter_gap: f64, elapsed: Duration) -> ReplanRecord {
    let last = s.log.last();
    ReplanRecord {
        time: t,
        cost: s.evaluation.cost,
        merit: s.evaluation.merit,
        step: last.map_or(0.0, |r| r.step),
        violation: s.evaluation.violation,
        max_violation: s.evaluation.max_violation,
        converged: s.converged,
        filter_gap,
        solve_seconds: elapsed.as_secs_f64(),
    }
}

/// Distance between `xs` and the plan's exact filter state at `t`.
fn filter_gap(plan: &PlanSnapshot, xs: &DVector<f64>, t: f64) -> f64 {
    let Some(bank) = &plan.bank else {
        return 0.0;
    };
    let h = plan.trajectory.horizon;
    let j = (((t - h.start) / h.dt() + 1e-9).floor().max(0.0) as usize).min(h.nodes);
    let tj = h.time(j);
    let node = plan.trajectory.states[j]
        .rows(STATE_DIM, bank.state_dim())
        .into_owned();
    let exact = if t - tj > 1e-12 {
        match propagate_filter_state(bank, &node, &plan.trajectory, tj, t - tj) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        }
    } else {
        node
    };
    (exact - xs).amax()
}
