use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::backward::{backward_pass, LqData, LqNode, PolicyUpdate};
use super::ocp::{fd_expansion, fd_jacobian, Horizon, OcpDefinition};
use super::SolverError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Relative merit decrease below which the solve counts as converged.
    pub tolerance: f64,
    pub backtracking: f64,
    /// Smallest step size tried by the line search.
    pub min_step: f64,
    pub fd_step: f64,
    /// Weight of the integrated equality-violation 1-norm in the merit.
    pub merit_weight: f64,
    pub regularization_floor: f64,
    pub regularization_max: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-6,
            backtracking: 0.5,
            min_step: 0.5f64.powi(10),
            fd_step: 1e-6,
            merit_weight: 1e3,
            regularization_floor: 1e-6,
            regularization_max: 1e8,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            self.tolerance,
            self.backtracking,
            self.min_step,
            self.fd_step,
            self.regularization_floor,
            self.regularization_max,
        ];
        if self.max_iterations == 0
            || positive.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || self.backtracking >= 1.0
            || self.min_step > 1.0
            || self.merit_weight < 0.0
        {
            return Err(SolverError::InvalidSettings(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub horizon: Horizon,
    /// `nodes + 1` states.
    pub states: Vec<DVector<f64>>,
    /// `nodes` inputs.
    pub inputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len())
            .map(|k| self.horizon.time(k))
            .collect()
    }

    /// Input held at absolute time `t` (zero-order hold, last node held).
    pub fn input_at(&self, t: f64) -> &DVector<f64> {
        &self.inputs[node_index(&self.horizon, t)]
    }

    /// Linearly interpolated state at absolute time `t`, clamped to the grid.
    pub fn state_at(&self, t: f64) -> DVector<f64> {
        interpolate(&self.horizon, &self.states, t)
    }
}

fn node_index(h: &Horizon, t: f64) -> usize {
    let s = ((t - h.start) / h.dt() + 1e-9).floor();
    if s <= 0.0 {
        0
    } else {
        (s as usize).min(h.nodes - 1)
    }
}

fn interpolate(h: &Horizon, states: &[DVector<f64>], t: f64) -> DVector<f64> {
    let s = (t - h.start) / h.dt();
    if s <= 0.0 {
        return states[0].clone();
    }
    let last = states.len() - 1;
    if s >= last as f64 {
        return states[last].clone();
    }
    let j = s.floor() as usize;
    let w = s - j as f64;
    if w < 1e-12 {
        return states[j].clone();
    }
    &states[j] * (1.0 - w) + &states[j + 1] * w
}

/// Time-varying affine policy `u_k = ū_k + K_k (x_k − x̄_k)`.
#[derive(Debug, Clone)]
pub struct FeedbackPolicy {
    pub feedforward: Vec<DVector<f64>>,
    pub gains: Vec<DMatrix<f64>>,
    pub nominal_states: Vec<DVector<f64>>,
}

impl FeedbackPolicy {
    /// Open-loop policy holding `u_ref(t_k)` from the OCP input cost.
    pub fn open_loop<O: OcpDefinition + ?Sized>(ocp: &O, x0: &DVector<f64>) -> Self {
        let h = ocp.horizon();
        let (n, m) = (ocp.state_dim(), ocp.input_dim());
        Self {
            feedforward: (0..h.nodes)
                .map(|k| ocp.input_cost(h.time(k)).reference)
                .collect(),
            gains: vec![DMatrix::zeros(m, n); h.nodes],
            nominal_states: vec![x0.clone(); h.nodes],
        }
    }

    pub fn input(&self, k: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.feedforward[k] + &self.gains[k] * (x - &self.nominal_states[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub merit: f64,
    pub step: f64,
    pub violation: f64,
    pub regularization: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub policy: FeedbackPolicy,
    pub log: Vec<IterationRecord>,
    pub converged: bool,
    pub regularization: f64,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    /// `Σ dt ‖g_eq‖₁`.
    pub violation: f64,
    /// Largest absolute equality residual over all nodes.
    pub max_violation: f64,
    pub merit: f64,
}

fn check_dims<O: OcpDefinition + ?Sized>(ocp: &O, x0: &DVector<f64>) -> Result<(), SolverError> {
    if x0.len() != ocp.state_dim() {
        return Err(SolverError::DimensionMismatch(format!(
            "x0 has {} entries, OCP state has {}",
            x0.len(),
            ocp.state_dim()
        )));
    }
    if ocp.horizon().nodes == 0 || !(ocp.horizon().duration > 0.0) {
        return Err(SolverError::InvalidSettings("empty horizon".into()));
    }
    Ok(())
}

fn rollout_with<O: OcpDefinition + ?Sized>(
    ocp: &O,
    x0: &DVector<f64>,
    mut control: impl FnMut(usize, &DVector<f64>) -> DVector<f64>,
) -> Result<Trajectory, SolverError> {
    let h = ocp.horizon();
    let dt = h.dt();
    let mut states = Vec::with_capacity(h.nodes + 1);
    let mut inputs = Vec::with_capacity(h.nodes);
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(SolverError::Divergence { node: 0 });
    }
    states.push(x0.clone());
    for k in 0..h.nodes {
        let t = h.time(k);
        let x = &states[k];
        let u = ocp.project_input(x, &control(k, x), t);
        if !u.iter().all(|v| v.is_finite()) {
            return Err(SolverError::Divergence { node: k });
        }
        let next = ocp.step(x, &u, t, dt);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(SolverError::Divergence { node: k + 1 });
        }
        inputs.push(u);
        states.push(next);
    }
    Ok(Trajectory {
        horizon: h,
        states,
        inputs,
    })
}

/// Forward simulation under `policy` with the projection hook applied to every input.
pub fn rollout<O: OcpDefinition + ?Sized>(
    ocp: &O,
    x0: &DVector<f64>,
    policy: &FeedbackPolicy,
) -> Result<Trajectory, SolverError> {
    check_dims(ocp, x0)?;
    if policy.feedforward.len() != ocp.horizon().nodes {
        return Err(SolverError::DimensionMismatch(
            "policy does not cover the horizon".into(),
        ));
    }
    rollout_with(ocp, x0, |k, x| policy.input(k, x))
}

pub fn evaluate<O: OcpDefinition + ?Sized>(
    ocp: &O,
    traj: &Trajectory,
    settings: &SolverSettings,
) -> Evaluation {
    let h = traj.horizon;
    let dt = h.dt();
    let mut cost = 0.0;
    let mut violation = 0.0;
    let mut max_violation = 0.0f64;
    for (k, u) in traj.inputs.iter().enumerate() {
        let t = h.time(k);
        let x = &traj.states[k];
        cost += dt * (ocp.state_cost(x, t) + ocp.input_cost(t).value(u));
        let g = ocp.equality_constraints(x, u, t);
        violation += dt * g.lp_norm(1);
        max_violation = max_violation.max(g.amax());
    }
    cost += ocp.terminal_cost(&traj.states[h.nodes]);
    Evaluation {
        cost,
        violation,
        max_violation,
        merit: cost + settings.merit_weight * violation,
    }
}

fn finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// LQ approximation of the OCP about `traj`.
pub fn linearize<O: OcpDefinition + ?Sized>(
    ocp: &O,
    traj: &Trajectory,
    settings: &SolverSettings,
) -> Result<LqData, SolverError> {
    let h = traj.horizon;
    let dt = h.dt();
    let eps = settings.fd_step;
    let (n, m) = (ocp.state_dim(), ocp.input_dim());
    let mut nodes = Vec::with_capacity(h.nodes);
    for k in 0..h.nodes {
        let t = h.time(k);
        let x = &traj.states[k];
        let u = &traj.inputs[k];
        let (a, b) = match ocp.step_linearization(x, u, t, dt) {
            Some(lin) => (lin.a, lin.b),
            None => (
                fd_jacobian(|x| ocp.step(x, u, t, dt), x, eps),
                fd_jacobian(|u| ocp.step(x, u, t, dt), u, eps),
            ),
        };
        let state = ocp
            .state_cost_expansion(x, t)
            .unwrap_or_else(|| fd_expansion(|x| ocp.state_cost(x, t), x, eps));
        let input = ocp.input_cost(t);
        let g = ocp.equality_constraints(x, u, t);
        let (c, d) = if g.is_empty() {
            (DMatrix::zeros(0, n), DMatrix::zeros(0, m))
        } else {
            match ocp.equality_jacobians(x, u, t) {
                Some(j) => (j.state, j.input),
                None => (
                    fd_jacobian(|x| ocp.equality_constraints(x, u, t), x, eps),
                    fd_jacobian(|u| ocp.equality_constraints(x, u, t), u, eps),
                ),
            }
        };
        let node = LqNode {
            a,
            b,
            lx: state.gradient * dt,
            lu: &input.weight * (u - &input.reference) * dt,
            lxx: state.hessian * dt,
            luu: input.weight * dt,
            lux: DMatrix::zeros(m, n),
            c,
            d,
            e: g,
        };
        let ok = finite(&node.a)
            && finite(&node.b)
            && node.lx.iter().all(|v| v.is_finite())
            && node.lu.iter().all(|v| v.is_finite())
            && finite(&node.lxx)
            && finite(&node.c)
            && finite(&node.d)
            && node.e.iter().all(|v| v.is_finite());
        if !ok {
            return Err(SolverError::Linearization { node: k });
        }
        nodes.push(node);
    }
    let xn = &traj.states[h.nodes];
    let terminal = ocp
        .terminal_cost_expansion(xn)
        .unwrap_or_else(|| fd_expansion(|x| ocp.terminal_cost(x), xn, eps));
    if !(terminal.gradient.iter().all(|v| v.is_finite()) && finite(&terminal.hessian)) {
        return Err(SolverError::Linearization { node: h.nodes });
    }
    Ok(LqData {
        nodes,
        terminal_gradient: terminal.gradient,
        terminal_hessian: terminal.hessian,
    })
}

#[derive(Debug, Clone)]
pub struct LineSearchResult {
    pub trajectory: Trajectory,
    pub step: f64,
    pub evaluation: Evaluation,
}

/// Backtracking on the feedforward update about `nominal`; returns step 0 and
/// the nominal trajectory when no trial strictly decreases the merit.
pub fn line_search<O: OcpDefinition + ?Sized>(
    ocp: &O,
    x0: &DVector<f64>,
    nominal: &Trajectory,
    nominal_eval: &Evaluation,
    update: &PolicyUpdate,
    settings: &SolverSettings,
) -> LineSearchResult {
    let unchanged = LineSearchResult {
        trajectory: nominal.clone(),
        step: 0.0,
        evaluation: *nominal_eval,
    };
    let scale = nominal.inputs.iter().map(|u| u.amax()).fold(0.0, f64::max);
    // An update at roundoff level cannot produce a meaningful decrease.
    let negligible = -update.expected.at(1.0) <= 1e-12 * (1.0 + nominal_eval.merit.abs())
        && nominal_eval.max_violation <= 1e-12
        && update.max_feedforward() <= 1e-8 * (1.0 + scale);
    if negligible || update.max_feedforward() <= 1e-14 * (1.0 + scale) {
        return unchanged;
    }
    let mut step = 1.0;
    while step >= settings.min_step * (1.0 - 1e-12) {
        let trial = rollout_with(ocp, x0, |k, x| {
            &nominal.inputs[k]
                + &update.feedforward[k] * step
                + &update.gains[k] * (x - &nominal.states[k])
        });
        if let Ok(trajectory) = trial {
            let evaluation = evaluate(ocp, &trajectory, settings);
            if evaluation.merit.is_finite() && evaluation.merit < nominal_eval.merit {
                return LineSearchResult {
                    trajectory,
                    step,
                    evaluation,
                };
            }
        }
        step *= settings.backtracking;
    }
    unchanged
}

fn policy_from(traj: &Trajectory, update: &PolicyUpdate) -> FeedbackPolicy {
    FeedbackPolicy {
        feedforward: traj.inputs.clone(),
        gains: update.gains.clone(),
        nominal_states: traj.states[..traj.inputs.len()].to_vec(),
    }
}

struct IterationOutcome {
    trajectory: Trajectory,
    evaluation: Evaluation,
    policy: FeedbackPolicy,
    step: f64,
    regularization: f64,
    converged: bool,
}

fn iterate<O: OcpDefinition + ?Sized>(
    ocp: &O,
    x0: &DVector<f64>,
    nominal: Trajectory,
    nominal_eval: Evaluation,
    mut regularization: f64,
    settings: &SolverSettings,
) -> Result<IterationOutcome, SolverError> {
    let lq = linearize(ocp, &nominal, settings)?;
    let update = loop {
        match backward_pass(&lq, regularization) {
            Ok(u) => break u,
            Err(SolverError::NotPositiveDefinite { .. })
                if regularization * 10.0 <= settings.regularization_max =>
            {
                regularization *= 10.0;
            }
            Err(e) => return Err(e),
        }
    };
    let ls = line_search(ocp, x0, &nominal, &nominal_eval, &update, settings);
    let old = nominal_eval.merit;
    let (converged, next_reg) = if ls.step > 0.0 {
        let decrease = old - ls.evaluation.merit;
        (
            decrease <= settings.tolerance * old.abs().max(1.0),
            (regularization * 0.5).max(settings.regularization_floor),
        )
    } else {
        let stationary = update.expected.at(1.0).abs() <= settings.tolerance * old.abs().max(1.0);
        (stationary, regularization * 10.0)
    };
    let policy = policy_from(&ls.trajectory, &update);
    Ok(IterationOutcome {
        trajectory: ls.trajectory,
        evaluation: ls.evaluation,
        policy,
        step: ls.step,
        regularization: next_reg,
        converged,
    })
}

/// Iterate rollout, linearization, backward pass and line search to convergence.
pub fn solve<O: OcpDefinition + ?Sized>(
    ocp: &O,
    x0: &DVector<f64>,
    settings: &SolverSettings,
    warm_start: Option<&FeedbackPolicy>,
) -> Result<Solution, SolverError> {
    settings.validate()?;
    check_dims(ocp, x0)?;
    let initial = match warm_start {
        Some(p) => p.clone(),
        None => FeedbackPolicy::open_loop(ocp, x0),
    };
    let mut trajectory = rollout(ocp, x0, &initial)?;
    let mut evaluation = evaluate(ocp, &trajectory, settings);
    let mut regularization = settings.regularization_floor;
    let mut policy = initial;
    let mut log = Vec::new();
    let mut converged = false;
    for iteration in 0..settings.max_iterations {
        let out = iterate(ocp, x0, trajectory, evaluation, regularization, settings)?;
        log.push(IterationRecord {
            iteration,
            cost: out.evaluation.cost,
            merit: out.evaluation.merit,
            step: out.step,
            violation: out.evaluation.violation,
            regularization,
        });
        trajectory = out.trajectory;
        evaluation = out.evaluation;
        policy = out.policy;
        regularization = out.regularization;
        converged = out.converged;
        if converged || regularization > settings.regularization_max {
            break;
        }
    }
    Ok(Solution {
        trajectory,
        policy,
        log,
        converged,
        regularization,
        evaluation,
    })
}

/// Re-index a policy onto `horizon`: inputs and gains held (zero-order),
/// nominal states interpolated, everything past the old horizon held at the
/// last node.
pub fn shift_policy(previous: &Solution, horizon: &Horizon) -> FeedbackPolicy {
    let old = &previous.trajectory.horizon;
    let pol = &previous.policy;
    let mut feedforward = Vec::with_capacity(horizon.nodes);
    let mut gains = Vec::with_capacity(horizon.nodes);
    let mut nominal_states = Vec::with_capacity(horizon.nodes);
    for k in 0..horizon.nodes {
        let t = horizon.time(k);
        let j = node_index(old, t);
        feedforward.push(pol.feedforward[j].clone());
        gains.push(pol.gains[j].clone());
        nominal_states.push(interpolate(old, &previous.trajectory.states, t));
    }
    FeedbackPolicy {
        feedforward,
        gains,
        nominal_states,
    }
}

/// One SLQ iteration from the previous solution shifted onto the OCP horizon.
pub fn mpc_step<O: OcpDefinition + ?Sized>(
    ocp: &O,
    x0: &DVector<f64>,
    previous: &Solution,
    settings: &SolverSettings,
) -> Result<Solution, SolverError> {
    settings.validate()?;
    check_dims(ocp, x0)?;
    let warm = shift_policy(previous, &ocp.horizon());
    let trajectory = rollout(ocp, x0, &warm)?;
    let evaluation = evaluate(ocp, &trajectory, settings);
    let regularization = previous.regularization.min(settings.regularization_max);
    let out = iterate(ocp, x0, trajectory, evaluation, regularization, settings)?;
    let record = IterationRecord {
        iteration: previous.log.last().map_or(0, |r| r.iteration + 1),
        cost: out.evaluation.cost,
        merit: out.evaluation.merit,
        step: out.step,
        violation: out.evaluation.violation,
        regularization,
    };
    Ok(Solution {
        trajectory: out.trajectory,
        policy: out.policy,
        log: vec![record],
        converged: out.converged,
        regularization: out.regularization.min(settings.regularization_max),
        evaluation: out.evaluation,
    })
}

/// Write an iteration log as CSV with a header row.
pub fn write_iteration_log<W: Write>(log: &[IterationRecord], writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for r in log {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
