use nalgebra::{DMatrix, DVector};

use super::integrator::{rk4_linearization, rk4_step};

/// Uniform time grid of an optimal-control problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    /// Absolute time of node 0 (s).
    pub start: f64,
    /// Horizon length (s).
    pub duration: f64,
    /// Number of input intervals; states live on `nodes + 1` grid points.
    pub nodes: usize,
}

impl Horizon {
    pub fn new(start: f64, duration: f64, nodes: usize) -> Self {
        Self {
            start,
            duration,
            nodes,
        }
    }

    pub fn dt(&self) -> f64 {
        self.duration / self.nodes as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.dt()
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Quadratic input penalty `½(u − u_ref)ᵀ W (u − u_ref)`.
#[derive(Debug, Clone)]
pub struct InputCost {
    pub weight: DMatrix<f64>,
    pub reference: DVector<f64>,
}

impl InputCost {
    pub fn value(&self, u: &DVector<f64>) -> f64 {
        let du = u - &self.reference;
        0.5 * du.dot(&(&self.weight * &du))
    }
}

/// Gradient and Hessian of a scalar function.
#[derive(Debug, Clone)]
pub struct CostExpansion {
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// One discretized dynamics step and its Jacobians.
#[derive(Debug, Clone)]
pub struct StepLinearization {
    pub next: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

/// Jacobians of the equality constraints `g(x, u, t) = 0`.
#[derive(Debug, Clone)]
pub struct ConstraintJacobians {
    pub state: DMatrix<f64>,
    pub input: DMatrix<f64>,
}

/// A continuous-time optimal-control problem
///
/// `min ∫ L(x,u,t) dt + Φ(x(T))` s.t. `ẋ = f(x,u,t)`, `g_eq(x,u,t) = 0`,
///
/// with the running cost split into a state part and a quadratic input part,
/// `L = ℓ(x,t) + ½(u − u_ref)ᵀW(u − u_ref)`. Derivative hooks return `None`
/// when no analytic form is available; the solver then differentiates
/// numerically.
pub trait OcpDefinition {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn horizon(&self) -> Horizon;

    fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64>;

    fn dynamics_jacobians(
        &self,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
        _t: f64,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }

    /// Discrete transition over `dt` with the input held constant.
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64, dt: f64) -> DVector<f64> {
        rk4_step(|x, u, t| self.dynamics(x, u, t), x, u, t, dt)
    }

    fn step_linearization(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        t: f64,
        dt: f64,
    ) -> Option<StepLinearization> {
        // Probe once so problems without analytic Jacobians fall back to
        // finite differences of `step`.
        self.dynamics_jacobians(x, u, t)?;
        Some(rk4_linearization(
            |x, u, t| self.dynamics(x, u, t),
            |x, u, t| {
                self.dynamics_jacobians(x, u, t)
                    .expect("analytic Jacobians available at one point but not another")
            },
            x,
            u,
            t,
            dt,
        ))
    }

    fn state_cost(&self, x: &DVector<f64>, t: f64) -> f64;

    fn state_cost_expansion(&self, _x: &DVector<f64>, _t: f64) -> Option<CostExpansion> {
        None
    }

    fn input_cost(&self, t: f64) -> InputCost;

    fn terminal_cost(&self, x: &DVector<f64>) -> f64;

    fn terminal_cost_expansion(&self, _x: &DVector<f64>) -> Option<CostExpansion> {
        None
    }

    /// Equality residual at `t`; zero rows when unconstrained.
    fn equality_constraints(&self, _x: &DVector<f64>, _u: &DVector<f64>, _t: f64) -> DVector<f64> {
        DVector::zeros(0)
    }

    fn equality_jacobians(
        &self,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
        _t: f64,
    ) -> Option<ConstraintJacobians> {
        None
    }

    /// Map a commanded input onto the feasible set before integration.
    fn project_input(&self, _x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> DVector<f64> {
        u.clone()
    }
}

/// Central-difference Jacobian of a vector function.
pub fn fd_jacobian(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    at: &DVector<f64>,
    step: f64,
) -> DMatrix<f64> {
    let mut probe = at.clone();
    let mut cols = Vec::with_capacity(at.len());
    for i in 0..at.len() {
        let h = step * (1.0 + at[i].abs());
        probe[i] = at[i] + h;
        let fp = f(&probe);
        probe[i] = at[i] - h;
        let fm = f(&probe);
        probe[i] = at[i];
        cols.push((fp - fm) / (2.0 * h));
    }
    if cols.is_empty() {
        return DMatrix::zeros(f(at).len(), 0);
    }
    DMatrix::from_columns(&cols)
}

/// Central-difference gradient and Hessian of a scalar function.
pub fn fd_expansion(
    f: impl Fn(&DVector<f64>) -> f64,
    at: &DVector<f64>,
    step: f64,
) -> CostExpansion {
    let n = at.len();
    let grad_fn = |x: &DVector<f64>| {
        let mut probe = x.clone();
        DVector::from_fn(n, |i, _| {
            let h = step.sqrt().max(step) * (1.0 + x[i].abs());
            probe[i] = x[i] + h;
            let fp = f(&probe);
            probe[i] = x[i] - h;
            let fm = f(&probe);
            probe[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
    };
    let gradient = grad_fn(at);
    let mut hessian = fd_jacobian(grad_fn, at, step.sqrt().max(step));
    hessian = (&hessian + hessian.transpose()) * 0.5;
    CostExpansion { gradient, hessian }
}
