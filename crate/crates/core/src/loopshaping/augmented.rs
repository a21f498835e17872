use nalgebra::{DMatrix, DVector};

use crate::slq::{
    fd_jacobian, rk4_path_linearization, rk4_path_step, ConstraintJacobians, CostExpansion,
    Horizon, InputCost, InputPath, OcpDefinition, StepLinearization, Trajectory,
};

use super::bank::FilterChannel;
use super::{make_filter_bank, FilterBank, ShapingError, ShapingSpec};

/// Quadratic penalty weight on pure-state constraints in derivative mode.
pub const DERIVATIVE_PENALTY: f64 = 1e6;

#[derive(Debug, Clone)]
enum Mode {
    /// Inverse shaping filters; constraints rewritten over the recovered input.
    Inverse,
    /// `ẋ_s = ν`, `u = x_s`; the original input cost and constraints act on
    /// the filter state.
    Derivative { input_weight: DMatrix<f64> },
}

/// OCP over `(x, x_s)` with auxiliary input `ν` and `u = C_s x_s + D_s ν`.
#[derive(Debug, Clone)]
pub struct AugmentedOcp<O> {
    inner: O,
    bank: FilterBank,
    mode: Mode,
}

/// Wrap `ocp` with the inverse shaping filters of `spec`.
pub fn augment_ocp<O: OcpDefinition>(
    ocp: O,
    spec: &ShapingSpec,
) -> Result<AugmentedOcp<O>, ShapingError> {
    if spec.len() != ocp.input_dim() {
        return Err(ShapingError::DimensionMismatch(format!(
            "spec covers {} inputs, OCP has {}",
            spec.len(),
            ocp.input_dim()
        )));
    }
    let bank = make_filter_bank(spec)?;
    Ok(AugmentedOcp {
        inner: ocp,
        bank,
        mode: Mode::Inverse,
    })
}

/// Augment with `ẋ_s = ν`, `u = x_s`, penalizing `½νᵀWν`.
pub fn derivative_augmentation<O: OcpDefinition>(
    ocp: O,
    input_weight: DMatrix<f64>,
) -> Result<AugmentedOcp<O>, ShapingError> {
    let m = ocp.input_dim();
    if input_weight.shape() != (m, m) {
        return Err(ShapingError::DimensionMismatch(format!(
            "weight is {:?}, expected {m}×{m}",
            input_weight.shape()
        )));
    }
    let channels = (0..m)
        .map(|i| FilterChannel {
            input: i,
            a: 0.0,
            b: 1.0,
            c: 1.0,
        })
        .collect();
    Ok(AugmentedOcp {
        inner: ocp,
        bank: FilterBank::from_channels(m, channels, DVector::zeros(m)),
        mode: Mode::Derivative { input_weight },
    })
}

impl<O: OcpDefinition> AugmentedOcp<O> {
    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn inner_mut(&mut self) -> &mut O {
        &mut self.inner
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn filter_dim(&self) -> usize {
        self.bank.state_dim()
    }

    pub fn is_derivative(&self) -> bool {
        matches!(self.mode, Mode::Derivative { .. })
    }

    /// True when the wrapper is a pass-through to the original problem.
    fn passthrough(&self) -> bool {
        matches!(self.mode, Mode::Inverse) && self.bank.is_identity()
    }

    pub fn join_state(&self, x: &DVector<f64>, xs: &DVector<f64>) -> DVector<f64> {
        let n = x.len();
        let mut z = DVector::zeros(n + xs.len());
        z.rows_mut(0, n).copy_from(x);
        z.rows_mut(n, xs.len()).copy_from(xs);
        z
    }

    pub fn split_state(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.inner.state_dim();
        (
            z.rows(0, n).into_owned(),
            z.rows(n, z.len() - n).into_owned(),
        )
    }

    /// Original input recovered from an augmented state and auxiliary input.
    pub fn recover(&self, z: &DVector<f64>, nu: &DVector<f64>) -> DVector<f64> {
        let n = self.inner.state_dim();
        self.bank
            .output(&z.rows(n, self.bank.state_dim()).into_owned(), nu)
    }

    /// Recovered inputs `u_k` along an augmented trajectory.
    pub fn recovered_inputs(&self, traj: &Trajectory) -> Vec<DVector<f64>> {
        traj.inputs
            .iter()
            .zip(&traj.states)
            .map(|(nu, z)| self.recover(z, nu))
            .collect()
    }

    /// Original-coordinate states `x_k` along an augmented trajectory.
    pub fn plant_states(&self, traj: &Trajectory) -> Vec<DVector<f64>> {
        traj.states.iter().map(|z| self.split_state(z).0).collect()
    }

    fn constraint_jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        t: f64,
    ) -> ConstraintJacobians {
        self.inner
            .equality_jacobians(x, u, t)
            .unwrap_or_else(|| ConstraintJacobians {
                state: fd_jacobian(|x| self.inner.equality_constraints(x, u, t), x, 1e-6),
                input: fd_jacobian(|u| self.inner.equality_constraints(x, u, t), u, 1e-6),
            })
    }

    /// Recovered input at the end of the interval starting at `x_s` with `ν`
    /// held. Constraints are collocated there: enforcing them at the interval
    /// start makes the inverse-filter zero an explicit-Euler pole, which is
    /// unstable for cutoffs above roughly `0.2/dt`.
    pub fn constrained_input(&self, xs: &DVector<f64>, nu: &DVector<f64>) -> DVector<f64> {
        let h = self.inner.horizon().dt();
        self.bank.output(&self.bank.advance(xs, nu, h), nu)
    }

    fn stage_inputs(&self, xs: &DVector<f64>, nu: &DVector<f64>, h: f64) -> [DVector<f64>; 3] {
        [0.0, 0.5 * h, h].map(|tau| self.bank.output(&self.bank.advance(xs, nu, tau), nu))
    }
}

impl<O: OcpDefinition> OcpDefinition for AugmentedOcp<O> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim() + self.bank.state_dim()
    }

    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn horizon(&self) -> Horizon {
        self.inner.horizon()
    }

    fn dynamics(&self, z: &DVector<f64>, nu: &DVector<f64>, t: f64) -> DVector<f64> {
        let (x, xs) = self.split_state(z);
        let u = self.bank.output(&xs, nu);
        self.join_state(
            &self.inner.dynamics(&x, &u, t),
            &self.bank.derivative(&xs, nu),
        )
    }

    fn dynamics_jacobians(
        &self,
        z: &DVector<f64>,
        nu: &DVector<f64>,
        t: f64,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let (x, xs) = self.split_state(z);
        let u = self.bank.output(&xs, nu);
        let (fa, fb) = self.inner.dynamics_jacobians(&x, &u, t)?;
        let (n, ns, m) = (x.len(), xs.len(), nu.len());
        let ss = self.bank.realization();
        let mut a = DMatrix::zeros(n + ns, n + ns);
        a.view_mut((0, 0), (n, n)).copy_from(&fa);
        a.view_mut((0, n), (n, ns)).copy_from(&(&fb * &ss.c));
        a.view_mut((n, n), (ns, ns)).copy_from(&ss.a);
        let mut b = DMatrix::zeros(n + ns, m);
        b.view_mut((0, 0), (n, m)).copy_from(&(&fb * &ss.d));
        b.view_mut((n, 0), (ns, m)).copy_from(&ss.b);
        Some((a, b))
    }

    /// RK4 on the plant with the filter state propagated exactly, so the
    /// recovered input at every stage is the true filter output.
    fn step(&self, z: &DVector<f64>, nu: &DVector<f64>, t: f64, dt: f64) -> DVector<f64> {
        if self.passthrough() {
            return self.inner.step(z, nu, t, dt);
        }
        let (x, xs) = self.split_state(z);
        let [u0, u1, u2] = self.stage_inputs(&xs, nu, dt);
        let path = InputPath {
            start: &u0,
            mid: &u1,
            end: &u2,
            maps: None,
        };
        let next = rk4_path_step(|x, u, t| self.inner.dynamics(x, u, t), &x, &path, t, dt);
        self.join_state(&next, &self.bank.advance(&xs, nu, dt))
    }

    fn step_linearization(
        &self,
        z: &DVector<f64>,
        nu: &DVector<f64>,
        t: f64,
        dt: f64,
    ) -> Option<StepLinearization> {
        if self.passthrough() {
            return self.inner.step_linearization(z, nu, t, dt);
        }
        let (x, xs) = self.split_state(z);
        self.inner
            .dynamics_jacobians(&x, &self.bank.output(&xs, nu), t)?;
        let [u0, u1, u2] = self.stage_inputs(&xs, nu, dt);
        let maps = [0.0, 0.5 * dt, dt].map(|tau| self.bank.output_map(tau));
        let path = InputPath {
            start: &u0,
            mid: &u1,
            end: &u2,
            maps: Some([&maps[0], &maps[1], &maps[2]]),
        };
        let lin = rk4_path_linearization(
            |x, u, t| self.inner.dynamics(x, u, t),
            |x, u, t| {
                self.inner
                    .dynamics_jacobians(x, u, t)
                    .expect("analytic Jacobians available at one point but not another")
            },
            &x,
            &path,
            t,
            dt,
        );
        let (n, ns, m) = (x.len(), xs.len(), nu.len());
        let (e, g) = self.bank.advance_jacobians(dt);
        let mut a = DMatrix::zeros(n + ns, n + ns);
        a.view_mut((0, 0), (n, n)).copy_from(&lin.a);
        a.view_mut((0, n), (n, ns)).copy_from(&lin.b.columns(0, ns));
        a.view_mut((n, n), (ns, ns)).copy_from(&e);
        let mut b = DMatrix::zeros(n + ns, m);
        b.view_mut((0, 0), (n, m)).copy_from(&lin.b.columns(ns, m));
        b.view_mut((n, 0), (ns, m)).copy_from(&g);
        Some(StepLinearization {
            next: self.join_state(&lin.next, &self.bank.advance(&xs, nu, dt)),
            a,
            b,
        })
    }

    fn state_cost(&self, z: &DVector<f64>, t: f64) -> f64 {
        let (x, xs) = self.split_state(z);
        let base = self.inner.state_cost(&x, t);
        match &self.mode {
            Mode::Inverse => base,
            Mode::Derivative { .. } => {
                let g = self.inner.equality_constraints(&x, &xs, t);
                base + self.inner.input_cost(t).value(&xs)
                    + 0.5 * DERIVATIVE_PENALTY * g.norm_squared()
            }
        }
    }

    fn state_cost_expansion(&self, z: &DVector<f64>, t: f64) -> Option<CostExpansion> {
        let (x, xs) = self.split_state(z);
        let inner = self.inner.state_cost_expansion(&x, t)?;
        let (n, ns) = (x.len(), xs.len());
        let mut gradient = DVector::zeros(n + ns);
        let mut hessian = DMatrix::zeros(n + ns, n + ns);
        gradient.rows_mut(0, n).copy_from(&inner.gradient);
        hessian.view_mut((0, 0), (n, n)).copy_from(&inner.hessian);
        if let Mode::Derivative { .. } = self.mode {
            let ic = self.inner.input_cost(t);
            let mut gr = gradient.rows_mut(n, ns);
            gr += &ic.weight * (&xs - &ic.reference);
            let mut hs = hessian.view_mut((n, n), (ns, ns));
            hs += &ic.weight;
            let g = self.inner.equality_constraints(&x, &xs, t);
            if !g.is_empty() {
                let jac = self.constraint_jacobians(&x, &xs, t);
                let mut full = DMatrix::zeros(g.len(), n + ns);
                full.view_mut((0, 0), (g.len(), n)).copy_from(&jac.state);
                full.view_mut((0, n), (g.len(), ns)).copy_from(&jac.input);
                gradient += full.transpose() * &g * DERIVATIVE_PENALTY;
                hessian += full.transpose() * &full * DERIVATIVE_PENALTY;
            }
        }
        Some(CostExpansion { gradient, hessian })
    }

    fn input_cost(&self, t: f64) -> InputCost {
        match &self.mode {
            Mode::Inverse => self.inner.input_cost(t),
            Mode::Derivative { input_weight } => InputCost {
                weight: input_weight.clone(),
                reference: DVector::zeros(self.inner.input_dim()),
            },
        }
    }

    fn terminal_cost(&self, z: &DVector<f64>) -> f64 {
        self.inner.terminal_cost(&self.split_state(z).0)
    }

    fn terminal_cost_expansion(&self, z: &DVector<f64>) -> Option<CostExpansion> {
        let inner = self.inner.terminal_cost_expansion(&self.split_state(z).0)?;
        let (n, total) = (self.inner.state_dim(), z.len());
        let mut gradient = DVector::zeros(total);
        let mut hessian = DMatrix::zeros(total, total);
        gradient.rows_mut(0, n).copy_from(&inner.gradient);
        hessian.view_mut((0, 0), (n, n)).copy_from(&inner.hessian);
        Some(CostExpansion { gradient, hessian })
    }

    fn equality_constraints(&self, z: &DVector<f64>, nu: &DVector<f64>, t: f64) -> DVector<f64> {
        match self.mode {
            Mode::Derivative { .. } => DVector::zeros(0),
            Mode::Inverse => {
                let (x, xs) = self.split_state(z);
                self.inner
                    .equality_constraints(&x, &self.constrained_input(&xs, nu), t)
            }
        }
    }

    fn equality_jacobians(
        &self,
        z: &DVector<f64>,
        nu: &DVector<f64>,
        t: f64,
    ) -> Option<ConstraintJacobians> {
        match self.mode {
            Mode::Derivative { .. } => Some(ConstraintJacobians {
                state: DMatrix::zeros(0, z.len()),
                input: DMatrix::zeros(0, nu.len()),
            }),
            Mode::Inverse => {
                let (x, xs) = self.split_state(z);
                let u = self.constrained_input(&xs, nu);
                let inner = self.inner.equality_jacobians(&x, &u, t)?;
                let map = self.bank.output_map(self.horizon().dt());
                let (r, n, ns) = (inner.state.nrows(), x.len(), xs.len());
                let mut state = DMatrix::zeros(r, n + ns);
                state.view_mut((0, 0), (r, n)).copy_from(&inner.state);
                state
                    .view_mut((0, n), (r, ns))
                    .copy_from(&(&inner.input * map.columns(0, ns)));
                Some(ConstraintJacobians {
                    state,
                    input: &inner.input * map.columns(ns, nu.len()),
                })
            }
        }
    }

    fn project_input(&self, z: &DVector<f64>, nu: &DVector<f64>, t: f64) -> DVector<f64> {
        if self.is_derivative() {
            return nu.clone();
        }
        let (x, xs) = self.split_state(z);
        let u = self.bank.output(&xs, nu);
        let projected = self.inner.project_input(&x, &u, t);
        if projected == u {
            return nu.clone();
        }
        self.bank.auxiliary_for(&xs, &projected, nu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loopshaping::InputShaping;
    use crate::lti::lqr_gain;
    use crate::slq::{fd_jacobian, solve, LinearQuadraticOcp, SolverSettings};
    use nalgebra::{dmatrix, dvector};

    fn integrator() -> LinearQuadraticOcp {
        LinearQuadraticOcp::new(
            dmatrix![0.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![0.0],
            Horizon::new(0.0, 1.0, 100),
        )
    }

    fn shaped(alpha: f64, beta: f64) -> ShapingSpec {
        ShapingSpec::new(vec![InputShaping::new(alpha, beta).unwrap()]).unwrap()
    }

    #[test]
    fn integrator_augmentation_is_stabilizable() {
        let aug = augment_ocp(integrator(), &shaped(0.01, 0.1)).unwrap();
        assert_eq!(aug.state_dim(), 2);
        let z = dvector![0.0, 0.0];
        let (a, b) = aug.dynamics_jacobians(&z, &dvector![0.0], 0.0).unwrap();
        let q = dmatrix![1.0, 0.0; 0.0, 0.0];
        let sol = lqr_gain(&a, &b, &q, &dmatrix![1.0]).unwrap();
        assert!(sol.gain.iter().all(|v| v.is_finite()));
        let closed = &a - &b * &sol.gain;
        assert!(closed.complex_eigenvalues().iter().all(|l| l.re < 0.0));
    }

    #[test]
    fn step_linearization_matches_finite_differences() {
        let aug = augment_ocp(integrator(), &shaped(0.01, 0.1)).unwrap();
        let z = dvector![0.3, -0.7];
        let nu = dvector![1.2];
        let lin = aug.step_linearization(&z, &nu, 0.0, 0.01).unwrap();
        let fa = fd_jacobian(|z| aug.step(z, &nu, 0.0, 0.01), &z, 1e-6);
        let fb = fd_jacobian(|nu| aug.step(&z, nu, 0.0, 0.01), &nu, 1e-6);
        assert!((lin.a - fa).amax() < 1e-8);
        assert!((lin.b - fb).amax() < 1e-8);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let spec = ShapingSpec::unshaped(2);
        assert!(matches!(
            augment_ocp(integrator(), &spec),
            Err(ShapingError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn derivative_chain_structure() {
        let aug = derivative_augmentation(integrator(), dmatrix![1.0]).unwrap();
        let (a, b) = aug
            .dynamics_jacobians(&dvector![0.0, 0.0], &dvector![0.0], 0.0)
            .unwrap();
        assert_eq!(a, dmatrix![0.0, 1.0; 0.0, 0.0]);
        assert_eq!(b, dmatrix![0.0; 1.0]);
    }

    #[test]
    fn constraint_collocation_keeps_stiff_zero_input_stable() {
        // u = 0 imposed at every node with a 50 rad/s cutoff at dt = 10 ms.
        let ocp = integrator().with_equality(dmatrix![0.0], dmatrix![1.0], dvector![0.0]);
        let spec = ShapingSpec::new(vec![InputShaping::from_cutoff(50.0).unwrap()]).unwrap();
        let aug = augment_ocp(ocp, &spec).unwrap();
        let xs = aug.bank().steady_state(&dvector![2.0]).unwrap();
        let z0 = aug.join_state(&dvector![1.0], &xs);
        let sol = solve(&aug, &z0, &SolverSettings::default(), None).unwrap();
        assert!(sol.converged);
        let filter: Vec<f64> = sol.trajectory.states.iter().map(|z| z[1].abs()).collect();
        assert!(filter.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        for (z, nu) in sol.trajectory.states.iter().zip(&sol.trajectory.inputs) {
            let (_, xs) = aug.split_state(z);
            assert!(aug.constrained_input(&xs, nu).amax() < 1e-9);
        }
    }
}
