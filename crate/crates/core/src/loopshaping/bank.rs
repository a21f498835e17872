use nalgebra::{DMatrix, DVector};

use crate::lti::{balanced_first_order, RationalTransferFunction, StateSpaceRealization};
use crate::slq::Trajectory;

use super::{ShapingError, ShapingSpec};

/// One first-order filter state feeding input `input`:
/// `ẋ = a x + b ν_input`, contribution `c x` to `u_input`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterChannel {
    pub input: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl FilterChannel {
    /// `(e^{aτ}, ∫₀^τ e^{as} ds · b)`.
    fn transition(&self, tau: f64) -> (f64, f64) {
        if self.a == 0.0 {
            (1.0, tau * self.b)
        } else {
            let e = (self.a * tau).exp();
            (e, (e - 1.0) / self.a * self.b)
        }
    }
}

/// Block-diagonal realization of the inverse shaping filters `s = r⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    realization: StateSpaceRealization,
    channels: Vec<FilterChannel>,
    feedthrough: DVector<f64>,
    state_of_input: Vec<Option<usize>>,
}

impl FilterBank {
    pub(crate) fn from_channels(
        inputs: usize,
        channels: Vec<FilterChannel>,
        feedthrough: DVector<f64>,
    ) -> Self {
        let ns = channels.len();
        let mut a = DMatrix::zeros(ns, ns);
        let mut b = DMatrix::zeros(ns, inputs);
        let mut c = DMatrix::zeros(inputs, ns);
        let mut state_of_input = vec![None; inputs];
        for (j, ch) in channels.iter().enumerate() {
            a[(j, j)] = ch.a;
            b[(j, ch.input)] = ch.b;
            c[(ch.input, j)] = ch.c;
            state_of_input[ch.input] = Some(j);
        }
        let d = DMatrix::from_diagonal(&feedthrough);
        Self {
            realization: StateSpaceRealization { a, b, c, d },
            channels,
            feedthrough,
            state_of_input,
        }
    }

    pub fn realization(&self) -> &StateSpaceRealization {
        &self.realization
    }

    pub fn channels(&self) -> &[FilterChannel] {
        &self.channels
    }

    /// Filter state dimension `n_s`.
    pub fn state_dim(&self) -> usize {
        self.channels.len()
    }

    pub fn input_dim(&self) -> usize {
        self.feedthrough.len()
    }

    /// Filter state index driving each input, if any.
    pub fn state_of_input(&self) -> &[Option<usize>] {
        &self.state_of_input
    }

    /// Diagonal of `D_s`.
    pub fn feedthrough(&self) -> &DVector<f64> {
        &self.feedthrough
    }

    /// No state and unit feedthrough.
    pub fn is_identity(&self) -> bool {
        self.channels.is_empty() && self.feedthrough.iter().all(|&d| d == 1.0)
    }

    pub(crate) fn output(&self, xs: &DVector<f64>, nu: &DVector<f64>) -> DVector<f64> {
        let mut u = nu.component_mul(&self.feedthrough);
        for (j, ch) in self.channels.iter().enumerate() {
            u[ch.input] = ch.c * xs[j] + self.feedthrough[ch.input] * nu[ch.input];
        }
        u
    }

    pub(crate) fn derivative(&self, xs: &DVector<f64>, nu: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.channels.len(),
            self.channels
                .iter()
                .enumerate()
                .map(|(j, ch)| ch.a * xs[j] + ch.b * nu[ch.input]),
        )
    }

    /// Exact filter state after `tau` seconds with `ν` held.
    pub(crate) fn advance(&self, xs: &DVector<f64>, nu: &DVector<f64>, tau: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.channels.len(),
            self.channels.iter().enumerate().map(|(j, ch)| {
                let (e, g) = ch.transition(tau);
                e * xs[j] + g * nu[ch.input]
            }),
        )
    }

    /// `(∂x_s(τ)/∂x_s, ∂x_s(τ)/∂ν)` for the held-input transition.
    pub(crate) fn advance_jacobians(&self, tau: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let ns = self.channels.len();
        let mut e = DMatrix::zeros(ns, ns);
        let mut g = DMatrix::zeros(ns, self.input_dim());
        for (j, ch) in self.channels.iter().enumerate() {
            let (ej, gj) = ch.transition(tau);
            e[(j, j)] = ej;
            g[(j, ch.input)] = gj;
        }
        (e, g)
    }

    /// `∂u(τ)/∂[x_s; ν]` for the held-input transition.
    pub(crate) fn output_map(&self, tau: f64) -> DMatrix<f64> {
        let (ns, m) = (self.channels.len(), self.input_dim());
        let mut map = DMatrix::zeros(m, ns + m);
        for i in 0..m {
            map[(i, ns + i)] = self.feedthrough[i];
        }
        for (j, ch) in self.channels.iter().enumerate() {
            let (e, g) = ch.transition(tau);
            map[(ch.input, j)] = ch.c * e;
            map[(ch.input, ns + ch.input)] += ch.c * g;
        }
        map
    }

    /// Filter state at which the bank outputs `u` in steady state (`ν = u`).
    pub fn steady_state(&self, u: &DVector<f64>) -> Result<DVector<f64>, ShapingError> {
        check_len("input", u.len(), self.input_dim())?;
        self.channels
            .iter()
            .map(|ch| {
                if ch.a == 0.0 {
                    Err(ShapingError::InvalidSpec(
                        "integrating filter has no steady state".into(),
                    ))
                } else {
                    Ok(-ch.b / ch.a * u[ch.input])
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map(DVector::from_vec)
    }

    /// Auxiliary input reproducing `u` from filter state `x_s`. Inputs with
    /// zero feedthrough keep the value from `fallback`.
    pub fn auxiliary_for(
        &self,
        xs: &DVector<f64>,
        u: &DVector<f64>,
        fallback: &DVector<f64>,
    ) -> DVector<f64> {
        let mut nu = fallback.clone();
        for i in 0..self.input_dim() {
            let d = self.feedthrough[i];
            if d != 0.0 {
                let filtered = self.state_of_input[i].map_or(0.0, |j| self.channels[j].c * xs[j]);
                nu[i] = (u[i] - filtered) / d;
            }
        }
        nu
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<(), ShapingError> {
    if got == want {
        Ok(())
    } else {
        Err(ShapingError::DimensionMismatch(format!(
            "{what} has {got} entries, expected {want}"
        )))
    }
}

/// Block-diagonal realization of `s_i = r_i⁻¹` for every input.
pub fn make_filter_bank(spec: &ShapingSpec) -> Result<FilterBank, ShapingError> {
    let m = spec.len();
    let mut channels = Vec::new();
    let mut feedthrough = DVector::from_element(m, 1.0);
    for (i, s) in spec.inputs().iter().enumerate() {
        if !s.is_shaped() {
            continue;
        }
        let block = balanced_first_order(&RationalTransferFunction::lead_lag(s.alpha, s.beta)?)?;
        feedthrough[i] = block.d[(0, 0)];
        if block.order() == 1 {
            channels.push(FilterChannel {
                input: i,
                a: block.a[(0, 0)],
                b: block.b[(0, 0)],
                c: block.c[(0, 0)],
            });
        }
    }
    Ok(FilterBank::from_channels(m, channels, feedthrough))
}

/// `u = C_s x_s + D_s ν`.
pub fn recover_input(
    bank: &FilterBank,
    xs: &DVector<f64>,
    nu: &DVector<f64>,
) -> Result<DVector<f64>, ShapingError> {
    check_len("filter state", xs.len(), bank.state_dim())?;
    check_len("auxiliary input", nu.len(), bank.input_dim())?;
    Ok(bank.output(xs, nu))
}

/// Propagate `x_s` from `t0` over `dt` with the auxiliary inputs of `plan`
/// held piecewise constant between its nodes.
pub fn propagate_filter_state(
    bank: &FilterBank,
    xs: &DVector<f64>,
    plan: &Trajectory,
    t0: f64,
    dt: f64,
) -> Result<DVector<f64>, ShapingError> {
    check_len("filter state", xs.len(), bank.state_dim())?;
    if !(dt > 0.0) {
        return Err(ShapingError::InvalidSpec(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if bank.state_dim() == 0 {
        return Ok(xs.clone());
    }
    let h = plan.horizon;
    let tol = 1e-9 * h.duration.max(1.0);
    if t0 < h.start - tol || t0 + dt > h.end() + tol {
        return Err(ShapingError::Extrapolation {
            from: t0,
            to: t0 + dt,
            start: h.start,
            end: h.end(),
        });
    }
    if let Some(nu) = plan.inputs.first() {
        check_len("auxiliary input", nu.len(), bank.input_dim())?;
    }
    let node_dt = h.dt();
    let mut t = t0;
    let end = t0 + dt;
    let mut x = xs.clone();
    while end - t > 1e-12 {
        let s = ((t - h.start) / node_dt + 1e-9).floor().max(0.0) as usize;
        let k = s.min(h.nodes - 1);
        let boundary = if k + 1 < h.nodes { h.time(k + 1) } else { end };
        let next = boundary.min(end).max(t + 1e-12);
        x = bank.advance(&x, &plan.inputs[k], next - t);
        t = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loopshaping::InputShaping;
    use crate::lti::tf_eval;
    use crate::slq::Horizon;
    use nalgebra::dvector;

    fn bank(pairs: &[(f64, f64)]) -> FilterBank {
        let spec = ShapingSpec::new(
            pairs
                .iter()
                .map(|&(a, b)| InputShaping::new(a, b).unwrap())
                .collect(),
        )
        .unwrap();
        make_filter_bank(&spec).unwrap()
    }

    #[test]
    fn single_block_realization() {
        let b = bank(&[(0.01, 0.1)]);
        let r = b.realization();
        assert!((r.a[(0, 0)] + 10.0).abs() < 1e-12);
        assert!((r.b[(0, 0)] - 3.0).abs() < 1e-12);
        assert!((r.c[(0, 0)] - 3.0).abs() < 1e-12);
        assert!((r.d[(0, 0)] - 0.1).abs() < 1e-12);
        let inverse = RationalTransferFunction::lead_lag(0.1, 0.01)
            .unwrap()
            .inverse()
            .unwrap();
        for w in [0.0, 0.3, 10.0, 1e3] {
            let ss = r.freq_response(w).unwrap()[(0, 0)];
            let tf = tf_eval(&inverse, w).unwrap();
            assert!((ss - tf).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_and_two_block_banks() {
        let id = bank(&[(0.02, 0.02), (1.0, 1.0)]);
        assert_eq!(id.state_dim(), 0);
        assert!(id.is_identity());
        assert_eq!(id.realization().d, DMatrix::identity(2, 2));

        let two = bank(&[(0.01, 0.1), (0.002, 0.02)]);
        let r = two.realization();
        assert_eq!(two.state_dim(), 2);
        assert!((r.a[(0, 0)] + 10.0).abs() < 1e-12 && (r.a[(1, 1)] + 50.0).abs() < 1e-9);
        assert_eq!(r.a[(0, 1)], 0.0);
        assert!((r.d[(0, 0)] - 0.1).abs() < 1e-12 && (r.d[(1, 1)] - 0.1).abs() < 1e-12);
        // Each block matches its own first-order realization.
        for (i, &(a, b)) in [(0.01, 0.1), (0.002, 0.02)].iter().enumerate() {
            let s = RationalTransferFunction::lead_lag(a, b).unwrap();
            let w = 7.0;
            let g = r.freq_response(w).unwrap();
            assert!((g[(i, i)] - tf_eval(&s, w).unwrap()).norm() < 1e-12);
            assert!(g[(i, 1 - i)].norm() < 1e-15);
        }
    }

    #[test]
    fn recover_examples() {
        let id = bank(&[(1.0, 1.0)]);
        let u = recover_input(&id, &DVector::zeros(0), &dvector![2.5]).unwrap();
        assert_eq!(u, dvector![2.5]);
        let b = bank(&[(0.01, 0.1)]);
        assert!(
            (recover_input(&b, &dvector![1.0], &dvector![0.0]).unwrap()[0] - 3.0).abs() < 1e-12
        );
        assert!(
            (recover_input(&b, &dvector![0.0], &dvector![10.0]).unwrap()[0] - 1.0).abs() < 1e-12
        );
        assert!(recover_input(&b, &dvector![0.0, 1.0], &dvector![10.0]).is_err());
    }

    fn plan(nu: f64, duration: f64) -> Trajectory {
        let h = Horizon::new(0.0, duration, 10);
        Trajectory {
            horizon: h,
            states: vec![DVector::zeros(0); 11],
            inputs: vec![dvector![nu]; 10],
        }
    }

    #[test]
    fn propagation_examples() {
        let b = bank(&[(0.01, 0.1)]);
        let x = propagate_filter_state(&b, &dvector![1.0], &plan(0.0, 1.0), 0.0, 0.1).unwrap();
        assert!((x[0] - (-1.0f64).exp()).abs() < 1e-12);
        let x = propagate_filter_state(&b, &dvector![0.0], &plan(1.0, 10.0), 0.0, 10.0).unwrap();
        assert!((x[0] - 0.3).abs() < 1e-12);
        assert!((recover_input(&b, &x, &dvector![1.0]).unwrap()[0] - 1.0).abs() < 1e-12);
        assert!(propagate_filter_state(&b, &dvector![0.0], &plan(1.0, 1.0), 0.5, 1.0).is_err());

        let id = bank(&[(1.0, 1.0)]);
        let x = propagate_filter_state(&id, &DVector::zeros(0), &plan(1.0, 1.0), 0.0, 0.5).unwrap();
        assert_eq!(x.len(), 0);
    }

    #[test]
    fn steady_state_has_unit_dc_gain() {
        let b = bank(&[(0.01, 0.1), (0.5, 0.5), (0.002, 0.02)]);
        let u = dvector![1.5, -2.0, 73.575];
        let xs = b.steady_state(&u).unwrap();
        assert!(b.derivative(&xs, &u).amax() < 1e-12);
        assert!((recover_input(&b, &xs, &u).unwrap() - &u).amax() < 1e-12);
        let nu = b.auxiliary_for(&xs, &u, &DVector::zeros(3));
        assert!((nu - u).amax() < 1e-12);
    }
}
