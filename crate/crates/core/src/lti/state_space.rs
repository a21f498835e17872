use nalgebra::{Complex, DMatrix};

use super::{LtiError, RationalTransferFunction};

/// Continuous-time realization `ẋ = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceRealization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpaceRealization {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self, LtiError> {
        let n = a.nrows();
        let consistent = a.ncols() == n
            && b.nrows() == n
            && c.ncols() == n
            && d.nrows() == c.nrows()
            && d.ncols() == b.ncols();
        if !consistent {
            return Err(LtiError::DimensionMismatch(format!(
                "A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// Memoryless system `y = Du`.
    pub fn static_gain(d: DMatrix<f64>) -> Self {
        let (p, m) = d.shape();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(p, 0),
            d,
        }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// `C(jωI − A)⁻¹B + D`.
    pub fn freq_response(&self, omega: f64) -> Result<DMatrix<Complex<f64>>, LtiError> {
        if !omega.is_finite() || omega < 0.0 {
            return Err(LtiError::InvalidFrequency(omega));
        }
        let d = self.d.map(|v| Complex::new(v, 0.0));
        let n = self.order();
        if n == 0 {
            return Ok(d);
        }
        let mut lhs = self.a.map(|v| Complex::new(-v, 0.0));
        for i in 0..n {
            lhs[(i, i)] += Complex::new(0.0, omega);
        }
        let b = self.b.map(|v| Complex::new(v, 0.0));
        let c = self.c.map(|v| Complex::new(v, 0.0));
        let lu = lhs.lu();
        let x = lu.solve(&b).ok_or(LtiError::EvaluationAtPole { omega })?;
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LtiError::EvaluationAtPole { omega });
        }
        Ok(c * x + d)
    }

    /// True when every eigenvalue of `A` has negative real part.
    pub fn is_hurwitz(&self) -> bool {
        self.order() == 0 || self.a.complex_eigenvalues().iter().all(|l| l.re < 0.0)
    }
}

pub fn ss_freq_response(
    ss: &StateSpaceRealization,
    omega: f64,
) -> Result<DMatrix<Complex<f64>>, LtiError> {
    ss.freq_response(omega)
}

/// Closed-form balanced realization of a stable biproper transfer function of
/// degree at most one.
///
/// For `(c₀ + c₁s)/(d₀ + d₁s)` the realization is `A = −d₀/d₁`, `D = c₁/d₁`,
/// `BC = (c₀ − D d₀)/d₁`, with `|B| = |C|` so both Gramians coincide. A
/// vanishing residue (pole/zero cancellation) yields the empty-state gain `D`.
pub fn balanced_first_order(
    tf: &RationalTransferFunction,
) -> Result<StateSpaceRealization, LtiError> {
    if !tf.is_proper() {
        return Err(LtiError::UnsupportedStructure(
            "improper transfer function".into(),
        ));
    }
    let num = tf.numerator();
    let den = tf.denominator();
    match tf.den_degree() {
        0 => Ok(StateSpaceRealization::static_gain(DMatrix::from_element(
            1,
            1,
            num[0] / den[0],
        ))),
        1 => {
            let (d0, d1) = (den[0], den[1]);
            let c0 = num[0];
            let c1 = num.get(1).copied().unwrap_or(0.0);
            if !tf.is_biproper() {
                return Err(LtiError::UnsupportedStructure(
                    "first-order filter must be biproper".into(),
                ));
            }
            let pole = -d0 / d1;
            if pole >= 0.0 {
                return Err(LtiError::UnsupportedStructure(format!(
                    "unstable pole at {pole}"
                )));
            }
            let feedthrough = c1 / d1;
            let residue = (c0 - feedthrough * d0) / d1;
            if residue == 0.0 {
                return Ok(StateSpaceRealization::static_gain(DMatrix::from_element(
                    1,
                    1,
                    feedthrough,
                )));
            }
            let root = residue.abs().sqrt();
            Ok(StateSpaceRealization {
                a: DMatrix::from_element(1, 1, pole),
                b: DMatrix::from_element(1, 1, root),
                c: DMatrix::from_element(1, 1, residue.signum() * root),
                d: DMatrix::from_element(1, 1, feedthrough),
            })
        }
        k => Err(LtiError::UnsupportedStructure(format!(
            "degree {k} realization not supported"
        ))),
    }
}
