use nalgebra::Complex;

use super::LtiError;

/// SISO rational transfer function in the Laplace variable, evaluated on the
/// imaginary axis.
///
/// Coefficients are stored in ascending powers: `num[k]` multiplies `s^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

fn trim(mut coeffs: Vec<f64>) -> Vec<f64> {
    while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
        coeffs.pop();
    }
    coeffs
}

fn poly_at(coeffs: &[f64], s: Complex<f64>) -> Complex<f64> {
    coeffs
        .iter()
        .rev()
        .fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c)
}

impl RationalTransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self, LtiError> {
        if num.is_empty() || den.is_empty() {
            return Err(LtiError::InvalidTransferFunction(
                "empty coefficient list".into(),
            ));
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(LtiError::InvalidTransferFunction(
                "non-finite coefficient".into(),
            ));
        }
        let num = trim(num);
        let den = trim(den);
        if den.iter().all(|&c| c == 0.0) {
            return Err(LtiError::InvalidTransferFunction(
                "denominator is identically zero".into(),
            ));
        }
        if den[0] == 0.0 {
            return Err(LtiError::InvalidTransferFunction(
                "denominator constant coefficient must be nonzero".into(),
            ));
        }
        Ok(Self { num, den })
    }

    /// The static gain `1/1`.
    pub fn identity() -> Self {
        Self {
            num: vec![1.0],
            den: vec![1.0],
        }
    }

    /// `(1 + lead·s) / (1 + lag·s)`.
    pub fn lead_lag(lead: f64, lag: f64) -> Result<Self, LtiError> {
        Self::new(vec![1.0, lead], vec![1.0, lag])
    }

    pub fn numerator(&self) -> &[f64] {
        &self.num
    }

    pub fn denominator(&self) -> &[f64] {
        &self.den
    }

    pub fn num_degree(&self) -> usize {
        if self.num.iter().all(|&c| c == 0.0) {
            0
        } else {
            self.num.len() - 1
        }
    }

    pub fn den_degree(&self) -> usize {
        self.den.len() - 1
    }

    pub fn is_proper(&self) -> bool {
        self.num_degree() <= self.den_degree()
    }

    /// Relative degree zero.
    pub fn is_biproper(&self) -> bool {
        self.num_degree() == self.den_degree() && self.num.last().is_some_and(|&c| c != 0.0)
    }

    /// Reciprocal `den/num`. Fails when the numerator has a zero constant term.
    pub fn inverse(&self) -> Result<Self, LtiError> {
        Self::new(self.den.clone(), self.num.clone())
    }

    /// Evaluate at `s = jω`.
    pub fn eval(&self, omega: f64) -> Result<Complex<f64>, LtiError> {
        if !omega.is_finite() || omega < 0.0 {
            return Err(LtiError::InvalidFrequency(omega));
        }
        let s = Complex::new(0.0, omega);
        let den = poly_at(&self.den, s);
        let scale: f64 = self
            .den
            .iter()
            .enumerate()
            .map(|(k, c)| c.abs() * omega.powi(k as i32))
            .sum();
        if den.norm() <= f64::EPSILON * scale {
            return Err(LtiError::EvaluationAtPole { omega });
        }
        Ok(poly_at(&self.num, s) / den)
    }
}

/// `num(jω)/den(jω)`.
pub fn tf_eval(tf: &RationalTransferFunction, omega: f64) -> Result<Complex<f64>, LtiError> {
    tf.eval(omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dc_gain_of_lead_lag_is_one() {
        let r = RationalTransferFunction::lead_lag(0.1, 0.01).unwrap();
        let v = r.eval(0.0).unwrap();
        assert_eq!(v, Complex::new(1.0, 0.0));
    }

    #[test]
    fn high_frequency_power_ratio() {
        let r = RationalTransferFunction::lead_lag(0.1, 0.01).unwrap();
        let mag2 = r.eval(1e6).unwrap().norm_sqr();
        assert!((mag2 - 100.0).abs() / 100.0 < 1e-3, "{mag2}");
    }

    #[test]
    fn value_at_ten_rad_per_second() {
        let r = RationalTransferFunction::lead_lag(0.1, 0.01).unwrap();
        let v = r.eval(10.0).unwrap();
        // Direct complex arithmetic.
        let expected = Complex::new(1.0, 1.0) / Complex::new(1.0, 0.1);
        assert_relative_eq!(v.re, expected.re, epsilon = 1e-15);
        assert_relative_eq!(v.im, expected.im, epsilon = 1e-15);
        assert_relative_eq!(v.norm(), 2.0f64.sqrt() / 1.01f64.sqrt(), epsilon = 1e-12);
        assert!((v.norm() - 1.40720).abs() < 1e-5);
    }

    #[test]
    fn pole_on_imaginary_axis_is_rejected() {
        // 1 / (1 + s^2) has poles at ±j.
        let tf = RationalTransferFunction::new(vec![1.0], vec![1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            tf.eval(1.0),
            Err(LtiError::EvaluationAtPole { .. })
        ));
        assert!(tf.eval(2.0).is_ok());
    }

    #[test]
    fn structure_predicates() {
        let r = RationalTransferFunction::lead_lag(0.1, 0.01).unwrap();
        assert!(r.is_proper() && r.is_biproper());
        let deriv = RationalTransferFunction::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        assert!(!deriv.is_proper());
        let trailing = RationalTransferFunction::new(vec![1.0, 0.0], vec![2.0, 0.0]).unwrap();
        assert_eq!(trailing.numerator(), &[1.0]);
        assert_eq!(trailing.den_degree(), 0);
        assert!(RationalTransferFunction::new(vec![1.0], vec![0.0, 1.0]).is_err());
        assert!(r.eval(-1.0).is_err());
    }
}
