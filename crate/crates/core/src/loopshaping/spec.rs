use crate::lti::RationalTransferFunction;

use super::ShapingError;

/// Shaping function `r(ω) = (1 + β jω)/(1 + α jω)` of one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputShaping {
    /// Zero of the inverse filter (s).
    pub alpha: f64,
    /// Pole of the inverse filter (s).
    pub beta: f64,
}

impl InputShaping {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ShapingError> {
        let s = Self { alpha, beta };
        s.validate()?;
        Ok(s)
    }

    /// `α = β`, i.e. `r ≡ 1`.
    pub fn unshaped() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    /// Shaping with corner `β⁻¹` rad/s and `α = 0.1β`; an infinite corner
    /// means unshaped.
    pub fn from_cutoff(beta_inv: f64) -> Result<Self, ShapingError> {
        Self::from_cutoff_with_ratio(beta_inv, 0.1)
    }

    /// Corner `β⁻¹` rad/s with `α = ratio·β`.
    pub fn from_cutoff_with_ratio(beta_inv: f64, ratio: f64) -> Result<Self, ShapingError> {
        if beta_inv == f64::INFINITY {
            return Ok(Self::unshaped());
        }
        if !(beta_inv.is_finite() && beta_inv > 0.0) {
            return Err(ShapingError::InvalidSpec(format!(
                "cutoff must be positive, got {beta_inv}"
            )));
        }
        let beta = 1.0 / beta_inv;
        Self::new(ratio * beta, beta)
    }

    pub fn is_shaped(&self) -> bool {
        self.alpha < self.beta
    }

    fn validate(&self) -> Result<(), ShapingError> {
        let ok = self.alpha.is_finite()
            && self.beta.is_finite()
            && self.alpha >= 0.0
            && self.beta > 0.0
            && self.alpha <= self.beta;
        if ok {
            Ok(())
        } else {
            Err(ShapingError::InvalidSpec(format!(
                "need 0 ≤ α ≤ β and β > 0, got α = {}, β = {}",
                self.alpha, self.beta
            )))
        }
    }
}

/// Per-input shaping functions of an OCP.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingSpec {
    inputs: Vec<InputShaping>,
}

impl ShapingSpec {
    pub fn new(inputs: Vec<InputShaping>) -> Result<Self, ShapingError> {
        for s in &inputs {
            s.validate()?;
        }
        Ok(Self { inputs })
    }

    pub fn unshaped(m: usize) -> Self {
        Self {
            inputs: vec![InputShaping::unshaped(); m],
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[InputShaping] {
        &self.inputs
    }

    pub fn shaped_count(&self) -> usize {
        self.inputs.iter().filter(|s| s.is_shaped()).count()
    }
}

/// The shaping function of input `i`; unshaped inputs give `1/1`.
pub fn make_r_filter(
    spec: &ShapingSpec,
    i: usize,
) -> Result<RationalTransferFunction, ShapingError> {
    let s = spec
        .inputs
        .get(i)
        .ok_or_else(|| ShapingError::DimensionMismatch(format!("input {i} of {}", spec.len())))?;
    s.validate()?;
    if !s.is_shaped() {
        return Ok(RationalTransferFunction::identity());
    }
    Ok(RationalTransferFunction::lead_lag(s.beta, s.alpha)?)
}
