use nalgebra::{DMatrix, DVector};

use super::ocp::{ConstraintJacobians, CostExpansion, Horizon, InputCost, OcpDefinition};

/// `ẋ = Ax + Bu` with cost `∫ ½xᵀQx + ½uᵀRu dt + ½x(T)ᵀQ_T x(T)` and an
/// optional time-invariant equality `Cx + Du + e = 0`.
#[derive(Debug, Clone)]
pub struct LinearQuadraticOcp {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q_terminal: DMatrix<f64>,
    pub horizon: Horizon,
    pub equality: Option<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)>,
}

impl LinearQuadraticOcp {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        q_terminal: DMatrix<f64>,
        horizon: Horizon,
    ) -> Self {
        Self {
            a,
            b,
            q,
            r,
            q_terminal,
            horizon,
            equality: None,
        }
    }

    pub fn with_equality(mut self, c: DMatrix<f64>, d: DMatrix<f64>, e: DVector<f64>) -> Self {
        self.equality = Some((c, d, e));
        self
    }
}

impl OcpDefinition for LinearQuadraticOcp {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    fn horizon(&self) -> Horizon {
        self.horizon
    }

    fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    fn dynamics_jacobians(
        &self,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
        _t: f64,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        Some((self.a.clone(), self.b.clone()))
    }

    fn state_cost(&self, x: &DVector<f64>, _t: f64) -> f64 {
        0.5 * x.dot(&(&self.q * x))
    }

    fn state_cost_expansion(&self, x: &DVector<f64>, _t: f64) -> Option<CostExpansion> {
        Some(CostExpansion {
            gradient: &self.q * x,
            hessian: self.q.clone(),
        })
    }

    fn input_cost(&self, _t: f64) -> InputCost {
        InputCost {
            weight: self.r.clone(),
            reference: DVector::zeros(self.b.ncols()),
        }
    }

    fn terminal_cost(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q_terminal * x))
    }

    fn terminal_cost_expansion(&self, x: &DVector<f64>) -> Option<CostExpansion> {
        Some(CostExpansion {
            gradient: &self.q_terminal * x,
            hessian: self.q_terminal.clone(),
        })
    }

    fn equality_constraints(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> DVector<f64> {
        match &self.equality {
            Some((c, d, e)) => c * x + d * u + e,
            None => DVector::zeros(0),
        }
    }

    fn equality_jacobians(
        &self,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
        _t: f64,
    ) -> Option<ConstraintJacobians> {
        self.equality.as_ref().map(|(c, d, _)| ConstraintJacobians {
            state: c.clone(),
            input: d.clone(),
        })
    }
}
