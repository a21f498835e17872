//! Riccati recursion over the LQ approximation with equality-constraint
//! projection at each node.

use nalgebra::{DMatrix, DVector};

use super::SolverError;

/// LQ approximation at one node. Cost terms already include the `dt` weight.
#[derive(Debug, Clone)]
pub struct LqNode {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub lx: DVector<f64>,
    pub lu: DVector<f64>,
    pub lxx: DMatrix<f64>,
    pub luu: DMatrix<f64>,
    pub lux: DMatrix<f64>,
    /// Linearized equality `C δx + D δu + e = 0`.
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub e: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct LqData {
    pub nodes: Vec<LqNode>,
    pub terminal_gradient: DVector<f64>,
    pub terminal_hessian: DMatrix<f64>,
}

/// Predicted cost change `α·linear + α²·quadratic` for step size `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedDecrease {
    pub linear: f64,
    pub quadratic: f64,
}

impl ExpectedDecrease {
    pub fn at(&self, step: f64) -> f64 {
        step * self.linear + step * step * self.quadratic
    }
}

/// Affine policy update `δu = k + K δx`.
#[derive(Debug, Clone)]
pub struct PolicyUpdate {
    pub feedforward: Vec<DVector<f64>>,
    pub gains: Vec<DMatrix<f64>>,
    pub expected: ExpectedDecrease,
}

impl PolicyUpdate {
    pub fn max_feedforward(&self) -> f64 {
        self.feedforward
            .iter()
            .map(|k| k.amax())
            .fold(0.0, f64::max)
    }
}

fn check_rank(d: &DMatrix<f64>, node: usize) -> Result<(), SolverError> {
    if d.nrows() == 0 {
        return Ok(());
    }
    if d.nrows() > d.ncols() {
        return Err(SolverError::ConstraintDegeneracy { node });
    }
    let sv = d.clone().singular_values();
    let max = sv.max();
    if max == 0.0 || sv.min() <= 1e-9 * max.max(1.0) {
        return Err(SolverError::ConstraintDegeneracy { node });
    }
    Ok(())
}

pub fn backward_pass(lq: &LqData, regularization: f64) -> Result<PolicyUpdate, SolverError> {
    let len = lq.nodes.len();
    let mut vx = lq.terminal_gradient.clone();
    let mut vxx = lq.terminal_hessian.clone();
    let mut feedforward = vec![DVector::zeros(0); len];
    let mut gains = vec![DMatrix::zeros(0, 0); len];
    let mut expected = ExpectedDecrease {
        linear: 0.0,
        quadratic: 0.0,
    };

    for k in (0..len).rev() {
        let node = &lq.nodes[k];
        let m = node.b.ncols();
        let n = node.a.ncols();
        let r = node.d.nrows();
        check_rank(&node.d, k)?;

        let bt_vxx = node.b.transpose() * &vxx;
        let qx = &node.lx + node.a.transpose() * &vx;
        let qu = &node.lu + node.b.transpose() * &vx;
        let qxx = &node.lxx + node.a.transpose() * &vxx * &node.a;
        let quu = &node.luu + &bt_vxx * &node.b;
        let qux = &node.lux + &bt_vxx * &node.a;
        let quu = (&quu + quu.transpose()) * 0.5;

        let mut h = quu.clone();
        for i in 0..m {
            h[(i, i)] += regularization;
        }
        if h.clone().cholesky().is_none() {
            return Err(SolverError::NotPositiveDefinite { regularization });
        }

        let (kff, kfb) = if r == 0 {
            let chol = h.cholesky().expect("checked above");
            (-chol.solve(&qu), -chol.solve(&qux))
        } else {
            let mut kkt = DMatrix::zeros(m + r, m + r);
            kkt.view_mut((0, 0), (m, m)).copy_from(&h);
            kkt.view_mut((0, m), (m, r)).copy_from(&node.d.transpose());
            kkt.view_mut((m, 0), (r, m)).copy_from(&node.d);
            let mut rhs = DMatrix::zeros(m + r, 1 + n);
            rhs.view_mut((0, 0), (m, 1)).copy_from(&(-&qu));
            rhs.view_mut((0, 1), (m, n)).copy_from(&(-&qux));
            rhs.view_mut((m, 0), (r, 1)).copy_from(&(-&node.e));
            rhs.view_mut((m, 1), (r, n)).copy_from(&(-&node.c));
            let sol = kkt
                .lu()
                .solve(&rhs)
                .ok_or(SolverError::ConstraintDegeneracy { node: k })?;
            (
                sol.view((0, 0), (m, 1)).column(0).into_owned(),
                sol.view((0, 1), (m, n)).into_owned(),
            )
        };

        expected.linear += kff.dot(&qu);
        expected.quadratic += 0.5 * kff.dot(&(&quu * &kff));

        let kt = kfb.transpose();
        vx = qx + &kt * (&quu * &kff) + &kt * &qu + qux.transpose() * &kff;
        vxx = qxx + &kt * &quu * &kfb + &kt * &qux + qux.transpose() * &kfb;
        vxx = (&vxx + vxx.transpose()) * 0.5;

        feedforward[k] = kff;
        gains[k] = kfb;
    }

    Ok(PolicyUpdate {
        feedforward,
        gains,
        expected,
    })
}
