//! Continuous-time algebraic Riccati equation and infinite-horizon LQR.
//!
//! The stabilizing solution is found with the scaled matrix-sign iteration on
//! the Hamiltonian, then polished with Newton–Kleinman steps until the
//! residual drops below `1e-10·(1 + ‖P‖)`.

use nalgebra::DMatrix;

use super::LtiError;

const SIGN_MAX_ITER: usize = 100;
const NEWTON_MAX_ITER: usize = 20;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LqrSolution {
    /// Feedback gain, `u = −Kx`.
    pub gain: DMatrix<f64>,
    /// Stabilizing Riccati solution.
    pub cost_to_go: DMatrix<f64>,
}

/// `AᵀP + PA − PBR⁻¹BᵀP + Q`.
pub fn are_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let r_inv_bt_p = r
        .clone()
        .cholesky()
        .map(|c| c.solve(&(b.transpose() * p)))
        .unwrap_or_else(|| DMatrix::from_element(b.ncols(), a.nrows(), f64::NAN));
    a.transpose() * p + p * a - p * b * r_inv_bt_p + q
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn matrix_sign(h: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let dim = h.nrows();
    let mut z = h.clone();
    for _ in 0..SIGN_MAX_ITER {
        let lu = z.clone().lu();
        let det = lu.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = lu.try_inverse()?;
        let scale = det.abs().powf(1.0 / dim as f64);
        let next = (&z / scale + &inv * scale) * 0.5;
        let change = max_abs(&(&next - &z));
        z = next;
        if !z.iter().all(|v| v.is_finite()) {
            return None;
        }
        if change <= 1e-13 * (1.0 + max_abs(&z)) {
            return Some(z);
        }
    }
    None
}

/// Solve `AᵀX + XA = −M` through the Kronecker form. Intended for small `n`.
fn lyapunov(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let at = a.transpose();
    let mut big = DMatrix::zeros(n * n, n * n);
    // Column-major vec: vec(AᵀX) = (I ⊗ Aᵀ) vec X, vec(XA) = (Aᵀ ⊗ I) vec X.
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for k in 0..n {
                big[(row, j * n + k)] += at[(i, k)];
                big[(row, k * n + i)] += a[(k, j)];
            }
        }
    }
    let rhs = DMatrix::from_iterator(n * n, 1, m.iter().map(|v| -v));
    let sol = big.lu().solve(&rhs)?;
    Some(DMatrix::from_iterator(n, n, sol.iter().copied()))
}

fn is_stable(m: &DMatrix<f64>) -> bool {
    m.nrows() == 0 || m.complex_eigenvalues().iter().all(|l| l.re < 0.0)
}

/// Continuous-time LQR gain for `ẋ = Ax + Bu` with cost `∫ xᵀQx + uᵀRu dt`.
pub fn lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<LqrSolution, LtiError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(LtiError::DimensionMismatch(format!(
            "A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let r_chol = symmetrize(r)
        .cholesky()
        .ok_or_else(|| LtiError::Synthesis("R is not positive definite".into()))?;
    let q = symmetrize(q);
    let q_min = q.clone().symmetric_eigen().eigenvalues.min();
    if n > 0 && q_min < -1e-12 * (1.0 + max_abs(&q)) {
        return Err(LtiError::Synthesis("Q is not positive semidefinite".into()));
    }
    if n == 0 {
        return Ok(LqrSolution {
            gain: DMatrix::zeros(m, 0),
            cost_to_go: DMatrix::zeros(0, 0),
        });
    }

    let g = b * r_chol.solve(&b.transpose());
    let mut ham = DMatrix::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(a);
    ham.view_mut((0, n), (n, n)).copy_from(&(-&g));
    ham.view_mut((n, 0), (n, n)).copy_from(&(-&q));
    ham.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let sign = matrix_sign(&ham).ok_or_else(|| {
        LtiError::Synthesis("Hamiltonian has eigenvalues on the imaginary axis".into())
    })?;
    let w11 = sign.view((0, 0), (n, n));
    let w12 = sign.view((0, n), (n, n));
    let w21 = sign.view((n, 0), (n, n));
    let w22 = sign.view((n, n), (n, n));
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w22 + DMatrix::identity(n, n)));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w11 + DMatrix::identity(n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    let mut p = symmetrize(
        &lhs.svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| LtiError::Synthesis(e.to_string()))?,
    );

    for _ in 0..NEWTON_MAX_ITER {
        let res = are_residual(a, b, &q, r, &p);
        if max_abs(&res) <= RESIDUAL_TOL * (1.0 + max_abs(&p)) {
            break;
        }
        let k = r_chol.solve(&(b.transpose() * &p));
        let closed = a - b * &k;
        if !is_stable(&closed) {
            break;
        }
        let m_rhs = &q + k.transpose() * r * &k;
        match lyapunov(&closed, &m_rhs) {
            Some(next) => p = symmetrize(&next),
            None => break,
        }
    }

    if !p.iter().all(|v| v.is_finite()) {
        return Err(LtiError::Synthesis("non-finite Riccati solution".into()));
    }
    let gain = r_chol.solve(&(b.transpose() * &p));
    if !is_stable(&(a - b * &gain)) {
        return Err(LtiError::Synthesis(
            "pair (A, B) is not stabilizable".into(),
        ));
    }
    Ok(LqrSolution {
        gain,
        cost_to_go: p,
    })
}
