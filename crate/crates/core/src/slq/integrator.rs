//! Classical fourth-order Runge–Kutta steps and their exact derivatives.
//!
//! The input applied at each stage may follow a path `u(τ)` that is affine in
//! a set of decision variables `z`; the path is described by its values and
//! Jacobians `∂u/∂z` at `τ ∈ {0, h/2, h}`. A constant input is the special
//! case `u(τ) = z`.

use nalgebra::{DMatrix, DVector};

use super::ocp::StepLinearization;

/// Input values and sensitivities at the three distinct RK4 stage times.
pub struct InputPath<'a> {
    pub start: &'a DVector<f64>,
    pub mid: &'a DVector<f64>,
    pub end: &'a DVector<f64>,
    /// `∂u/∂z` at each stage time; `None` means identity.
    pub maps: Option<[&'a DMatrix<f64>; 3]>,
}

pub fn rk4_step(
    f: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64>,
    x: &DVector<f64>,
    u: &DVector<f64>,
    t: f64,
    h: f64,
) -> DVector<f64> {
    rk4_path_step(
        f,
        x,
        &InputPath {
            start: u,
            mid: u,
            end: u,
            maps: None,
        },
        t,
        h,
    )
}

pub fn rk4_path_step(
    f: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64>,
    x: &DVector<f64>,
    path: &InputPath<'_>,
    t: f64,
    h: f64,
) -> DVector<f64> {
    let k1 = f(x, path.start, t);
    let k2 = f(&(x + &k1 * (0.5 * h)), path.mid, t + 0.5 * h);
    let k3 = f(&(x + &k2 * (0.5 * h)), path.mid, t + 0.5 * h);
    let k4 = f(&(x + &k3 * h), path.end, t + h);
    x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

pub fn rk4_linearization(
    f: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64>,
    jac: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> (DMatrix<f64>, DMatrix<f64>),
    x: &DVector<f64>,
    u: &DVector<f64>,
    t: f64,
    h: f64,
) -> StepLinearization {
    rk4_path_linearization(
        f,
        jac,
        x,
        &InputPath {
            start: u,
            mid: u,
            end: u,
            maps: None,
        },
        t,
        h,
    )
}

/// RK4 step together with `∂x⁺/∂x` and `∂x⁺/∂z`.
pub fn rk4_path_linearization(
    f: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64>,
    jac: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> (DMatrix<f64>, DMatrix<f64>),
    x: &DVector<f64>,
    path: &InputPath<'_>,
    t: f64,
    h: f64,
) -> StepLinearization {
    let n = x.len();
    let through = |b: DMatrix<f64>, stage: usize| match path.maps {
        Some(maps) => b * maps[stage],
        None => b,
    };
    let eye = DMatrix::<f64>::identity(n, n);

    let x1 = x;
    let k1 = f(x1, path.start, t);
    let (a1, b1) = jac(x1, path.start, t);
    let dk1_dx = a1;
    let dk1_dz = through(b1, 0);

    let x2 = x + &k1 * (0.5 * h);
    let k2 = f(&x2, path.mid, t + 0.5 * h);
    let (a2, b2) = jac(&x2, path.mid, t + 0.5 * h);
    let dk2_dx = &a2 * (&eye + &dk1_dx * (0.5 * h));
    let dk2_dz = &a2 * &dk1_dz * (0.5 * h) + through(b2, 1);

    let x3 = x + &k2 * (0.5 * h);
    let k3 = f(&x3, path.mid, t + 0.5 * h);
    let (a3, b3) = jac(&x3, path.mid, t + 0.5 * h);
    let dk3_dx = &a3 * (&eye + &dk2_dx * (0.5 * h));
    let dk3_dz = &a3 * &dk2_dz * (0.5 * h) + through(b3, 1);

    let x4 = x + &k3 * h;
    let k4 = f(&x4, path.end, t + h);
    let (a4, b4) = jac(&x4, path.end, t + h);
    let dk4_dx = &a4 * (&eye + &dk3_dx * h);
    let dk4_dz = &a4 * &dk3_dz * h + through(b4, 2);

    let c = h / 6.0;
    let next = x + (k1 + (&k2 + &k3) * 2.0 + k4) * c;
    let a = eye + (dk1_dx + (dk2_dx + dk3_dx) * 2.0 + dk4_dx) * c;
    let b = (dk1_dz + (dk2_dz + dk3_dz) * 2.0 + dk4_dz) * c;
    StepLinearization { next, a, b }
}
