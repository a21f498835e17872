use nalgebra::{Complex, DMatrix};

use super::{lqr_gain, LtiError, StateSpaceRealization};
use crate::loopshaping::{make_filter_bank, ShapingSpec};

/// Sampled loop gain and the robust-stability margin `σ̲[I + GK(jω)⁻¹]`.
#[derive(Debug, Clone)]
pub struct LoopAnalysis {
    pub frequencies: Vec<f64>,
    pub loop_gain: Vec<DMatrix<Complex<f64>>>,
    /// `None` where the loop gain sample is singular.
    pub margin: Vec<Option<f64>>,
}

impl LoopAnalysis {
    /// Largest singular value of each loop-gain sample (the magnitude for SISO loops).
    pub fn gain_magnitudes(&self) -> Vec<f64> {
        self.loop_gain
            .iter()
            .map(|g| {
                if g.shape() == (1, 1) {
                    g[(0, 0)].norm()
                } else {
                    g.clone().singular_values().max()
                }
            })
            .collect()
    }

    /// True when `bound(ω) < margin(ω)` at every sample with a defined margin.
    pub fn tolerates(&self, bound: impl Fn(f64) -> f64) -> bool {
        self.frequencies
            .iter()
            .zip(&self.margin)
            .all(|(&w, m)| m.is_none_or(|m| bound(w) < m))
    }
}

/// `count` log-spaced frequencies over `[lo, hi]` rad/s.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

/// 200 points over `[1e-2, 1e4]` rad/s.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-2, 1e4, 200)
}

fn margin_of(gk: &DMatrix<Complex<f64>>) -> Option<f64> {
    if gk.shape() == (1, 1) {
        let g = gk[(0, 0)];
        if g.norm() == 0.0 {
            return None;
        }
        return Some((Complex::new(1.0, 0.0) + g.inv()).norm());
    }
    let inv = gk.clone().try_inverse()?;
    let n = gk.nrows();
    let ret = DMatrix::<Complex<f64>>::identity(n, n) + inv;
    Some(ret.singular_values().min())
}

/// Robust-stability margin of sampled loop gains.
pub fn stability_margin(
    frequencies: &[f64],
    loop_gain: Vec<DMatrix<Complex<f64>>>,
) -> Result<LoopAnalysis, LtiError> {
    if frequencies.len() != loop_gain.len() {
        return Err(LtiError::DimensionMismatch(format!(
            "{} frequencies vs {} samples",
            frequencies.len(),
            loop_gain.len()
        )));
    }
    if frequencies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LtiError::InvalidGrid);
    }
    if loop_gain.iter().any(|g| !g.is_square()) {
        return Err(LtiError::DimensionMismatch(
            "loop gain must be square".into(),
        ));
    }
    let margin = loop_gain.iter().map(margin_of).collect();
    Ok(LoopAnalysis {
        frequencies: frequencies.to_vec(),
        loop_gain,
        margin,
    })
}

fn resolvent_times(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    omega: f64,
) -> Result<DMatrix<Complex<f64>>, LtiError> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    let mut lhs = a.map(|v| Complex::new(-v, 0.0));
    for i in 0..n {
        lhs[(i, i)] += Complex::new(0.0, omega);
    }
    lhs.lu()
        .solve(&b.map(|v| Complex::new(v, 0.0)))
        .ok_or(LtiError::EvaluationAtPole { omega })
}

fn cplx(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|v| Complex::new(v, 0.0))
}

/// Compare the input-broken loop gain of the plain LQR design against the
/// design obtained on the filter-augmented plant.
///
/// The shaped controller is the dynamic compensator formed by the augmented
/// LQR gain `[Kₓ K_s]` and the inverse filter; its loop gain at the original
/// input is `S(jω)(1 + K_s(jωI − A_s)⁻¹B_s)⁻¹ Kₓ(jωI − A)⁻¹B`.
pub fn loop_gain_compare(
    plant: &StateSpaceRealization,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    spec: &ShapingSpec,
    frequencies: &[f64],
) -> Result<(LoopAnalysis, LoopAnalysis), LtiError> {
    if plant.inputs() != 1 || spec.len() != 1 {
        return Err(LtiError::DimensionMismatch(
            "loop comparison is defined for single-input plants".into(),
        ));
    }
    let n = plant.order();
    let baseline = lqr_gain(&plant.a, &plant.b, q, r)?;

    let bank = make_filter_bank(spec).map_err(|e| LtiError::UnsupportedStructure(e.to_string()))?;
    let fs = bank.realization();
    let ns = fs.order();
    let mut a_aug = DMatrix::zeros(n + ns, n + ns);
    a_aug.view_mut((0, 0), (n, n)).copy_from(&plant.a);
    a_aug
        .view_mut((0, n), (n, ns))
        .copy_from(&(&plant.b * &fs.c));
    a_aug.view_mut((n, n), (ns, ns)).copy_from(&fs.a);
    let mut b_aug = DMatrix::zeros(n + ns, 1);
    b_aug
        .view_mut((0, 0), (n, 1))
        .copy_from(&(&plant.b * &fs.d));
    b_aug.view_mut((n, 0), (ns, 1)).copy_from(&fs.b);
    let mut q_aug = DMatrix::zeros(n + ns, n + ns);
    q_aug.view_mut((0, 0), (n, n)).copy_from(q);
    let shaped = lqr_gain(&a_aug, &b_aug, &q_aug, r)?;
    let k_x = shaped.gain.columns(0, n).into_owned();
    let k_s = shaped.gain.columns(n, ns).into_owned();

    let mut base_samples = Vec::with_capacity(frequencies.len());
    let mut shaped_samples = Vec::with_capacity(frequencies.len());
    for &w in frequencies {
        let gx = resolvent_times(&plant.a, &plant.b, w)?;
        base_samples.push(cplx(&baseline.gain) * &gx);
        let filt = resolvent_times(&fs.a, &fs.b, w)?;
        let s = cplx(&fs.c) * &filt + cplx(&fs.d);
        let ret = Complex::new(1.0, 0.0) + (cplx(&k_s) * &filt)[(0, 0)];
        if ret.norm() == 0.0 {
            return Err(LtiError::EvaluationAtPole { omega: w });
        }
        shaped_samples.push((s * (cplx(&k_x) * &gx)).map(|z| z / ret));
    }
    Ok((
        stability_margin(frequencies, base_samples)?,
        stability_margin(frequencies, shaped_samples)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loopshaping::InputShaping;
    use nalgebra::dmatrix;

    fn c(re: f64, im: f64) -> DMatrix<Complex<f64>> {
        DMatrix::from_element(1, 1, Complex::new(re, im))
    }

    #[test]
    fn scalar_margins() {
        let la = stability_margin(&[1.0, 2.0], vec![c(1.0, 0.0), c(-0.5, 0.0)]).unwrap();
        assert_eq!(la.margin[0], Some(2.0));
        assert_eq!(la.margin[1], Some(1.0));
    }

    #[test]
    fn diagonal_margin_is_min_over_channels() {
        let mut g = DMatrix::zeros(2, 2);
        g[(0, 0)] = Complex::new(2.0, 0.0);
        g[(1, 1)] = Complex::new(-0.5, 0.1);
        let la = stability_margin(&[1.0], vec![g]).unwrap();
        let ch0: f64 = (Complex::new(1.0, 0.0) + Complex::new(2.0, 0.0).inv()).norm();
        let ch1 = (Complex::new(1.0, 0.0) + Complex::new(-0.5, 0.1).inv()).norm();
        let m = la.margin[0].unwrap();
        assert!((m - ch0.min(ch1)).abs() < 1e-12, "{m} vs {}", ch0.min(ch1));
    }

    #[test]
    fn singular_sample_is_undefined() {
        let la = stability_margin(&[1.0, 2.0], vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(la.margin[0], None);
        assert!(la.tolerates(|_| 1.5));
        assert!(!la.tolerates(|_| 2.5));
    }

    #[test]
    fn grid_must_increase() {
        assert!(matches!(
            stability_margin(&[2.0, 1.0], vec![c(1.0, 0.0), c(1.0, 0.0)]),
            Err(LtiError::InvalidGrid)
        ));
    }

    #[test]
    fn identity_filter_reproduces_baseline() {
        let plant = StateSpaceRealization::new(
            dmatrix![0.0, 1.0; 0.0, 0.0],
            dmatrix![0.0; 1.0],
            dmatrix![1.0, 0.0],
            dmatrix![0.0],
        )
        .unwrap();
        let spec = ShapingSpec::new(vec![InputShaping::unshaped()]).unwrap();
        let grid = default_grid();
        let (base, shaped) = loop_gain_compare(
            &plant,
            &DMatrix::identity(2, 2),
            &dmatrix![1.0],
            &spec,
            &grid,
        )
        .unwrap();
        for (b, s) in base.gain_magnitudes().iter().zip(shaped.gain_magnitudes()) {
            assert!((b - s).abs() <= 1e-9 * b);
        }
    }

    #[test]
    fn grid_endpoints() {
        let g = default_grid();
        assert_eq!(g.len(), 200);
        assert!((g[0] - 1e-2).abs() < 1e-15);
        assert!((g[199] - 1e4).abs() < 1e-9);
    }
}
