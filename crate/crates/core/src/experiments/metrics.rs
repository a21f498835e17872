use nalgebra::DVector;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::ExperimentError;
use crate::quadruped::{Leg, POSITION};
use crate::runtime::EpisodeLog;

/// Force-tracking and base-height summary of one episode window.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// MAE (N) and MSE (N²) per leg, averaged over the xyz components.
    pub legs: [(f64, f64); 4],
    /// Mean of the per-leg values.
    pub mae: f64,
    pub mse: f64,
    /// Fraction of power above a cutoff, when a study computes one.
    pub high_frequency_fraction: Option<f64>,
    pub base_height_min: f64,
    pub base_height_max: f64,
    /// Commanded forward speed at failure (ramp studies).
    pub failure_speed: Option<f64>,
}

/// Commanded against realized contact forces of the samples in `[from, to]`.
pub fn episode_metrics(
    log: &EpisodeLog,
    from: f64,
    to: f64,
) -> Result<MetricsReport, ExperimentError> {
    let window: Vec<_> = log
        .samples
        .iter()
        .filter(|s| s.time >= from - 1e-9 && s.time <= to + 1e-9)
        .collect();
    let times: Vec<f64> = window.iter().map(|s| s.time).collect();
    let desired: Vec<DVector<f64>> = window.iter().map(|s| s.commanded.clone()).collect();
    let measured: Vec<DVector<f64>> = window.iter().map(|s| s.realized.clone()).collect();
    let mut legs = [(0.0, 0.0); 4];
    for leg in Leg::ALL {
        let i = leg as usize;
        legs[i] = vector_mae_mse(&times, &desired, &measured, &[3 * i, 3 * i + 1, 3 * i + 2])?;
    }
    let heights = window.iter().map(|s| s.state[POSITION + 2]);
    Ok(MetricsReport {
        mae: legs.iter().map(|l| l.0).sum::<f64>() / 4.0,
        mse: legs.iter().map(|l| l.1).sum::<f64>() / 4.0,
        legs,
        high_frequency_fraction: None,
        base_height_min: heights.clone().fold(f64::INFINITY, f64::min),
        base_height_max: heights.fold(f64::NEG_INFINITY, f64::max),
        failure_speed: None,
    })
}

/// Time-averaged absolute and squared error of two aligned scalar series,
/// integrated with the trapezoidal rule over `[times[0], times[n-1]]`.
pub fn metrics_mae_mse(
    times: &[f64],
    desired: &[f64],
    measured: &[f64],
) -> Result<(f64, f64), ExperimentError> {
    check_alignment(times, desired.len(), measured.len())?;
    let e: Vec<f64> = desired.iter().zip(measured).map(|(d, m)| m - d).collect();
    let span = times[times.len() - 1] - times[0];
    let (mut abs, mut sq) = (0.0, 0.0);
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        abs += 0.5 * h * (e[k - 1].abs() + e[k].abs());
        sq += 0.5 * h * (e[k - 1] * e[k - 1] + e[k] * e[k]);
    }
    Ok((abs / span, sq / span))
}

/// Vector-series metrics: the mean over `components` of the scalar metrics.
pub fn vector_mae_mse(
    times: &[f64],
    desired: &[DVector<f64>],
    measured: &[DVector<f64>],
    components: &[usize],
) -> Result<(f64, f64), ExperimentError> {
    check_alignment(times, desired.len(), measured.len())?;
    if components.is_empty() {
        return Err(ExperimentError::Metric("no components selected".into()));
    }
    let (mut mae, mut mse) = (0.0, 0.0);
    for &c in components {
        let column = |s: &[DVector<f64>]| -> Result<Vec<f64>, ExperimentError> {
            s.iter()
                .map(|v| {
                    v.get(c).copied().ok_or_else(|| {
                        ExperimentError::Metric(format!("component {c} out of range"))
                    })
                })
                .collect()
        };
        let (a, b) = metrics_mae_mse(times, &column(desired)?, &column(measured)?)?;
        mae += a;
        mse += b;
    }
    let n = components.len() as f64;
    Ok((mae / n, mse / n))
}

fn check_alignment(times: &[f64], a: usize, b: usize) -> Result<(), ExperimentError> {
    if a != times.len() || b != times.len() {
        return Err(ExperimentError::Metric(format!(
            "misaligned series: {} times, {a} desired, {b} measured samples",
            times.len()
        )));
    }
    if times.len() < 2 {
        return Err(ExperimentError::Metric("need at least two samples".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ExperimentError::Metric("times must increase".into()));
    }
    Ok(())
}

/// Fraction of the mean-removed, Hann-windowed periodogram power at
/// frequencies at or above `cutoff` (rad/s). A constant series gives 0.
pub fn spectral_power_above(
    series: &[f64],
    sample_rate: f64,
    cutoff: f64,
) -> Result<f64, ExperimentError> {
    let n = series.len();
    if n < 2 {
        return Err(ExperimentError::Metric("need at least two samples".into()));
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(ExperimentError::Metric(format!(
            "invalid sample rate {sample_rate}"
        )));
    }
    let nyquist = std::f64::consts::PI * sample_rate;
    if !(cutoff >= 0.0) || cutoff > nyquist {
        return Err(ExperimentError::Metric(format!(
            "cutoff {cutoff} rad/s outside [0, {nyquist}] rad/s"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos();
            Complex::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (mut total, mut above) = (0.0, 0.0);
    for (k, z) in buf.iter().enumerate().take(n / 2 + 1) {
        // One-sided spectrum: interior bins stand for their mirror too.
        let weight = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
        let p = weight * z.norm_sqr();
        total += p;
        let omega = 2.0 * std::f64::consts::PI * k as f64 * sample_rate / n as f64;
        if omega >= cutoff {
            above += p;
        }
    }
    // Rounding noise of a constant series carries no power.
    let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if total <= (1e-12 * scale).powi(2) * n as f64 {
        return Ok(0.0);
    }
    Ok(above / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn mae_mse_closed_forms() {
        let t = grid(1001, 0.002);
        let d: Vec<f64> = t.iter().map(|t| (3.0 * t).sin() * 40.0).collect();
        assert_eq!(metrics_mae_mse(&t, &d, &d).unwrap(), (0.0, 0.0));

        let m: Vec<f64> = d.iter().map(|v| v + 5.0).collect();
        let (mae, mse) = metrics_mae_mse(&t, &d, &m).unwrap();
        assert!((mae - 5.0).abs() < 1e-9);
        assert!((mse - 25.0).abs() < 1e-9);

        // Two whole periods of a sinusoid of amplitude 7.
        let a = 7.0;
        let t = grid(4001, 2.0 / 4000.0);
        let zero = vec![0.0; t.len()];
        let s: Vec<f64> = t.iter().map(|t| a * (2.0 * PI * t).sin()).collect();
        let (mae, mse) = metrics_mae_mse(&t, &zero, &s).unwrap();
        assert!((mae - 2.0 * a / PI).abs() <= 1e-3 * 2.0 * a / PI, "{mae}");
        assert!((mse - a * a / 2.0).abs() <= 1e-3 * a * a / 2.0, "{mse}");
    }

    #[test]
    fn vector_metrics_average_components() {
        let t = grid(11, 0.1);
        let d = vec![DVector::from_vec(vec![0.0, 0.0, 0.0]); 11];
        let m = vec![DVector::from_vec(vec![1.0, 3.0, 100.0]); 11];
        let (mae, mse) = vector_mae_mse(&t, &d, &m, &[0, 1]).unwrap();
        assert!((mae - 2.0).abs() < 1e-12);
        assert!((mse - 5.0).abs() < 1e-12);
        assert!(vector_mae_mse(&t, &d, &m, &[3]).is_err());
        assert!(vector_mae_mse(&t, &d, &m, &[]).is_err());
    }

    #[test]
    fn misaligned_series_are_rejected() {
        let t = grid(10, 0.1);
        assert!(metrics_mae_mse(&t, &[0.0; 10], &[0.0; 9]).is_err());
        assert!(metrics_mae_mse(&t[..1], &[0.0], &[0.0]).is_err());
        assert!(metrics_mae_mse(&[0.0, 0.0], &[0.0; 2], &[0.0; 2]).is_err());
    }

    #[test]
    fn spectral_examples() {
        let fs = 1000.0;
        let t = grid(4000, 1.0 / fs);
        assert_eq!(
            spectral_power_above(&vec![3.0; 4000], fs, 10.0).unwrap(),
            0.0
        );

        let tone = |f: f64| t.iter().map(move |t| (2.0 * PI * f * t).sin());
        let high: Vec<f64> = tone(50.0).collect();
        assert!(spectral_power_above(&high, fs, 2.0 * PI * 20.0).unwrap() >= 0.99);
        assert!(spectral_power_above(&high, fs, 2.0 * PI * 80.0).unwrap() <= 0.01);

        let two: Vec<f64> = tone(5.0).zip(tone(60.0)).map(|(a, b)| a + b).collect();
        let f = spectral_power_above(&two, fs, 2.0 * PI * 20.0).unwrap();
        assert!((f - 0.5).abs() <= 0.02, "{f}");

        assert!(spectral_power_above(&high, fs, 2.0 * PI * 600.0).is_err());
        assert!(spectral_power_above(&high, fs, PI * fs).is_ok());
    }
}
