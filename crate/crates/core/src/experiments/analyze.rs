use nalgebra::{dmatrix, DMatrix};

use super::output::{aligned, num, opt, Table};
use super::{ExperimentConfig, ExperimentError};
use crate::loopshaping::{make_r_filter, InputShaping, ShapingSpec};
use crate::lti::{log_grid, loop_gain_compare, LoopAnalysis, StateSpaceRealization};

/// `|r(jω)|²` of one shaping function on the frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingCurve {
    pub alpha: f64,
    pub beta: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub frequencies: Vec<f64>,
    pub curves: Vec<ShapingCurve>,
    pub baseline: LoopAnalysis,
    pub shaped: LoopAnalysis,
}

/// The double integrator `ẍ = u` with full-state output.
pub fn demo_plant() -> StateSpaceRealization {
    StateSpaceRealization::new(
        dmatrix![0.0, 1.0; 0.0, 0.0],
        dmatrix![0.0; 1.0],
        DMatrix::identity(2, 2),
        DMatrix::zeros(2, 1),
    )
    .expect("double integrator realization")
}

/// Shaping-function magnitudes and the loop comparison on the demo plant.
pub fn study_loopshaping_analysis(
    config: &ExperimentConfig,
) -> Result<AnalysisReport, ExperimentError> {
    let a = &config.analyze;
    if !(a.min_frequency > 0.0 && a.max_frequency > a.min_frequency && a.points >= 2) {
        return Err(ExperimentError::Config(
            "invalid analysis frequency grid".into(),
        ));
    }
    let frequencies = log_grid(a.min_frequency, a.max_frequency, a.points);
    let shaping = |p: [f64; 2]| -> Result<ShapingSpec, ExperimentError> {
        InputShaping::new(p[0], p[1])
            .and_then(|s| ShapingSpec::new(vec![s]))
            .map_err(|e| ExperimentError::Config(e.to_string()))
    };
    let mut curves = Vec::new();
    for &p in &a.specs {
        let r =
            make_r_filter(&shaping(p)?, 0).map_err(|e| ExperimentError::Config(e.to_string()))?;
        let values = frequencies
            .iter()
            .map(|&w| r.eval(w).map(|z| z.norm_sqr()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        curves.push(ShapingCurve {
            alpha: p[0],
            beta: p[1],
            values,
        });
    }
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&a.state_weight));
    let r = dmatrix![a.input_weight];
    let (baseline, shaped) =
        loop_gain_compare(&demo_plant(), &q, &r, &shaping(a.loop_spec)?, &frequencies)
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
    Ok(AnalysisReport {
        frequencies,
        curves,
        baseline,
        shaped,
    })
}

impl AnalysisReport {
    pub const SHAPING_COLUMNS: [&'static str; 4] = ["alpha", "beta", "omega", "r_squared"];
    pub const LOOP_COLUMNS: [&'static str; 5] = [
        "omega",
        "baseline_gain",
        "shaped_gain",
        "baseline_margin",
        "shaped_margin",
    ];

    /// Shaped loop gain below the baseline at every sample at or above `omega`.
    pub fn gain_attenuated_above(&self, omega: f64) -> bool {
        let (b, s) = (
            self.baseline.gain_magnitudes(),
            self.shaped.gain_magnitudes(),
        );
        self.frequencies
            .iter()
            .zip(b.iter().zip(&s))
            .filter(|(w, _)| **w >= omega)
            .all(|(_, (b, s))| s < b)
    }

    /// Shaped margin at least the baseline margin at every sample at or
    /// above `omega` where both are defined.
    pub fn margin_kept_above(&self, omega: f64) -> bool {
        self.frequencies
            .iter()
            .zip(self.baseline.margin.iter().zip(&self.shaped.margin))
            .filter(|(w, _)| **w >= omega)
            .all(|(_, pair)| match pair {
                (Some(b), Some(s)) => s >= b,
                _ => false,
            })
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut shaping = Table::new("analyze_shaping", &Self::SHAPING_COLUMNS);
        for c in &self.curves {
            for (w, v) in self.frequencies.iter().zip(&c.values) {
                shaping.push(vec![num(c.alpha), num(c.beta), num(*w), num(*v)]);
            }
        }
        let mut lp = Table::new("analyze_loop", &Self::LOOP_COLUMNS);
        let (b, s) = (
            self.baseline.gain_magnitudes(),
            self.shaped.gain_magnitudes(),
        );
        for (k, w) in self.frequencies.iter().enumerate() {
            lp.push(vec![
                num(*w),
                num(b[k]),
                num(s[k]),
                opt(self.baseline.margin[k]),
                opt(self.shaped.margin[k]),
            ]);
        }
        vec![shaping, lp]
    }

    pub fn summary(&self) -> String {
        let mut rows = vec![vec![
            "omega rad/s".to_string(),
            "baseline |L|".into(),
            "shaped |L|".into(),
            "baseline margin".into(),
            "shaped margin".into(),
        ]];
        let (b, s) = (
            self.baseline.gain_magnitudes(),
            self.shaped.gain_magnitudes(),
        );
        let m = |v: Option<f64>| v.map_or("-".into(), |v| format!("{v:.4}"));
        let step = (self.frequencies.len() / 10).max(1);
        for k in (0..self.frequencies.len()).step_by(step) {
            rows.push(vec![
                format!("{:.3e}", self.frequencies[k]),
                format!("{:.4e}", b[k]),
                format!("{:.4e}", s[k]),
                m(self.baseline.margin[k]),
                m(self.shaped.margin[k]),
            ]);
        }
        let mut out = String::from("Loop gain of the double-integrator demo\n\n");
        out.push_str(&aligned(&rows));
        out.push_str(&format!(
            "\nshaped gain below baseline for omega >= 100: {}\nshaped margin >= baseline for omega >= 100: {}\n",
            self.gain_attenuated_above(100.0),
            self.margin_kept_above(100.0)
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> AnalysisReport {
        study_loopshaping_analysis(&ExperimentConfig::default()).unwrap()
    }

    #[test]
    fn shaping_curve_examples() {
        let r = report();
        let c = &r.curves[0];
        assert_eq!((c.alpha, c.beta), (0.01, 0.1));
        let first = c.values[0];
        let last = *c.values.last().unwrap();
        assert!((first - 1.0).abs() < 1e-5, "{first}");
        assert!((last - 100.0).abs() <= 1.0, "{last}");
        // Unshaped spec is flat.
        assert!(r.curves[2].values.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn geometric_mean_corner() {
        let mut c = ExperimentConfig::default();
        let w = (1.0f64 / (0.01 * 0.1)).sqrt();
        c.analyze.min_frequency = w;
        c.analyze.max_frequency = 2.0 * w;
        let r = study_loopshaping_analysis(&c).unwrap();
        let v = r.curves[0].values[0];
        assert!((v - 10.0).abs() <= 0.1, "{v}");
    }

    #[test]
    fn shaped_loop_rolls_off_with_margin() {
        let r = report();
        assert!(r.gain_attenuated_above(100.0));
        assert!(r.margin_kept_above(100.0));
        let t = r.tables();
        assert_eq!(t[0].columns, AnalysisReport::SHAPING_COLUMNS);
        assert_eq!(t[0].rows.len(), 3 * 200);
        assert_eq!(t[1].columns, AnalysisReport::LOOP_COLUMNS);
        assert_eq!(t[1].rows.len(), 200);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let mut c = ExperimentConfig::default();
        c.analyze.specs = vec![[0.2, 0.1]];
        assert!(study_loopshaping_analysis(&c).is_err());
        let mut c = ExperimentConfig::default();
        c.analyze.points = 1;
        assert!(study_loopshaping_analysis(&c).is_err());
    }
}
