use serde::Serialize;

use super::bias::{bias_correction, RegressionSpec};
use super::dataset::Dataset;
use super::estimator::tau_hat;
use super::matches::{find_matches, MatchMetric};
use super::variance::{sigma2_md_plugin, VarianceComponents, VarianceOptions};
use crate::constants::ConstantsTable;
use crate::error::{Error, Result};
use crate::special::normal_critical_value;

/// `tau_bc -/+ z_{(1+level)/2} sqrt(sigma2 / n)`.
pub fn confidence_interval(tau_bc: f64, sigma2: f64, n: usize, level: f64) -> Result<(f64, f64)> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::Domain(format!("variance must be finite and non-negative, got {sigma2}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("level must lie in (0, 1), got {level}")));
    }
    if n == 0 {
        return Err(Error::EmptyInput("confidence interval sample size"));
    }
    let half = normal_critical_value(level) * (sigma2 / n as f64).sqrt();
    Ok((tau_bc - half, tau_bc + half))
}

#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub m: usize,
    pub metric: MatchMetric,
    /// `None` disables bias correction.
    pub regression: Option<RegressionSpec>,
    /// `None` skips the variance plug-in and the interval.
    pub variance: Option<VarianceOptions>,
    pub level: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            m: 1,
            metric: MatchMetric::Euclidean,
            regression: Some(RegressionSpec::default()),
            variance: Some(VarianceOptions::default()),
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub n: usize,
    pub n0: usize,
    pub n1: usize,
    pub d: usize,
    pub m: usize,
    pub tau_hat: f64,
    pub b_hat: f64,
    pub tau_bc: f64,
    pub variance: Option<VarianceComponents>,
    pub level: f64,
    pub ci: Option<(f64, f64)>,
    pub standard_error: Option<f64>,
}

/// Matching, bias correction, plug-in variance and the normal interval.
pub fn estimate(data: &Dataset, constants: &ConstantsTable, options: &EstimateOptions) -> Result<EstimateReport> {
    let matches = find_matches(data, options.m, options.metric)?;
    let tau_hat = tau_hat(data, &matches);
    let b_hat = match options.regression {
        Some(spec) => bias_correction(data, &matches, spec)?,
        None => 0.0,
    };
    let tau_bc = tau_hat - b_hat;
    let variance = match &options.variance {
        Some(v) => Some(sigma2_md_plugin(data, &matches, constants, v)?),
        None => None,
    };
    let ci = match &variance {
        Some(v) => Some(confidence_interval(tau_bc, v.sigma2_md, data.n(), options.level)?),
        None => None,
    };
    Ok(EstimateReport {
        n: data.n(),
        n0: data.n0(),
        n1: data.n1(),
        d: data.dim(),
        m: options.m,
        tau_hat,
        b_hat,
        tau_bc,
        standard_error: variance.as_ref().map(|v| (v.sigma2_md / data.n() as f64).sqrt()),
        variance,
        level: options.level,
        ci,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_examples() {
        assert_eq!(confidence_interval(1.5, 0.0, 10, 0.95).unwrap(), (1.5, 1.5));
        let (lo, hi) = confidence_interval(0.0, 1.0, 100, 0.95).unwrap();
        assert!((hi - 0.1959963984540054).abs() < 1e-12 && (lo + hi).abs() < 1e-15);
        let a = confidence_interval(2.0, 3.0, 50, 0.90).unwrap();
        let b = confidence_interval(2.0, 3.0, 50, 0.99).unwrap();
        assert!(b.0 < a.0 && a.1 < b.1);
        assert!(confidence_interval(0.0, -1.0, 10, 0.95).is_err());
        assert!(confidence_interval(0.0, 1.0, 10, 1.0).is_err());
    }

    #[test]
    fn point_estimate_only() {
        let d = Dataset::new(
            vec![0.0, 1.0, 3.0, 5.0],
            vec![false, false, true, true],
            vec![0.0, 2.0, 0.9, 3.0],
            1,
        )
        .unwrap();
        let opts = EstimateOptions {
            regression: None,
            variance: None,
            ..EstimateOptions::default()
        };
        let r = estimate(&d, &ConstantsTable::new(), &opts).unwrap();
        assert_eq!((r.tau_hat, r.b_hat, r.tau_bc), (3.5, 0.0, 3.5));
        assert!(r.ci.is_none() && r.variance.is_none());
    }

    #[test]
    fn pipeline_on_one_dimensional_data() {
        let x: Vec<f64> = (0..60).map(|i| (i as f64 * 0.618).fract()).collect();
        let w: Vec<bool> = (0..60).map(|i| i % 2 == 1).collect();
        let y = x
            .iter()
            .zip(&w)
            .enumerate()
            .map(|(i, (x, t))| x + if *t { 1.0 } else { 0.0 } + 0.1 * ((i * 7 % 11) as f64 - 5.0))
            .collect();
        let d = Dataset::new(y, w, x, 1).unwrap();
        let r = estimate(&d, &ConstantsTable::new(), &EstimateOptions::default()).unwrap();
        let (ci, v) = (r.ci.unwrap(), r.variance.unwrap());
        assert!(ci.0 <= r.tau_bc && r.tau_bc <= ci.1);
        assert_eq!(v.alpha_md.value, 1.5);
        let expect = 2.0 * normal_critical_value(0.95) * (v.sigma2_md / 60.0).sqrt();
        assert!((ci.1 - ci.0 - expect).abs() < 1e-12);
    }
}
