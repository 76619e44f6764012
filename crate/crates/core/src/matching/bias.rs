use nalgebra::{DMatrix, DVector};

use super::dataset::Dataset;
use super::matches::MatchResult;
use crate::error::{Error, Result};
use crate::rng::pairwise_sum;

/// Within-group least-squares model for `mu_w`.
///
/// The basis is additive: an intercept plus `x_c, x_c^2, ..., x_c^degree` for every
/// covariate. `degree = 1` is the plain linear fit on `(1, X)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegressionSpec {
    pub degree: usize,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        Self { degree: 1 }
    }
}

impl RegressionSpec {
    pub fn n_features(&self, dim: usize) -> usize {
        1 + dim * self.degree
    }

    fn features(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        let mut k = 1;
        for &v in x {
            let mut p = 1.0;
            for _ in 0..self.degree {
                p *= v;
                out[k] = p;
                k += 1;
            }
        }
    }
}

/// A fitted group regression.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedRegression {
    pub spec: RegressionSpec,
    pub coefficients: Vec<f64>,
}

impl FittedRegression {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut f = vec![0.0; self.coefficients.len()];
        self.spec.features(x, &mut f);
        f.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }
}

/// Least squares of `Y` on the basis within group `w`.
pub fn fit_group(data: &Dataset, w: bool, spec: RegressionSpec) -> Result<FittedRegression> {
    let rows = data.group(w);
    let p = spec.n_features(data.dim());
    let group = u8::from(w);
    if rows.len() < p {
        return Err(Error::RankDeficient { group });
    }
    let mut design = DMatrix::<f64>::zeros(rows.len(), p);
    let mut f = vec![0.0; p];
    for (r, &i) in rows.iter().enumerate() {
        spec.features(data.row(i), &mut f);
        for (c, v) in f.iter().enumerate() {
            design[(r, c)] = *v;
        }
    }
    // Column scaling keeps the rank test meaningful when covariates have very different units.
    let scales: Vec<f64> = (0..p)
        .map(|c| {
            let s = design.column(c).norm();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    for (c, s) in scales.iter().enumerate() {
        design.column_mut(c).unscale_mut(*s);
    }
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| data.y()[i]));
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 || svd.singular_values.min() <= smax * 1e-10 {
        return Err(Error::RankDeficient { group });
    }
    let beta = svd
        .solve(&y, smax * 1e-12)
        .map_err(|_| Error::RankDeficient { group })?;
    Ok(FittedRegression {
        spec,
        coefficients: beta.iter().zip(&scales).map(|(b, s)| b / s).collect(),
    })
}

/// `B_M` for given outcome models, with `mu[w]` the model for group `w`.
pub fn bias_term<F: Fn(bool, &[f64]) -> f64>(data: &Dataset, matches: &MatchResult, mu: F) -> f64 {
    let m = matches.m as f64;
    let terms: Vec<f64> = (0..data.n())
        .map(|i| {
            let other = !data.treated(i);
            let at_i = mu(other, data.row(i));
            let disc = matches.matches[i]
                .iter()
                .map(|&j| at_i - mu(other, data.row(j)))
                .sum::<f64>()
                / m;
            if data.treated(i) {
                disc
            } else {
                -disc
            }
        })
        .collect();
    pairwise_sum(&terms) / data.n() as f64
}

/// Regression estimate of the bias term, `B_M` with fitted `mu_w` in place of `mu_w`.
pub fn bias_correction(data: &Dataset, matches: &MatchResult, spec: RegressionSpec) -> Result<f64> {
    let fits = [fit_group(data, false, spec)?, fit_group(data, true, spec)?];
    Ok(bias_term(data, matches, |w, x| fits[usize::from(w)].predict(x)))
}
