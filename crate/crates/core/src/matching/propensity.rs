use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kdtree::KdTree;

/// Propensities are clamped to `[ETA, 1 - ETA]`.
pub const ETA: f64 = 0.05;

/// A known function of the covariates, used in simulation (oracle) mode.
#[derive(Clone)]
pub struct Oracle(pub Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

impl Oracle {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Oracle(..)")
    }
}

#[derive(Debug, Clone, Default)]
pub enum PropensitySpec {
    /// Logistic regression on `(1, X)`, falling back to k-NN if the fit diverges.
    #[default]
    Logistic,
    /// Treated share among the `k` nearest other units; `None` picks `ceil(sqrt(n))`.
    Knn { k: Option<usize> },
    Oracle(Oracle),
}

/// Which estimator actually produced the propensities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropensitySource {
    Logistic,
    Knn,
    Oracle,
}

fn clamp(e: f64) -> f64 {
    e.clamp(ETA, 1.0 - ETA)
}

/// Clamped propensity scores for every unit.
pub fn estimate_propensity(data: &Dataset, spec: &PropensitySpec) -> Result<(Vec<f64>, PropensitySource)> {
    if data.n0() == 0 || data.n1() == 0 {
        return Err(Error::DegeneratePropensity);
    }
    match spec {
        PropensitySpec::Oracle(f) => Ok((
            (0..data.n()).map(|i| clamp(f.eval(data.row(i)))).collect(),
            PropensitySource::Oracle,
        )),
        PropensitySpec::Knn { k } => Ok((knn_propensity(data, *k), PropensitySource::Knn)),
        PropensitySpec::Logistic => match logistic_coefficients(data) {
            Ok(beta) => Ok((
                (0..data.n())
                    .map(|i| clamp(sigmoid(linear_predictor(&beta, data.row(i)))))
                    .collect(),
                PropensitySource::Logistic,
            )),
            Err(_) => Ok((knn_propensity(data, None), PropensitySource::Knn)),
        },
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn linear_predictor(beta: &[f64], x: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

const MAX_LINEAR_PREDICTOR: f64 = 30.0;

/// Newton-Raphson (IRLS) for the logistic model. Fails on separation or non-convergence.
pub fn logistic_coefficients(data: &Dataset) -> Result<Vec<f64>> {
    let (n, d) = (data.n(), data.dim());
    let p = d + 1;
    let mut beta = vec![0.0; p];
    beta[0] = (data.p_hat() / (1.0 - data.p_hat())).ln();
    let deviance = |beta: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let t = linear_predictor(beta, data.row(i));
                // log(1 + e^t) - w t, computed stably
                let soft = if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
                soft - if data.treated(i) { t } else { 0.0 }
            })
            .sum()
    };
    let mut dev = deviance(&beta);
    for _ in 0..100 {
        let mut h = DMatrix::<f64>::zeros(p, p);
        let mut g = DVector::<f64>::zeros(p);
        for i in 0..n {
            let x = data.row(i);
            let e = sigmoid(linear_predictor(&beta, x));
            let r = f64::from(u8::from(data.treated(i))) - e;
            let v = e * (1.0 - e);
            for a in 0..p {
                let xa = if a == 0 { 1.0 } else { x[a - 1] };
                g[a] += r * xa;
                for b in 0..=a {
                    let xb = if b == 0 { 1.0 } else { x[b - 1] };
                    h[(a, b)] += v * xa * xb;
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        let step = h
            .cholesky()
            .ok_or(Error::Nonconvergent("logistic regression"))?
            .solve(&g);
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let cd = deviance(&cand);
            if cd <= dev + 1e-12 * dev.abs().max(1.0) {
                beta = cand;
                improved = dev - cd > 1e-12 * dev.abs().max(1.0);
                dev = cd;
                break;
            }
            scale *= 0.5;
        }
        let max_eta = (0..n)
            .map(|i| linear_predictor(&beta, data.row(i)).abs())
            .fold(0.0, f64::max);
        if max_eta > MAX_LINEAR_PREDICTOR {
            return Err(Error::Nonconvergent("logistic regression (separation)"));
        }
        if !improved || step.norm() * scale < 1e-10 {
            return Ok(beta);
        }
    }
    Err(Error::Nonconvergent("logistic regression"))
}

fn knn_propensity(data: &Dataset, k: Option<usize>) -> Vec<f64> {
    let n = data.n();
    let k = k.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize).clamp(1, n - 1);
    let tree = KdTree::new(data.x(), data.dim(), (0..n).collect());
    (0..n)
        .map(|i| {
            let nb = tree.nearest(data.row(i), k, Some(i));
            clamp(nb.iter().filter(|b| data.treated(b.index)).count() as f64 / nb.len() as f64)
        })
        .collect()
}
