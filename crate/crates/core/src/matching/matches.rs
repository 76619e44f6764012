use rayon::prelude::*;

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kdtree::KdTree;

/// Distance used for matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMetric {
    #[default]
    Euclidean,
    /// Euclidean after dividing each covariate by its sample standard deviation.
    InverseVariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub m: usize,
    /// `J_M(i)`: the `M` nearest opposite-group rows, nearest first.
    pub matches: Vec<Vec<usize>>,
    /// `K_M(i)`: how many times row `i` serves as a match.
    pub counts: Vec<usize>,
    /// Imputed `Y_i(0)`.
    pub y0_hat: Vec<f64>,
    /// Imputed `Y_i(1)`.
    pub y1_hat: Vec<f64>,
}

fn scaled_covariates(data: &Dataset, metric: MatchMetric) -> Vec<f64> {
    match metric {
        MatchMetric::Euclidean => data.x().to_vec(),
        MatchMetric::InverseVariance => {
            let (n, d) = (data.n(), data.dim());
            let mut x = data.x().to_vec();
            for c in 0..d {
                let mean = (0..n).map(|i| x[i * d + c]).sum::<f64>() / n as f64;
                let var = (0..n).map(|i| (x[i * d + c] - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
                let s = if var > 0.0 { var.sqrt() } else { 1.0 };
                for i in 0..n {
                    x[i * d + c] /= s;
                }
            }
            x
        }
    }
}

/// Matches every unit to its `m` nearest units of the opposite group, with replacement.
pub fn find_matches(data: &Dataset, m: usize, metric: MatchMetric) -> Result<MatchResult> {
    let (n0, n1) = (data.n0(), data.n1());
    if m == 0 || n0.min(n1) < m {
        return Err(Error::InsufficientGroup { needed: m.max(1), n0, n1 });
    }
    let x = scaled_covariates(data, metric);
    let d = data.dim();
    let trees = [
        KdTree::new(&x, d, data.group(false)),
        KdTree::new(&x, d, data.group(true)),
    ];
    let matches: Vec<Vec<usize>> = (0..data.n())
        .into_par_iter()
        .map(|i| {
            let other = &trees[usize::from(!data.treated(i))];
            other
                .nearest(&x[i * d..(i + 1) * d], m, None)
                .into_iter()
                .map(|nb| nb.index)
                .collect()
        })
        .collect();
    let mut counts = vec![0usize; data.n()];
    for js in &matches {
        for &j in js {
            counts[j] += 1;
        }
    }
    let y = data.y();
    let mut y0_hat = vec![0.0; data.n()];
    let mut y1_hat = vec![0.0; data.n()];
    for (i, js) in matches.iter().enumerate() {
        let imputed = js.iter().map(|&j| y[j]).sum::<f64>() / m as f64;
        if data.treated(i) {
            y1_hat[i] = y[i];
            y0_hat[i] = imputed;
        } else {
            y0_hat[i] = y[i];
            y1_hat[i] = imputed;
        }
    }
    Ok(MatchResult {
        m,
        matches,
        counts,
        y0_hat,
        y1_hat,
    })
}
