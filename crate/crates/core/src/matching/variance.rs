use serde::Serialize;

use super::dataset::Dataset;
use super::matches::MatchResult;
use super::propensity::{estimate_propensity, Oracle, PropensitySource, PropensitySpec};
use crate::constants::{lookup_alpha_md, ConstantEstimate, ConstantsTable};
use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::rng::pairwise_sum;

/// Nearest-neighbor estimate of `sigma^2_{W_i}(X_i)` from `j_var` same-group neighbors.
pub fn conditional_variance_nn(data: &Dataset, j_var: usize) -> Result<Vec<f64>> {
    let (n0, n1) = (data.n0(), data.n1());
    if j_var == 0 || n0.min(n1) < j_var + 1 {
        return Err(Error::InsufficientGroup {
            needed: j_var.max(1) + 1,
            n0,
            n1,
        });
    }
    let trees = [
        KdTree::new(data.x(), data.dim(), data.group(false)),
        KdTree::new(data.x(), data.dim(), data.group(true)),
    ];
    let y = data.y();
    let factor = j_var as f64 / (j_var as f64 + 1.0);
    Ok((0..data.n())
        .map(|i| {
            let nb = trees[usize::from(data.treated(i))].nearest(data.row(i), j_var, Some(i));
            let mean = nb.iter().map(|b| y[b.index]).sum::<f64>() / j_var as f64;
            factor * (y[i] - mean).powi(2)
        })
        .collect())
}

/// `V^E = (1/n) sum (1 + K_M(i)/M)^2 sigma^2_{W_i}(X_i)`.
pub fn v_e(matches: &MatchResult, sigma2: &[f64]) -> f64 {
    let m = matches.m as f64;
    let terms: Vec<f64> = matches
        .counts
        .iter()
        .zip(sigma2)
        .map(|(&k, s)| (1.0 + k as f64 / m).powi(2) * s)
        .collect();
    pairwise_sum(&terms) / terms.len() as f64
}

/// Weight multiplying `sigma_w^2` in the limiting variance, given the propensity `e` of group `w`.
pub fn limiting_variance_weight(alpha: f64, m: usize, e: f64) -> f64 {
    let m = m as f64;
    (alpha / e + (alpha - m * m - m) * e + (2.0 * m * m + m - 2.0 * alpha)) / (m * m)
}

#[derive(Debug, Clone)]
pub enum SigmaSpec {
    NearestNeighbor { j_var: usize },
    /// Known `sigma_0^2(x)` and `sigma_1^2(x)`.
    Oracle { sigma0_sq: Oracle, sigma1_sq: Oracle },
}

impl Default for SigmaSpec {
    fn default() -> Self {
        Self::NearestNeighbor { j_var: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum VTauSpec {
    /// Dispersion of unit-level imputed effects net of imputation noise. Heuristic.
    #[default]
    Heuristic,
    Oracle(f64),
}

#[derive(Debug, Clone, Default)]
pub struct VarianceOptions {
    pub propensity: PropensitySpec,
    pub sigma: SigmaSpec,
    pub v_tau_x: VTauSpec,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceComponents {
    pub v_e: f64,
    pub v_tau_x: f64,
    pub v_m: f64,
    pub sigma2_md: f64,
    pub alpha_md: ConstantEstimate,
    pub propensity_source: PropensitySource,
    pub v_tau_x_heuristic: bool,
    /// `sigma^2_{W_i}(X_i)` per unit.
    #[serde(skip)]
    pub sigma2_own: Vec<f64>,
    /// `sigma^2_0(X_i)` and `sigma^2_1(X_i)` per unit; the opposite-group value is the
    /// mean over the unit's matches.
    #[serde(skip)]
    pub sigma2_by_group: [Vec<f64>; 2],
    #[serde(skip)]
    pub e_hat: Vec<f64>,
}

/// Sample analogue of the closed-form limiting variance `sigma^2_{M,d}`.
pub fn sigma2_md_plugin(
    data: &Dataset,
    matches: &MatchResult,
    constants: &ConstantsTable,
    options: &VarianceOptions,
) -> Result<VarianceComponents> {
    let (n, m) = (data.n(), matches.m);
    let alpha = lookup_alpha_md(m, data.dim(), constants)?;
    let (e_hat, propensity_source) = estimate_propensity(data, &options.propensity)?;

    let mut by_group = [vec![0.0; n], vec![0.0; n]];
    match &options.sigma {
        SigmaSpec::Oracle { sigma0_sq, sigma1_sq } => {
            for i in 0..n {
                by_group[0][i] = sigma0_sq.eval(data.row(i));
                by_group[1][i] = sigma1_sq.eval(data.row(i));
            }
        }
        SigmaSpec::NearestNeighbor { j_var } => {
            let own = conditional_variance_nn(data, *j_var)?;
            for i in 0..n {
                let w = usize::from(data.treated(i));
                by_group[w][i] = own[i];
                by_group[1 - w][i] = matches.matches[i].iter().map(|&j| own[j]).sum::<f64>() / m as f64;
            }
        }
    }
    let sigma2_own: Vec<f64> = (0..n).map(|i| by_group[usize::from(data.treated(i))][i]).collect();

    let v_e = v_e(matches, &sigma2_own);
    let v_tau_x = match options.v_tau_x {
        VTauSpec::Oracle(v) => v,
        VTauSpec::Heuristic => {
            let effects: Vec<f64> = matches.y1_hat.iter().zip(&matches.y0_hat).map(|(a, b)| a - b).collect();
            let mean = pairwise_sum(&effects) / n as f64;
            let spread: Vec<f64> = effects.iter().map(|t| (t - mean).powi(2)).collect();
            let noise = (1.0 + 1.0 / m as f64) * pairwise_sum(&sigma2_own) / n as f64;
            (pairwise_sum(&spread) / n as f64 - noise).max(0.0)
        }
    };
    let terms: Vec<f64> = (0..n)
        .map(|i| {
            by_group[1][i] * limiting_variance_weight(alpha.value, m, e_hat[i])
                + by_group[0][i] * limiting_variance_weight(alpha.value, m, 1.0 - e_hat[i])
        })
        .collect();
    let sigma2_md = (v_tau_x + pairwise_sum(&terms) / n as f64).max(0.0);
    Ok(VarianceComponents {
        v_e,
        v_tau_x,
        v_m: v_e + v_tau_x,
        sigma2_md,
        alpha_md: alpha,
        propensity_source,
        v_tau_x_heuristic: matches!(options.v_tau_x, VTauSpec::Heuristic),
        sigma2_own,
        sigma2_by_group: by_group,
        e_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{ConstantKind, Indices};
    use crate::matching::{find_matches, MatchMetric};
    use crate::rng::stream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn two_units_one_neighbor() {
        let d = Dataset::new(
            vec![0.0, 2.0, 5.0, 5.0],
            vec![false, false, true, true],
            vec![0.0, 1.0, 0.0, 1.0],
            1,
        )
        .unwrap();
        assert_eq!(conditional_variance_nn(&d, 1).unwrap(), vec![2.0, 2.0, 0.0, 0.0]);
        assert!(conditional_variance_nn(&d, 2).is_err());
    }

    #[test]
    fn nn_variance_is_nearly_unbiased() {
        let mut rng = stream(3, 0);
        let n = 5000;
        let x: Vec<f64> = (0..2 * n).map(|_| rng.gen::<f64>()).collect();
        let w: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| x[2 * i] + x[2 * i + 1] + 1.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let d = Dataset::new(y, w, x, 2).unwrap();
        let s = conditional_variance_nn(&d, 2).unwrap();
        let mean = s.iter().sum::<f64>() / n as f64;
        assert!((mean / 2.25 - 1.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn v_e_examples() {
        let mut r = MatchResult {
            m: 1,
            matches: vec![vec![]; 3],
            counts: vec![0; 3],
            y0_hat: vec![0.0; 3],
            y1_hat: vec![0.0; 3],
        };
        assert_eq!(v_e(&r, &[1.0; 3]), 1.0);
        r.counts = vec![1; 3];
        assert_eq!(v_e(&r, &[1.0; 3]), 4.0);
        assert_eq!(v_e(&r, &[9.0; 3]), 36.0);
    }

    #[test]
    fn oracle_plugin_constant_propensity() {
        let mut table = ConstantsTable::new();
        table.insert(ConstantEstimate::closed_form(ConstantKind::AlphaD, Indices::alpha_d(2), 1.28));
        let d = Dataset::new(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![false, true, false, true],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            2,
        )
        .unwrap();
        let r = find_matches(&d, 1, MatchMetric::Euclidean).unwrap();
        let opts = VarianceOptions {
            propensity: PropensitySpec::Oracle(Oracle::constant(0.5)),
            sigma: SigmaSpec::Oracle {
                sigma0_sq: Oracle::constant(1.0),
                sigma1_sq: Oracle::constant(1.0),
            },
            v_tau_x: VTauSpec::Oracle(0.0),
        };
        let v = sigma2_md_plugin(&d, &r, &table, &opts).unwrap();
        assert!((v.sigma2_md - 5.28).abs() < 1e-12, "{}", v.sigma2_md);
        assert!(!v.v_tau_x_heuristic);
    }

    #[test]
    fn missing_constant() {
        let d = Dataset::new(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![false, true, false, true],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            2,
        )
        .unwrap();
        let r = find_matches(&d, 1, MatchMetric::Euclidean).unwrap();
        let e = sigma2_md_plugin(&d, &r, &ConstantsTable::new(), &VarianceOptions::default()).unwrap_err();
        assert!(matches!(e, Error::MissingConstant(_)));
    }

    #[test]
    fn weight_at_one_dimension_reference() {
        // M = 1, alpha = 1.5, e = 1/2: 3 - 0.25 + 0 = 2.75
        assert!((limiting_variance_weight(1.5, 1, 0.5) - 2.75).abs() < 1e-15);
    }
}
