use serde::Serialize;
use statrs::function::beta::ln_beta;

use super::dgp::{CovariateLaw, DgpSpec};
use crate::error::{Error, Result};
use crate::matching::limiting_variance_weight;
use crate::quadrature::gauss_legendre;

/// Population quantities entering the limiting variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationVariance {
    pub m: usize,
    pub alpha_md: f64,
    /// `tau = E[mu_1(X) - mu_0(X)]`.
    pub tau: f64,
    /// `E[(tau(X) - tau)^2]`.
    pub v_tau_x: f64,
    /// Limit of `E[V^E]`: the two noise-weighted expectations.
    pub ve_limit: f64,
    pub sigma2_md: f64,
    pub nodes_per_axis: usize,
}

const TOLERANCE: f64 = 1e-8;
const MAX_NODES: usize = 1 << 22;

/// Tensor Gauss-Legendre expectations of several functions under the covariate law.
fn expectations<F: Fn(&[f64], &mut [f64])>(dgp: &DgpSpec, q: usize, k: usize, f: F) -> Vec<f64> {
    let d = dgp.d;
    let (nodes, mut weights) = gauss_legendre(q, 0.0, 1.0);
    if let CovariateLaw::Beta { a, b } = dgp.covariates {
        let lb = ln_beta(a, b);
        for (w, t) in weights.iter_mut().zip(&nodes) {
            *w *= ((a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln() - lb).exp();
        }
    }
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut vals = vec![0.0; k];
    let mut total = vec![0.0; k];
    loop {
        let mut w = 1.0;
        for c in 0..d {
            x[c] = nodes[idx[c]];
            w *= weights[idx[c]];
        }
        f(&x, &mut vals);
        for (t, v) in total.iter_mut().zip(&vals) {
            *t += w * v;
        }
        let mut c = 0;
        while c < d {
            idx[c] += 1;
            if idx[c] < q {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
        if c == d {
            return total;
        }
    }
}

/// The closed-form limiting variance for a DGP, by deterministic integration.
///
/// The node count per axis doubles from 8 until successive values agree to `1e-8`.
pub fn population_sigma2_md(dgp: &DgpSpec, m: usize, alpha_md: f64) -> Result<PopulationVariance> {
    dgp.validate()?;
    if m == 0 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    let eval = |q: usize| -> [f64; 4] {
        let t = expectations(dgp, q, 4, |x, out| {
            let e = dgp.propensity.eval(x);
            let tx = dgp.tau_x(x);
            out[0] = tx;
            out[1] = tx * tx;
            out[2] = dgp.sigma1_sq.eval(x) * limiting_variance_weight(alpha_md, m, e);
            out[3] = dgp.sigma0_sq.eval(x) * limiting_variance_weight(alpha_md, m, 1.0 - e);
        });
        [t[0], t[1] - t[0] * t[0], t[2] + t[3], 0.0]
    };
    let mut q = 8;
    let mut prev = eval(q);
    loop {
        let next_q = 2 * q;
        if next_q.checked_pow(dgp.d as u32).is_none_or(|n| n > MAX_NODES) {
            return Err(Error::Nonconvergent("tensor Gauss rule for the population variance"));
        }
        let cur = eval(next_q);
        let close = (0..3).all(|i| (cur[i] - prev[i]).abs() <= TOLERANCE * cur[i].abs().max(1.0));
        q = next_q;
        prev = cur;
        if close {
            break;
        }
    }
    let [tau, v_tau_x, ve_limit, _] = prev;
    let v_tau_x = v_tau_x.max(0.0);
    Ok(PopulationVariance {
        m,
        alpha_md,
        tau,
        v_tau_x,
        ve_limit,
        sigma2_md: v_tau_x + ve_limit,
        nodes_per_axis: q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::dgp::{preset, AdditivePolynomial, PropensityModel};

    fn flat(d: usize) -> DgpSpec {
        let mut p = preset("linear-constant-e").unwrap();
        p.d = d;
        p.mu0 = AdditivePolynomial::constant(0.0, d);
        p.mu1 = AdditivePolynomial::constant(1.0, d);
        p.sigma0_sq = AdditivePolynomial::constant(1.0, d);
        p.sigma1_sq = AdditivePolynomial::constant(1.0, d);
        p
    }

    #[test]
    fn constant_effect_half_propensity() {
        let v = population_sigma2_md(&flat(2), 1, 1.28).unwrap();
        assert!((v.sigma2_md - 5.28).abs() < 1e-12);
        assert_eq!(v.v_tau_x, 0.0);
        assert!((v.tau - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_dimensional_closed_form() {
        // e = 1/2, sigma^2 = 1: 2 (2 alpha + (alpha - M^2 - M)/2 + 2M^2 + M - 2 alpha) / M^2 = (alpha + 3 M^2 + M) / M^2
        for m in 1..=6usize {
            let alpha = (m * (2 * m + 1)) as f64 / 2.0;
            let mf = m as f64;
            let expect = (alpha + 3.0 * mf * mf + mf) / (mf * mf);
            let v = population_sigma2_md(&flat(1), m, alpha).unwrap();
            assert!((v.sigma2_md - expect).abs() < 1e-12, "M={m}");
        }
    }

    #[test]
    fn heterogeneous_effect_adds_its_variance() {
        let mut p = flat(2);
        p.mu1 = AdditivePolynomial::linear(0.0, &[1.0, 0.0]);
        let v = population_sigma2_md(&p, 1, 1.28).unwrap();
        assert!((v.v_tau_x - 1.0 / 12.0).abs() < 1e-12);
        assert!((v.sigma2_md - 5.28 - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_propensity_by_independent_rule() {
        // one-dimensional check against a midpoint rule with 10^6 cells
        let mut p = flat(1);
        p.propensity = PropensityModel::Logistic { intercept: -0.5, slope: vec![1.5] };
        let v = population_sigma2_md(&p, 2, 4.0).unwrap();
        let k = 1_000_000;
        let mut s = 0.0;
        for i in 0..k {
            let x = [(i as f64 + 0.5) / k as f64];
            let e = p.propensity.eval(&x);
            s += limiting_variance_weight(4.0, 2, e) + limiting_variance_weight(4.0, 2, 1.0 - e);
        }
        assert!((v.ve_limit - s / k as f64).abs() < 1e-9);
    }
}
