use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{DgpSpec, SimulatedSample};
use super::population::{population_sigma2_md, PopulationVariance};
use crate::constants::{lookup_alpha_md, ConstantsTable};
use crate::error::{Error, Result};
use crate::matching::{
    bias_correction, bias_term, confidence_interval, find_matches, sigma2_md_plugin, tau_hat, unit_weights, v_e,
    MatchMetric, MatchResult, RegressionSpec, VarianceOptions,
};
use crate::rng::{derive_seed, pairwise_sum, stream};
use crate::special::normal_cdf;

/// The pieces of `tau_hat - tau = tau_bar(X) + E_M + B_M - tau` for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub tau_hat: f64,
    pub tau: f64,
    pub tau_bar_x: f64,
    pub e_m: f64,
    pub b_m: f64,
    /// `tau_hat - tau - (tau_bar_x - tau) - e_m - b_m`.
    pub residual: f64,
}

pub fn decompose(dgp: &DgpSpec, sample: &SimulatedSample, matches: &MatchResult, tau: f64) -> Decomposition {
    let data = &sample.data;
    let n = data.n() as f64;
    let effects: Vec<f64> = sample.mu1.iter().zip(&sample.mu0).map(|(a, b)| a - b).collect();
    let tau_bar_x = pairwise_sum(&effects) / n;
    let noise: Vec<f64> = unit_weights(data, matches).iter().zip(&sample.eps).map(|(w, e)| w * e).collect();
    let e_m = pairwise_sum(&noise) / n;
    let b_m = bias_term(data, matches, |w, x| dgp.mu(w, x));
    let tau_hat = tau_hat(data, matches);
    Decomposition {
        tau_hat,
        tau,
        tau_bar_x,
        e_m,
        b_m,
        residual: tau_hat - tau - (tau_bar_x - tau) - e_m - b_m,
    }
}

/// Simulates once and returns the decomposition of the estimation error.
pub fn decomposition_check(dgp: &DgpSpec, m: usize, n: usize, seed: u64) -> Result<Decomposition> {
    let sample = dgp.simulate(n, m, &mut stream(seed, 0))?;
    let matches = find_matches(&sample.data, m, MatchMetric::Euclidean)?;
    let tau = population_sigma2_md(dgp, m, 1.0)?.tau;
    Ok(decompose(dgp, &sample, &matches, tau))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub rep: usize,
    /// Master seed; the replication uses stream `rep` of it.
    pub seed: u64,
    pub tau_hat: f64,
    pub b_hat: f64,
    pub tau_bc: f64,
    pub b_m: f64,
    pub tau_bar_x: f64,
    pub e_m: f64,
    pub residual: f64,
    pub v_e_oracle: f64,
    pub v_e_plugin: Option<f64>,
    pub sigma2_plugin: Option<f64>,
    /// `sqrt(n) (tau_bc - tau) / sigma_{M,d}` with the population variance.
    pub z_oracle: f64,
    pub ci_hit_oracle: bool,
    pub ci_hit_plugin: Option<bool>,
}

/// Fixed inputs shared by all replications of an experiment.
#[derive(Debug, Clone)]
pub struct ReplicationContext<'a> {
    pub dgp: &'a DgpSpec,
    pub m: usize,
    pub n: usize,
    pub level: f64,
    pub population: PopulationVariance,
    pub constants: &'a ConstantsTable,
    pub plugin: bool,
}

impl<'a> ReplicationContext<'a> {
    pub fn new(dgp: &'a DgpSpec, m: usize, n: usize, level: f64, constants: &'a ConstantsTable, plugin: bool) -> Result<Self> {
        let alpha = lookup_alpha_md(m, dgp.d, constants)?;
        Ok(Self {
            dgp,
            m,
            n,
            level,
            population: population_sigma2_md(dgp, m, alpha.value)?,
            constants,
            plugin,
        })
    }

    /// Replication `rep` of master seed `seed`; replays exactly from those two numbers.
    pub fn run(&self, seed: u64, rep: usize) -> Result<ReplicationOutcome> {
        let dgp = self.dgp;
        let mut rng = stream(seed, rep as u64);
        let sample = dgp.simulate(self.n, self.m.max(3), &mut rng)?;
        let data = &sample.data;
        let matches = find_matches(data, self.m, MatchMetric::Euclidean)?;
        let parts = decompose(dgp, &sample, &matches, self.population.tau);
        let spec = RegressionSpec { degree: dgp.mean_degree().max(1) };
        let b_hat = bias_correction(data, &matches, spec)?;
        let tau_bc = parts.tau_hat - b_hat;
        let sigma2_own: Vec<f64> = (0..data.n()).map(|i| dgp.sigma_sq(data.treated(i), data.row(i))).collect();
        let v_e_oracle = v_e(&matches, &sigma2_own);
        let pop = &self.population;
        let (lo, hi) = confidence_interval(tau_bc, pop.sigma2_md, data.n(), self.level)?;
        let (mut v_e_plugin, mut sigma2_plugin, mut ci_hit_plugin) = (None, None, None);
        if self.plugin {
            let v = sigma2_md_plugin(data, &matches, self.constants, &VarianceOptions::default())?;
            let (a, b) = confidence_interval(tau_bc, v.sigma2_md, data.n(), self.level)?;
            v_e_plugin = Some(v.v_e);
            sigma2_plugin = Some(v.sigma2_md);
            ci_hit_plugin = Some(a <= pop.tau && pop.tau <= b);
        }
        Ok(ReplicationOutcome {
            rep,
            seed,
            tau_hat: parts.tau_hat,
            b_hat,
            tau_bc,
            b_m: parts.b_m,
            tau_bar_x: parts.tau_bar_x,
            e_m: parts.e_m,
            residual: parts.residual,
            v_e_oracle,
            v_e_plugin,
            sigma2_plugin,
            z_oracle: (data.n() as f64).sqrt() * (tau_bc - pop.tau) / pop.sigma2_md.sqrt(),
            ci_hit_oracle: lo <= pop.tau && pop.tau <= hi,
            ci_hit_plugin,
        })
    }

    pub fn run_all(&self, seed: u64, replications: usize) -> Result<Vec<ReplicationOutcome>> {
        (0..replications).into_par_iter().map(|r| self.run(seed, r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VeRow {
    pub n: usize,
    pub seed: u64,
    pub mean_v_e: f64,
    pub se: f64,
    /// `(mean - limit) / limit`.
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VeTrend {
    pub dgp: String,
    pub m: usize,
    pub d: usize,
    pub replications: usize,
    pub limit: f64,
    pub rows: Vec<VeRow>,
    /// Absolute gaps shrink along the (sorted) `n` grid.
    pub monotone: bool,
}

/// Averages of `V^E` with oracle conditional variances along a grid of sample sizes.
pub fn ve_convergence_experiment(
    dgp: &DgpSpec,
    m: usize,
    n_grid: &[usize],
    replications: usize,
    seed: u64,
    constants: &ConstantsTable,
) -> Result<VeTrend> {
    if n_grid.is_empty() {
        return Err(Error::EmptyInput("sample-size grid"));
    }
    if replications < 2 {
        return Err(Error::Config("at least two replications are required".into()));
    }
    let alpha = lookup_alpha_md(m, dgp.d, constants)?;
    let pop = population_sigma2_md(dgp, m, alpha.value)?;
    let mut grid = n_grid.to_vec();
    grid.sort_unstable();
    let mut rows = Vec::with_capacity(grid.len());
    for &n in &grid {
        let n_seed = derive_seed(seed, n as u64);
        let values: Vec<f64> = (0..replications)
            .into_par_iter()
            .map(|r| -> Result<f64> {
                let sample = dgp.simulate(n, m, &mut stream(n_seed, r as u64))?;
                let data = &sample.data;
                let matches = find_matches(data, m, MatchMetric::Euclidean)?;
                let s: Vec<f64> = (0..data.n()).map(|i| dgp.sigma_sq(data.treated(i), data.row(i))).collect();
                Ok(v_e(&matches, &s))
            })
            .collect::<Result<_>>()?;
        let k = values.len() as f64;
        let mean = pairwise_sum(&values) / k;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        rows.push(VeRow {
            n,
            seed: n_seed,
            mean_v_e: mean,
            se: (var / k).sqrt(),
            relative_gap: (mean - pop.ve_limit) / pop.ve_limit,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].relative_gap.abs() <= w[0].relative_gap.abs());
    Ok(VeTrend {
        dgp: dgp.name.clone(),
        m,
        d: dgp.d,
        replications,
        limit: pop.ve_limit,
        rows,
        monotone,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub dgp: String,
    pub m: usize,
    pub n: usize,
    pub replications: usize,
    pub level: f64,
    pub seed: u64,
    pub population: PopulationVariance,
    pub coverage_oracle: f64,
    pub coverage_plugin: Option<f64>,
    /// `level -/+ 3 sqrt(level (1 - level) / replications)`.
    pub band: (f64, f64),
    pub in_band: bool,
    pub z_mean: f64,
    pub z_variance: f64,
    pub kolmogorov_distance: f64,
    pub max_abs_residual: f64,
    pub mean_b_hat: f64,
    pub mean_b_m: f64,
}

/// Kolmogorov distance between the empirical law of `z` and the standard normal.
pub fn kolmogorov_distance(z: &[f64]) -> f64 {
    let mut s = z.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf(v);
            ((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Coverage of normal intervals built from the population variance (and optionally
/// from the plug-in), with bias correction of the DGP's polynomial degree.
#[allow(clippy::too_many_arguments)]
pub fn clt_coverage_experiment(
    dgp: &DgpSpec,
    m: usize,
    n: usize,
    replications: usize,
    level: f64,
    seed: u64,
    constants: &ConstantsTable,
    plugin: bool,
) -> Result<CoverageReport> {
    if replications < 2 {
        return Err(Error::Config("at least two replications are required".into()));
    }
    let ctx = ReplicationContext::new(dgp, m, n, level, constants, plugin)?;
    let outcomes = ctx.run_all(seed, replications)?;
    let r = outcomes.len() as f64;
    let share = |f: &dyn Fn(&ReplicationOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / r;
    let coverage_oracle = share(&|o| o.ci_hit_oracle);
    let coverage_plugin = plugin.then(|| share(&|o| o.ci_hit_plugin == Some(true)));
    let z: Vec<f64> = outcomes.iter().map(|o| o.z_oracle).collect();
    let z_mean = pairwise_sum(&z) / r;
    let z_variance = z.iter().map(|v| (v - z_mean).powi(2)).sum::<f64>() / (r - 1.0);
    let half = 3.0 * (level * (1.0 - level) / r).sqrt();
    let band = (level - half, level + half);
    Ok(CoverageReport {
        dgp: dgp.name.clone(),
        m,
        n,
        replications,
        level,
        seed,
        population: ctx.population,
        coverage_oracle,
        coverage_plugin,
        band,
        in_band: band.0 <= coverage_oracle && coverage_oracle <= band.1,
        z_mean,
        z_variance,
        kolmogorov_distance: kolmogorov_distance(&z),
        max_abs_residual: outcomes.iter().map(|o| o.residual.abs()).fold(0.0, f64::max),
        mean_b_hat: outcomes.iter().map(|o| o.b_hat).sum::<f64>() / r,
        mean_b_m: outcomes.iter().map(|o| o.b_m).sum::<f64>() / r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{ConstantEstimate, ConstantKind, Indices};
    use crate::simulation::dgp::{preset, AdditivePolynomial};

    fn table() -> ConstantsTable {
        let mut t = ConstantsTable::new();
        t.insert(ConstantEstimate::closed_form(ConstantKind::AlphaD, Indices::alpha_d(2), 1.28));
        t
    }

    #[test]
    fn decomposition_is_exact() {
        for name in super::super::dgp::preset_names() {
            let p = preset(name).unwrap();
            for seed in 0..3 {
                let r = decomposition_check(&p, 2, 300, seed).unwrap();
                assert!(r.residual.abs() <= 1e-10, "{name}: {r:?}");
            }
        }
    }

    #[test]
    fn noiseless_and_constant_mean_cases() {
        let mut p = preset("linear-constant-e").unwrap();
        p.sigma0_sq = AdditivePolynomial::constant(1e-300, 2);
        p.sigma1_sq = AdditivePolynomial::constant(1e-300, 2);
        let sample = p.simulate(200, 1, &mut stream(4, 0)).unwrap();
        let noiseless = SimulatedSample {
            data: sample.data.with_outcomes((0..200).map(|i| if sample.data.treated(i) { sample.mu1[i] } else { sample.mu0[i] }).collect()).unwrap(),
            eps: vec![0.0; 200],
            ..sample
        };
        let mr = find_matches(&noiseless.data, 1, MatchMetric::Euclidean).unwrap();
        assert_eq!(decompose(&p, &noiseless, &mr, 2.0).e_m, 0.0);

        let mut q = preset("linear-constant-e").unwrap();
        q.mu0 = AdditivePolynomial::constant(0.5, 2);
        q.mu1 = AdditivePolynomial::constant(1.5, 2);
        assert_eq!(decomposition_check(&q, 1, 200, 1).unwrap().b_m, 0.0);
    }

    #[test]
    fn replay_reproduces_a_replication() {
        let p = preset("nonlinear-logistic-e").unwrap();
        let t = table();
        let ctx = ReplicationContext::new(&p, 1, 200, 0.95, &t, true).unwrap();
        let all = ctx.run_all(9, 6).unwrap();
        assert_eq!(ctx.run(9, 4).unwrap(), all[4]);
    }

    #[test]
    fn ve_trend_is_independent_of_workers() {
        let p = preset("linear-constant-e").unwrap();
        let t = table();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ve_convergence_experiment(&p, 1, &[100, 200], 20, 5, &t).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn kolmogorov_distance_of_quantiles_is_small() {
        let z: Vec<f64> = (1..1000)
            .map(|i| {
                let u = i as f64 / 1000.0;
                statrs::distribution::ContinuousCDF::inverse_cdf(&statrs::distribution::Normal::new(0.0, 1.0).unwrap(), u)
            })
            .collect();
        assert!(kolmogorov_distance(&z) < 0.002);
    }
}
