use serde::{Deserialize, Serialize};

use super::catchment::{catchment_measure_estimate, mean_and_pair_statistic, CatchmentSample, RayEstimator};
use super::density::DensityPairSpec;
use crate::constants::{lookup_alpha_md, ConstantsTable};
use crate::error::{Error, Result};
use crate::rng::{chunked, pairwise_sum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CatchmentEstimator {
    /// Random rays from `x` (see [`RayEstimator`]).
    Rays { rays: usize },
    /// Membership indicators of probes drawn from `nu_1`.
    Probes { m_probes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem31Config {
    pub density: DensityPairSpec,
    pub m: usize,
    pub n: usize,
    pub replications: usize,
    pub estimator: CatchmentEstimator,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    /// `n E[nu_1(A_M(x))]`.
    pub first_moment: f64,
    pub first_se: f64,
    /// `n^2 E[nu_1(A_M(x))^2]`.
    pub second_moment: f64,
    pub second_se: f64,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub density_ratio: f64,
    pub replications: usize,
    pub seed: u64,
    pub estimator: CatchmentEstimator,
    /// Replications whose rays left the valid range and were redone with probes.
    pub probe_fallbacks: usize,
}

/// Delete-one jackknife standard error of a mean.
pub fn jackknife_se(values: &[f64]) -> f64 {
    let r = values.len();
    if r < 2 {
        return f64::NAN;
    }
    let total = pairwise_sum(values);
    let rf = r as f64;
    let loo: Vec<f64> = values.iter().map(|v| (total - v) / (rf - 1.0)).collect();
    let mean = pairwise_sum(&loo) / rf;
    let ss: Vec<f64> = loo.iter().map(|t| (t - mean).powi(2)).collect();
    ((rf - 1.0) / rf * pairwise_sum(&ss)).sqrt()
}

const CHUNK: usize = 16;
const FALLBACK_PROBES: usize = 512;

/// Moments of the scaled catchment measure over independent replications.
pub fn theorem31_experiment(config: &Theorem31Config) -> Result<MomentEstimate> {
    let spec = &config.density;
    spec.validate()?;
    let (m, n) = (config.m, config.n);
    if m == 0 || n <= m {
        return Err(Error::UnsupportedSpec(format!("need n > M >= 1, got n={n}, M={m}")));
    }
    if config.replications < 2 {
        return Err(Error::UnsupportedSpec("at least two replications are required".into()));
    }
    match config.estimator {
        CatchmentEstimator::Rays { rays } if rays < 2 => {
            return Err(Error::UnsupportedSpec("at least two rays per replication are required".into()))
        }
        CatchmentEstimator::Probes { m_probes } if m_probes < 2 => {
            return Err(Error::UnsupportedSpec("at least two probes per replication are required".into()))
        }
        _ => {}
    }
    let chunks = chunked(config.replications, CHUNK, config.seed, |rng, _, len| {
        let mut out = Vec::with_capacity(len);
        let mut fallbacks = 0;
        for _ in 0..len {
            let pair = match config.estimator {
                CatchmentEstimator::Probes { m_probes } => {
                    catchment_measure_estimate(&CatchmentSample::draw(spec, n, m_probes, rng), m)
                }
                CatchmentEstimator::Rays { rays } => {
                    let others = spec.sample(false, n - 1, rng);
                    let est = RayEstimator::new(spec, &others);
                    match est.draws(m, rays, rng) {
                        Some(v) => mean_and_pair_statistic(&v),
                        None => {
                            fallbacks += 1;
                            let sample = CatchmentSample {
                                dim: spec.d,
                                metric: spec.metric(),
                                x: spec.point(),
                                others,
                                probes: spec.sample(true, FALLBACK_PROBES, rng),
                            };
                            catchment_measure_estimate(&sample, m)
                        }
                    }
                }
            };
            out.push(pair);
        }
        (out, fallbacks)
    });
    let nf = n as f64;
    let mut first = Vec::with_capacity(config.replications);
    let mut second = Vec::with_capacity(config.replications);
    let mut probe_fallbacks = 0;
    for (rows, fb) in chunks {
        probe_fallbacks += fb;
        for (a, b) in rows {
            first.push(nf * a);
            second.push(nf * nf * b);
        }
    }
    let r = first.len() as f64;
    Ok(MomentEstimate {
        first_moment: pairwise_sum(&first) / r,
        first_se: jackknife_se(&first),
        second_moment: pairwise_sum(&second) / r,
        second_se: jackknife_se(&second),
        n,
        m,
        d: spec.d,
        density_ratio: spec.density_ratio(),
        replications: config.replications,
        seed: config.seed,
        estimator: config.estimator,
        probe_fallbacks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessReport {
    pub n_values: Vec<usize>,
    pub max_first: f64,
    pub max_second: f64,
    pub first_asymptote: f64,
    pub second_asymptote: Option<f64>,
    /// Set when a moment grows monotonically in `n` past three times its asymptote.
    pub divergent: bool,
}

/// Checks that scaled moments stay bounded along a sweep in `n`.
///
/// The first-moment limit is `M f_1(x)/f_0(x)`; the second-moment limit uses
/// `alpha(M, d)` from `constants` when available.
pub fn lemma53_diagnostic(runs: &[MomentEstimate], constants: &ConstantsTable) -> Result<BoundednessReport> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("moment estimates"));
    }
    let (m, d, ratio) = (runs[0].m, runs[0].d, runs[0].density_ratio);
    if runs.iter().any(|r| r.m != m || r.d != d || r.density_ratio != ratio) {
        return Err(Error::UnsupportedSpec("runs must share M, d and the density pair".into()));
    }
    let mut sorted: Vec<&MomentEstimate> = runs.iter().collect();
    sorted.sort_by_key(|r| r.n);
    let first: Vec<f64> = sorted.iter().map(|r| r.first_moment).collect();
    let second: Vec<f64> = sorted.iter().map(|r| r.second_moment).collect();
    let first_asymptote = m as f64 * ratio;
    let second_asymptote = lookup_alpha_md(m, d, constants).ok().map(|a| a.value * ratio * ratio);
    let grows = |v: &[f64], limit: f64| v.len() >= 2 && v.windows(2).all(|w| w[1] > w[0]) && v[v.len() - 1] > 3.0 * limit;
    let divergent = grows(&first, first_asymptote) || second_asymptote.is_some_and(|a| grows(&second, a));
    Ok(BoundednessReport {
        n_values: sorted.iter().map(|r| r.n).collect(),
        max_first: first.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_second: second.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        first_asymptote,
        second_asymptote,
        divergent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, reps: usize, estimator: CatchmentEstimator) -> Theorem31Config {
        Theorem31Config {
            density: DensityPairSpec::uniform_torus(2),
            m: 1,
            n,
            replications: reps,
            estimator,
            seed: 17,
        }
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let v = [1.0, 4.0, 2.0, 8.0, 5.0];
        let mean = 4.0;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!((jackknife_se(&v) - (var / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn independent_of_worker_count() {
        let cfg = config(300, 100, CatchmentEstimator::Rays { rays: 8 });
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| theorem31_experiment(&cfg).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn validates_arguments() {
        assert!(theorem31_experiment(&config(1, 10, CatchmentEstimator::Rays { rays: 4 })).is_err());
        assert!(theorem31_experiment(&config(100, 10, CatchmentEstimator::Probes { m_probes: 1 })).is_err());
    }

    fn fake(n: usize, first: f64, second: f64) -> MomentEstimate {
        MomentEstimate {
            first_moment: first,
            first_se: 0.0,
            second_moment: second,
            second_se: 0.0,
            n,
            m: 1,
            d: 2,
            density_ratio: 1.0,
            replications: 10,
            seed: 0,
            estimator: CatchmentEstimator::Rays { rays: 2 },
            probe_fallbacks: 0,
        }
    }

    #[test]
    fn boundedness_flags() {
        let table = ConstantsTable::new();
        assert!(lemma53_diagnostic(&[], &table).is_err());
        let ns = [250, 500, 1000, 2000];
        let flat: Vec<_> = ns.iter().map(|&n| fake(n, 1.0, 2.5)).collect();
        assert!(!lemma53_diagnostic(&flat, &table).unwrap().divergent);
        let inflated: Vec<_> = ns.iter().map(|&n| fake(n, (n as f64).ln(), 2.5)).collect();
        let report = lemma53_diagnostic(&inflated, &table).unwrap();
        assert!(report.divergent);
        assert_eq!(report.n_values, ns.to_vec());
    }
}
