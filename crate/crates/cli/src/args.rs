use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Seed used by stochastic subcommands when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20240601;

pub const MAX_D: usize = 20;
pub const MAX_M: usize = 15;

#[derive(Debug, Parser)]
#[command(
    name = "matchvar",
    version,
    about = "Nearest-neighbor matching estimator with its closed-form limiting variance",
    after_help = "Exit codes: 0 success, 2 invalid input or configuration, 3 method/dimension mismatch, \
                  4 a group has fewer than M units, 5 a pass/fail check failed."
)]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute alpha(d) and alpha(M, d), optionally updating a constants cache.
    Constants(ConstantsArgs),
    /// Estimate the average treatment effect from a CSV file.
    Estimate(EstimateArgs),
    /// Run a simulation check on a data-generating process.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo check on catchment-area moments.
    Verify(VerifyArgs),
}

/// Comma-separated integers and inclusive ranges, e.g. `1-3,5`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct IndexList(pub Vec<usize>);

impl FromStr for IndexList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let bad = || format!("invalid list entry {part:?}");
            match part.split_once('-') {
                Some((a, b)) => {
                    let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                    if a > b {
                        return Err(format!("empty range {part:?}"));
                    }
                    out.extend(a..=b);
                }
                None => out.push(part.parse().map_err(|_| bad())?),
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(Self(out))
    }
}

impl fmt::Display for IndexList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&s.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Mc,
    Quadrature,
    ClosedForm,
    All,
}

#[derive(Debug, Args, Serialize)]
pub struct ConstantsArgs {
    /// Dimensions, as a list or range (1-20).
    #[arg(long, default_value = "2")]
    pub d: IndexList,
    /// Numbers of matches, as a list or range (1-15).
    #[arg(long = "M", default_value = "1")]
    pub m: IndexList,
    /// Route: Monte Carlo, quadrature (d >= 2), closed form (d = 1), or every applicable one.
    #[arg(long, value_enum, default_value_t = MethodArg::All)]
    pub method: MethodArg,
    /// Monte Carlo sample size.
    #[arg(long, default_value_t = 10_000_000, value_parser = clap::value_parser!(u64).range(2..))]
    pub samples: u64,
    /// Master seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Coarsest quadrature nodes per axis.
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(8..=65536))]
    pub grid: u64,
    /// Constants cache (JSON) to read and update.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Ignore matching entries already in the cache.
    #[arg(long)]
    pub recompute: bool,
    /// Write a JSON record of the run here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropensityArg {
    Logistic,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricArg {
    Euclidean,
    InverseVariance,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    /// CSV with header Y,W,X_1..X_d.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of matches per unit.
    #[arg(long = "M", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: u64,
    /// Report the raw matching estimator only.
    #[arg(long)]
    pub no_bias_correction: bool,
    /// Polynomial degree of the bias-correction regression.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=5))]
    pub degree: u64,
    /// Skip the variance estimate and confidence interval.
    #[arg(long)]
    pub no_ci: bool,
    /// Confidence level.
    #[arg(long, default_value_t = 0.95, value_parser = parse_level)]
    pub level: f64,
    /// Constants cache (JSON); the bundled cache is used otherwise.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Compute alpha(M, d) by quadrature if the cache lacks it.
    #[arg(long)]
    pub compute_constants: bool,
    /// Compute alpha(M, d) by quadrature even if cached.
    #[arg(long)]
    pub recompute: bool,
    /// Coarsest quadrature nodes per axis, when constants are computed.
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(8..=65536))]
    pub grid: u64,
    /// Propensity model used by the variance estimate.
    #[arg(long, value_enum, default_value_t = PropensityArg::Logistic)]
    pub propensity: PropensityArg,
    /// Neighbors for the k-NN propensity (default ceil(sqrt(n))).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub knn_k: Option<u64>,
    /// Same-group neighbors in the conditional-variance estimate.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub j_var: u64,
    /// Matching distance; inverse-variance rescales each covariate by its standard deviation.
    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    pub metric: MetricArg,
    /// Write a JSON record of the run here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Coverage,
    Ve,
    Decomposition,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Shipped data-generating process.
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    pub preset: Option<String>,
    /// Data-generating process in TOML.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Interval coverage, V^E convergence in n, or the error decomposition identity.
    #[arg(long, value_enum, default_value_t = Check::Coverage)]
    pub check: Check,
    /// Number of matches per unit.
    #[arg(long = "M", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: u64,
    /// Sample size (coverage, decomposition).
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(2..))]
    pub n: u64,
    /// Sample sizes for the V^E trend.
    #[arg(long, default_value = "500,1000,2000,4000")]
    pub n_grid: IndexList,
    /// Replications.
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(2..))]
    pub reps: u64,
    /// Master seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Confidence level.
    #[arg(long, default_value_t = 0.95, value_parser = parse_level)]
    pub level: f64,
    /// Skip plug-in variance intervals (coverage).
    #[arg(long)]
    pub no_plugin: bool,
    /// Largest relative gap to the limit at the largest n (ve).
    #[arg(long, default_value_t = 0.03)]
    pub tolerance: f64,
    /// Rerun one replication of the coverage check and print it.
    #[arg(long, value_name = "REP")]
    pub replay: Option<u64>,
    /// Constants cache (JSON); the bundled cache is used otherwise.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Write a JSON record of the run here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Scaled first and second moments of the catchment measure.
    Thm31,
    /// Densities of the ball-measure variables near zero.
    Lemma51,
    /// Boundedness of the scaled moments along a sweep in n.
    Lemma53,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorArg {
    Rays,
    Probes,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Experiment to run.
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    /// Dimension (1-20).
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=MAX_D as u64))]
    pub d: u64,
    /// Number of matches (1-15).
    #[arg(long = "M", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=MAX_M as u64))]
    pub m: u64,
    /// Points per replication (thm31).
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(2..))]
    pub n: u64,
    /// Sample sizes of the sweep (lemma53).
    #[arg(long, default_value = "250,500,1000,2000")]
    pub n_grid: IndexList,
    /// Replications per sample size.
    #[arg(long, default_value_t = 4000, value_parser = clap::value_parser!(u64).range(2..))]
    pub reps: u64,
    /// Master seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Catchment-measure estimator: random rays, or probe points drawn from nu_1.
    #[arg(long, value_enum, default_value_t = EstimatorArg::Rays)]
    pub estimator: EstimatorArg,
    /// Rays per replication.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(2..))]
    pub rays: u64,
    /// Probes per replication.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(2..))]
    pub probes: u64,
    /// f_1(x)/f_0(x); 1 gives uniform densities on the torus.
    #[arg(long, default_value_t = 1.0)]
    pub ratio: f64,
    /// Bin centers (lemma51).
    #[arg(long, default_value = "0.001,0.004")]
    pub v_grid: FloatList,
    /// Importance samples (lemma51).
    #[arg(long, default_value_t = 2_000_000, value_parser = clap::value_parser!(u64).range(2..))]
    pub samples: u64,
    /// Relative tolerance of the pass/fail check [default: 0.05 for thm31, 0.10 for lemma51].
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Constants cache (JSON); the bundled cache is used otherwise.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Write a JSON record of the run here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("invalid number {p:?}")))
            .collect::<Result<_, _>>()
            .map(Self)
    }
}

impl fmt::Display for FloatList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(f64::to_string).collect();
        f.write_str(&s.join(","))
    }
}

fn parse_level(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("invalid number {s:?}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("level must lie in (0, 1), got {v}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_lists() {
        assert_eq!("1-3,5".parse::<IndexList>().unwrap().0, vec![1, 2, 3, 5]);
        assert_eq!("4, 2,2".parse::<IndexList>().unwrap().0, vec![2, 4]);
        assert!("3-1".parse::<IndexList>().is_err());
        assert!("a".parse::<IndexList>().is_err());
        assert_eq!("1-3,5".parse::<IndexList>().unwrap().to_string(), "1,2,3,5");
    }

    #[test]
    fn command_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
