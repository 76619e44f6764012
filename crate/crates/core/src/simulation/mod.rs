//! Simulation harness: data-generating processes, population variances and
//! replication experiments for the matching estimator.
//!
//! Replication `r` of master seed `s` draws from stream `r` of `s`, so any single
//! replication can be replayed and results do not depend on the worker count.

mod dgp;
mod experiments;
mod population;

pub use dgp::{
    preset, preset_names, AdditivePolynomial, CovariateLaw, DgpSpec, PropensityModel, SimulatedSample,
    PROPENSITY_MARGIN,
};
pub use experiments::{
    clt_coverage_experiment, decompose, decomposition_check, kolmogorov_distance, ve_convergence_experiment,
    CoverageReport, Decomposition, ReplicationContext, ReplicationOutcome, VeRow, VeTrend,
};
pub use population::{population_sigma2_md, PopulationVariance};
