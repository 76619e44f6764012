//! The `M`-nearest-neighbor matching estimator and its variance plug-in.
//!
//! Matching is with replacement against the opposite treatment group. Ties in
//! distance go to the smallest row index.

mod bias;
mod dataset;
mod estimator;
mod matches;
mod propensity;
mod report;
mod variance;

pub use bias::{bias_correction, bias_term, fit_group, FittedRegression, RegressionSpec};
pub use dataset::Dataset;
pub use estimator::{tau_hat, tau_hat_imputation, tau_hat_weighting, unit_weights};
pub use matches::{find_matches, MatchMetric, MatchResult};
pub use propensity::{
    estimate_propensity, logistic_coefficients, Oracle, PropensitySource, PropensitySpec, ETA,
};
pub use report::{confidence_interval, estimate, EstimateOptions, EstimateReport};
pub use variance::{
    conditional_variance_nn, limiting_variance_weight, sigma2_md_plugin, v_e, SigmaSpec, VTauSpec,
    VarianceComponents, VarianceOptions,
};
