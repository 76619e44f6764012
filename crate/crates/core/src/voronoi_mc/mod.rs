//! Monte Carlo moments of the catchment-area measure of a fixed point.
//!
//! The catchment area `A_M(x)` of `x` among points `X_2, ..., X_n ~ nu_0` is the set of
//! locations having `x` among their `M` nearest points. Its `nu_1`-measure, scaled by
//! `n` and `n^2`, has first and second moments `M f_1/f_0` and `alpha(M, d) (f_1/f_0)^2`
//! in the limit, which gives a brute-force route to `alpha(M, d)`.
//!
//! The conditioned point is not counted among its own competitors.

mod catchment;
mod density;
mod experiment;
mod index;
mod lemma51;

pub use catchment::{
    catchment_measure_estimate, in_catchment, mean_and_pair_statistic, CatchmentSample, OrdF64, RayEstimator,
};
pub use density::{DensityKind, DensityPairSpec, Metric};
pub use experiment::{
    jackknife_se, lemma53_diagnostic, theorem31_experiment, BoundednessReport, CatchmentEstimator, MomentEstimate,
    Theorem31Config,
};
pub use index::{count_closer_naive, GridIndex};
pub use lemma51::{lemma51_density_check, DensityRow};
