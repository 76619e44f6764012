use super::dataset::Dataset;
use super::matches::MatchResult;
use crate::rng::pairwise_sum;

/// Per-unit weight `(2W_i - 1)(1 + K_M(i)/M)`.
pub fn unit_weights(data: &Dataset, matches: &MatchResult) -> Vec<f64> {
    let m = matches.m as f64;
    (0..data.n())
        .map(|i| {
            let sign = if data.treated(i) { 1.0 } else { -1.0 };
            sign * (1.0 + matches.counts[i] as f64 / m)
        })
        .collect()
}

/// Weighting form of the estimator.
pub fn tau_hat_weighting(data: &Dataset, matches: &MatchResult) -> f64 {
    let terms: Vec<f64> = unit_weights(data, matches)
        .iter()
        .zip(data.y())
        .map(|(w, y)| w * y)
        .collect();
    pairwise_sum(&terms) / data.n() as f64
}

/// Imputation form `(1/n) sum (Y_i(1)^ - Y_i(0)^)`.
pub fn tau_hat_imputation(matches: &MatchResult) -> f64 {
    let terms: Vec<f64> = matches
        .y1_hat
        .iter()
        .zip(&matches.y0_hat)
        .map(|(a, b)| a - b)
        .collect();
    pairwise_sum(&terms) / terms.len() as f64
}

/// The matching estimator. Both algebraic forms are evaluated and must agree.
pub fn tau_hat(data: &Dataset, matches: &MatchResult) -> f64 {
    let w = tau_hat_weighting(data, matches);
    let imp = tau_hat_imputation(matches);
    let scale = data.y().iter().fold(1.0f64, |a, y| a.max(y.abs()));
    debug_assert!(
        (w - imp).abs() <= 1e-12 * scale * (1.0 + matches.m as f64),
        "weighting form {w} != imputation form {imp}"
    );
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{find_matches, MatchMetric};

    fn four_point() -> Dataset {
        Dataset::new(
            vec![0.0, 1.0, 3.0, 5.0],
            vec![false, false, true, true],
            vec![0.0, 2.0, 0.9, 3.0],
            1,
        )
        .unwrap()
    }

    #[test]
    fn four_point_both_forms() {
        let d = four_point();
        let r = find_matches(&d, 1, MatchMetric::Euclidean).unwrap();
        assert_eq!(tau_hat_weighting(&d, &r), 3.5);
        assert_eq!(tau_hat_imputation(&r), 3.5);
        assert_eq!(tau_hat(&d, &r), 3.5);
    }

    #[test]
    fn constant_outcome_gives_zero() {
        let d = four_point().with_outcomes(vec![7.25; 4]).unwrap();
        let r = find_matches(&d, 1, MatchMetric::Euclidean).unwrap();
        assert_eq!(tau_hat_imputation(&r), 0.0);
        assert!(tau_hat(&d, &r).abs() < 1e-14);
    }

    #[test]
    fn label_swap_negates() {
        let d = four_point();
        let s = d.with_treatments(d.w().iter().map(|w| !w).collect()).unwrap();
        let a = tau_hat(&d, &find_matches(&d, 1, MatchMetric::Euclidean).unwrap());
        let b = tau_hat(&s, &find_matches(&s, 1, MatchMetric::Euclidean).unwrap());
        assert_eq!(a, -b);
    }
}
