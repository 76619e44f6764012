use super::estimate::{ConstantEstimate, ConstantKind, Indices, Method};
use crate::error::{Error, Result};
use crate::geometry::{fill_unit_ball, BallGeometry};
use crate::rng::{chunked, MeanAccumulator};

const CHUNK: usize = 1 << 16;

/// `T = lambda(B(e1, 1) ∪ B(D, |D|)) / lambda(B(0, 1))` for a point `D` of the unit ball.
///
/// Always lies in `[1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TStatistic(f64);

impl TStatistic {
    pub fn from_point(geom: &BallGeometry, point: &[f64]) -> Self {
        let r2: f64 = point.iter().map(|x| x * x).sum();
        let r = r2.sqrt();
        // |e1 - D|^2 = 1 - 2 D_1 + |D|^2
        let t = (1.0 - 2.0 * point[0] + r2).max(0.0).sqrt();
        let w = geom.union_volume(1.0, r, t) / geom.unit_volume();
        TStatistic(w.clamp(1.0, 2.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Monte Carlo estimate of `alpha(d) = E[2 / T^2]` with its standard error.
pub fn alpha_d_monte_carlo(d: usize, n_samples: u64, seed: u64) -> Result<ConstantEstimate> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    if n_samples < 1000 {
        return Err(Error::Domain(format!(
            "alpha(d) Monte Carlo needs at least 1000 samples, got {n_samples}"
        )));
    }
    let geom = BallGeometry::new(d);
    let parts = chunked(n_samples as usize, CHUNK, seed, |rng, _, len| {
        let mut acc = MeanAccumulator::default();
        let mut point = vec![0.0; d];
        for _ in 0..len {
            fill_unit_ball(&mut point, rng);
            let t = TStatistic::from_point(&geom, &point).value();
            acc.push(2.0 / (t * t));
        }
        acc
    });
    let acc = parts
        .iter()
        .fold(MeanAccumulator::default(), |a, b| a.merge(b));
    Ok(ConstantEstimate {
        kind: ConstantKind::AlphaD,
        indices: Indices::alpha_d(d),
        value: acc.mean(),
        error_bound: acc.std_error(),
        method: Method::MonteCarlo,
        n_samples: Some(n_samples),
        grid_size: None,
        seed: Some(seed),
    })
}

/// `alpha(1) = 3/2`: `T = 1` when `D >= 0` and `T = 1 + |D|` otherwise.
pub fn alpha_one() -> ConstantEstimate {
    ConstantEstimate::closed_form(ConstantKind::AlphaD, Indices::alpha_d(1), 1.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_statistic_bounds() {
        let g = BallGeometry::new(3);
        for p in [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [-0.99, 0.0, 0.0], [0.0, 0.7, -0.7]] {
            let t = TStatistic::from_point(&g, &p).value();
            assert!((1.0..=2.0).contains(&t));
        }
        // D = -e1 gives two unit balls tangent at the origin
        let t = TStatistic::from_point(&g, &[-1.0, 0.0, 0.0]).value();
        assert!((t - 2.0).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_value() {
        let e = alpha_d_monte_carlo(1, 200_000, 3).unwrap();
        assert!((e.value - 1.5).abs() < 4.0 * e.error_bound, "{e:?}");
        assert!((0.5..=2.0).contains(&e.value));
    }

    #[test]
    fn deterministic_given_seed() {
        let a = alpha_d_monte_carlo(2, 50_000, 9).unwrap();
        let b = alpha_d_monte_carlo(2, 50_000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_small_samples() {
        assert!(alpha_d_monte_carlo(2, 10, 1).is_err());
        assert!(alpha_d_monte_carlo(0, 10_000, 1).is_err());
    }
}
