use std::collections::BinaryHeap;

use rand::Rng;

use super::density::{DensityPairSpec, Metric};
use super::index::GridIndex;
use crate::geometry::{fill_unit_sphere, unit_ball_volume};

/// Whether `z` lies in the `M`-catchment area of `x`: fewer than `M` of `others` are
/// strictly closer to `z` than `x` is. `others` is row-major and excludes `x`.
pub fn in_catchment(z: &[f64], x: &[f64], others: &[f64], m: usize, metric: Metric) -> bool {
    let r2 = metric.dist_sq(x, z);
    others
        .chunks_exact(z.len())
        .filter(|p| metric.dist_sq(p, z) < r2)
        .take(m)
        .count()
        < m
}

/// Unbiased estimates of a mean and of its square from exchangeable draws:
/// the sample mean and `(S^2 - sum a^2) / (k (k - 1))`.
pub fn mean_and_pair_statistic(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let s: f64 = values.iter().sum();
    let sq: f64 = values.iter().map(|v| v * v).sum();
    (s / k, (s * s - sq) / (k * (k - 1.0)))
}

/// Neighbors of the conditioned point, probes and the metric for one replication.
#[derive(Debug, Clone)]
pub struct CatchmentSample {
    pub dim: usize,
    pub metric: Metric,
    pub x: Vec<f64>,
    /// `X_2, ..., X_n`, drawn from `nu_0`, row-major.
    pub others: Vec<f64>,
    /// Probes drawn from `nu_1`, row-major.
    pub probes: Vec<f64>,
}

impl CatchmentSample {
    pub fn draw<R: Rng + ?Sized>(spec: &DensityPairSpec, n: usize, m_probes: usize, rng: &mut R) -> Self {
        Self {
            dim: spec.d,
            metric: spec.metric(),
            x: spec.point(),
            others: spec.sample(false, n.saturating_sub(1), rng),
            probes: spec.sample(true, m_probes, rng),
        }
    }
}

/// Probe estimate of `nu_1(A_M(x))` and a pair U-statistic for its square.
///
/// Requires at least two probes.
pub fn catchment_measure_estimate(sample: &CatchmentSample, m: usize) -> (f64, f64) {
    let d = sample.dim;
    assert!(sample.probes.len() >= 2 * d, "at least two probes are required");
    let index = GridIndex::new(&sample.others, d, sample.metric);
    let hits: Vec<f64> = sample
        .probes
        .chunks_exact(d)
        .map(|z| {
            let r2 = sample.metric.dist_sq(&sample.x, z);
            f64::from(u8::from(index.count_closer(z, r2, m) < m))
        })
        .collect();
    mean_and_pair_statistic(&hits)
}

/// Ray-based estimate of `nu_1(A_M(x))` and its square.
///
/// The catchment area is star-shaped about `x`: along direction `theta` a point `p`
/// becomes strictly closer than `x` beyond `|p - x|^2 / (2 theta . (p - x))`, so the
/// area's radial extent is the `M`-th smallest such threshold `rho(theta)`. Then
/// `c_d rho^d f_1(x + rho U^{1/d} theta)` is unbiased for `nu_1(A_M(x))` with `theta`
/// uniform on the sphere and `U` uniform; independent rays give the pair statistic.
pub struct RayEstimator<'a> {
    spec: &'a DensityPairSpec,
    x: Vec<f64>,
    unit_volume: f64,
    uniform_target: bool,
    /// Displacements from `x`, sorted by length.
    disp: Vec<f64>,
    half_len: Vec<f64>,
    len_sq: Vec<f64>,
}

/// Extent beyond which minimum-image rays are no longer valid on the torus.
const TORUS_REACH: f64 = 0.25;

impl<'a> RayEstimator<'a> {
    pub fn new(spec: &'a DensityPairSpec, others: &[f64]) -> Self {
        let d = spec.d;
        let x = spec.point();
        let metric = spec.metric();
        let mut rows: Vec<(f64, Vec<f64>)> = others
            .chunks_exact(d)
            .map(|p| {
                let mut v = vec![0.0; d];
                metric.displacement(p, &x, &mut v);
                (v.iter().map(|c| c * c).sum(), v)
            })
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut disp = Vec::with_capacity(others.len());
        let mut len_sq = Vec::with_capacity(rows.len());
        for (l, v) in rows {
            disp.extend_from_slice(&v);
            len_sq.push(l);
        }
        Self {
            spec,
            uniform_target: spec.density_floor(true) == 1.0,
            unit_volume: unit_ball_volume(d),
            half_len: len_sq.iter().map(|l| 0.5 * l.sqrt()).collect(),
            len_sq,
            disp,
            x,
        }
    }

    /// `rho(theta)`, or `None` when the ray leaves the region where it is valid.
    pub fn radius(&self, theta: &[f64], m: usize, heap: &mut BinaryHeap<OrdF64>) -> Option<f64> {
        let d = self.spec.d;
        heap.clear();
        for (i, p) in self.disp.chunks_exact(d).enumerate() {
            if heap.len() == m && self.half_len[i] >= heap.peek().map_or(f64::INFINITY, |r| r.0) {
                break;
            }
            let proj: f64 = p.iter().zip(theta).map(|(a, b)| a * b).sum();
            if proj > 0.0 {
                let rho = self.len_sq[i] / (2.0 * proj);
                if heap.len() < m {
                    heap.push(OrdF64(rho));
                } else if rho < heap.peek().expect("full heap").0 {
                    heap.pop();
                    heap.push(OrdF64(rho));
                }
            }
        }
        let rho = if heap.len() == m { heap.peek().expect("full heap").0 } else { f64::INFINITY };
        match self.spec.metric() {
            Metric::Torus => (rho < TORUS_REACH).then_some(rho),
            Metric::Euclidean => {
                // clip at the cube boundary
                let exit = theta
                    .iter()
                    .zip(&self.x)
                    .map(|(&t, &xc)| {
                        if t > 0.0 {
                            (1.0 - xc) / t
                        } else if t < 0.0 {
                            xc / -t
                        } else {
                            f64::INFINITY
                        }
                    })
                    .fold(f64::INFINITY, f64::min);
                Some(rho.min(exit))
            }
        }
    }

    /// One unbiased draw per ray; `None` if any ray is out of range.
    pub fn draws<R: Rng + ?Sized>(&self, m: usize, rays: usize, rng: &mut R) -> Option<Vec<f64>> {
        let d = self.spec.d;
        let mut theta = vec![0.0; d];
        let mut z = vec![0.0; d];
        let mut heap = BinaryHeap::with_capacity(m + 1);
        let mut out = Vec::with_capacity(rays);
        for _ in 0..rays {
            fill_unit_sphere(&mut theta, rng);
            let rho = self.radius(&theta, m, &mut heap)?;
            let mut value = self.unit_volume * rho.powi(d as i32);
            if !self.uniform_target {
                let r = rho * rng.gen::<f64>().powf(1.0 / d as f64);
                for c in 0..d {
                    z[c] = self.x[c] + r * theta[c];
                }
                value *= self.spec.density(true, &z);
            }
            out.push(value);
        }
        Some(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrdF64(pub f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn definition_examples() {
        assert!(in_catchment(&[0.3], &[0.0], &[], 1, Metric::Euclidean));
        assert!(in_catchment(&[0.2], &[0.0], &[0.5], 1, Metric::Euclidean));
        // exactly M strictly closer points
        assert!(!in_catchment(&[0.4], &[0.0], &[0.5, 0.45, 0.9], 2, Metric::Euclidean));
        assert!(in_catchment(&[0.4], &[0.0], &[0.5, 0.45, 0.9], 3, Metric::Euclidean));
    }

    #[test]
    fn pair_statistic_matches_enumeration() {
        let a = [1.0, 0.0, 1.0, 1.0, 0.0];
        let (_, u) = mean_and_pair_statistic(&a);
        let mut s = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    s += a[i] * a[j];
                }
            }
        }
        assert!((u - s / 20.0).abs() < 1e-15);
    }

    #[test]
    fn everything_is_caught_without_competition() {
        let spec = DensityPairSpec::uniform_torus(2);
        let mut rng = stream(5, 0);
        let s = CatchmentSample::draw(&spec, 1, 50, &mut rng);
        assert_eq!(catchment_measure_estimate(&s, 1), (1.0, 1.0));
        // three competitors can all be closer when M = 3, never when M = 4
        let s = CatchmentSample::draw(&spec, 4, 50, &mut rng);
        assert_eq!(catchment_measure_estimate(&s, 4).0, 1.0);
        assert!(catchment_measure_estimate(&s, 3).0 < 1.0);
    }

    #[test]
    fn monotone_in_m() {
        let spec = DensityPairSpec::uniform_torus(2);
        let mut rng = stream(6, 0);
        let s = CatchmentSample::draw(&spec, 40, 400, &mut rng);
        let mut last = 0.0;
        for m in 1..6 {
            let (nu, _) = catchment_measure_estimate(&s, m);
            assert!(nu >= last);
            last = nu;
        }
    }

    #[test]
    fn ray_radius_agrees_with_membership() {
        // points just inside/outside rho(theta) along the ray must switch membership
        let mut rng = stream(8, 0);
        for (spec, m) in [(DensityPairSpec::uniform_torus(2), 2), (DensityPairSpec::uniform_cube(3), 1), (DensityPairSpec::uniform_torus(1), 3)] {
            let others = spec.sample(false, 300, &mut rng);
            let est = RayEstimator::new(&spec, &others);
            let x = spec.point();
            let mut heap = BinaryHeap::new();
            let mut theta = vec![0.0; spec.d];
            for _ in 0..200 {
                fill_unit_sphere(&mut theta, &mut rng);
                let rho = est.radius(&theta, m, &mut heap).unwrap();
                let at = |r: f64| -> Vec<f64> { x.iter().zip(&theta).map(|(a, t)| a + r * t).collect() };
                assert!(in_catchment(&at(rho * 0.999), &x, &others, m, spec.metric()));
                let outside = at(rho * 1.001);
                if outside.iter().all(|v| (0.0..=1.0).contains(v)) {
                    assert!(!in_catchment(&outside, &x, &others, m, spec.metric()));
                }
            }
        }
    }
}
