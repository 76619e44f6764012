use serde::Serialize;

use super::density::{DensityPairSpec, Metric};
use crate::error::{Error, Result};
use crate::geometry::{fill_unit_ball, BallGeometry};
use crate::rng::{chunked, stream, MeanAccumulator};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRow {
    pub v: f64,
    /// Half-width of the histogram bin centered at `v`.
    pub half_width: f64,
    pub f_v1: f64,
    pub f_v1_se: f64,
    pub f_v_over_v: f64,
    pub f_v_over_v_se: f64,
}

/// `nu_0`-measures of balls and of unions of two balls.
struct Nu0<'a> {
    spec: &'a DensityPairSpec,
    geometry: BallGeometry,
    uniform: bool,
    /// Fixed unit-ball nodes for numeric integration when `f_0` is not flat.
    nodes: Vec<f64>,
}

const INTEGRATION_NODES: usize = 2048;

impl<'a> Nu0<'a> {
    fn new(spec: &'a DensityPairSpec) -> Self {
        let uniform = spec.density_floor(false) == 1.0;
        let mut nodes = Vec::new();
        if !uniform {
            let mut rng = stream(0x6e75_305f_6e6f_6465, 0);
            nodes = vec![0.0; INTEGRATION_NODES * spec.d];
            for row in nodes.chunks_exact_mut(spec.d) {
                fill_unit_ball(row, &mut rng);
            }
        }
        Self {
            spec,
            geometry: BallGeometry::new(spec.d),
            uniform,
            nodes,
        }
    }

    /// Mean of `f_0` over `B(c, r)` restricted to points satisfying `keep`.
    fn mean_density(&self, c: &[f64], r: f64, keep: impl Fn(&[f64]) -> bool) -> f64 {
        let d = self.spec.d;
        let mut z = vec![0.0; d];
        let mut total = 0.0;
        for u in self.nodes.chunks_exact(d) {
            for k in 0..d {
                z[k] = c[k] + r * u[k];
            }
            if keep(&z) {
                total += self.spec.density(false, &z);
            }
        }
        total / INTEGRATION_NODES as f64
    }

    fn ball(&self, c: &[f64], r: f64) -> f64 {
        let vol = self.geometry.unit_volume() * r.powi(self.spec.d as i32);
        if self.uniform {
            vol
        } else {
            vol * self.mean_density(c, r, |_| true)
        }
    }

    fn union(&self, c1: &[f64], r1: f64, c2: &[f64], r2: f64) -> f64 {
        let t = Metric::Euclidean.dist_sq(c1, c2).sqrt();
        if self.uniform {
            return self.geometry.union_volume(r1, r2, t);
        }
        let (cs, rs, cl, rl) = if r1 <= r2 { (c1, r1, c2, r2) } else { (c2, r2, c1, r1) };
        let rl2 = rl * rl;
        let overlap = self.geometry.unit_volume()
            * rs.powi(self.spec.d as i32)
            * self.mean_density(cs, rs, |z| Metric::Euclidean.dist_sq(z, cl) < rl2);
        self.ball(c1, r1) + self.ball(c2, r2) - overlap
    }
}

/// Histogram estimates of the densities of `V_1 = nu_0(B(Z_1, |Z_1 - x|))` and of
/// `V = nu_0(B(Z_1, |Z_1 - x|) U B(Z_2, |Z_2 - x|))` near zero, with `Z_1, Z_2 ~ nu_1`.
///
/// Both variables are small only when the `Z`s are close to `x`, so `Z`s are drawn
/// uniformly from a ball around `x` that contains every relevant configuration, and
/// reweighted by `f_1`. Bins are `[v/2, 3v/2]`.
pub fn lemma51_density_check(spec: &DensityPairSpec, v_grid: &[f64], n_samples: usize, seed: u64) -> Result<Vec<DensityRow>> {
    spec.validate()?;
    if v_grid.is_empty() {
        return Err(Error::EmptyInput("v grid"));
    }
    if let Some(v) = v_grid.iter().find(|v| !(**v > 0.0 && **v <= 0.1)) {
        return Err(Error::Domain(format!("grid values must lie in (0, 0.1], got {v}")));
    }
    if n_samples < 2 {
        return Err(Error::Domain("at least two samples are required".into()));
    }
    let d = spec.d;
    let x = spec.point();
    let geometry = BallGeometry::new(d);
    let v_max = v_grid.iter().copied().fold(0.0, f64::max) * 1.5;
    // V_1 >= floor(f_0) c_d |Z_1 - x|^d, so V_1 <= v_max forces Z_1 into this ball
    let reach = (v_max / (geometry.unit_volume() * spec.density_floor(false))).powf(1.0 / d as f64);
    let interior = x.iter().fold(f64::INFINITY, |a, &c| a.min(c).min(1.0 - c));
    let limit = if spec.metric() == Metric::Torus { 0.25 } else { interior / 2.0 };
    if reach >= limit {
        return Err(Error::UnsupportedSpec(format!(
            "v grid too coarse for d={d}: sampling radius {reach:.3} exceeds {limit:.3}"
        )));
    }
    let proposal = geometry.unit_volume() * reach.powi(d as i32);
    let nu0 = Nu0::new(spec);
    let bins: Vec<(f64, f64)> = v_grid.iter().map(|&v| (v, 0.5 * v)).collect();

    let parts = chunked(n_samples, 1 << 14, seed, |rng, _, len| {
        let mut acc = vec![(MeanAccumulator::default(), MeanAccumulator::default()); bins.len()];
        let (mut u1, mut u2) = (vec![0.0; d], vec![0.0; d]);
        let (mut z1, mut z2) = (vec![0.0; d], vec![0.0; d]);
        for _ in 0..len {
            fill_unit_ball(&mut u1, rng);
            fill_unit_ball(&mut u2, rng);
            for k in 0..d {
                z1[k] = x[k] + reach * u1[k];
                z2[k] = x[k] + reach * u2[k];
            }
            let r1 = reach * crate::geometry::norm(&u1);
            let r2 = reach * crate::geometry::norm(&u2);
            let w1 = spec.density(true, &z1) * proposal;
            let w2 = spec.density(true, &z2) * proposal;
            let v1 = nu0.ball(&z1, r1);
            let need_union = bins.iter().any(|(v, h)| v1 < v + h);
            let v = if need_union { nu0.union(&z1, r1, &z2, r2) } else { f64::INFINITY };
            for ((c, h), (a1, a)) in bins.iter().zip(acc.iter_mut()) {
                let in1 = (v1 - c).abs() < *h;
                a1.push(if in1 { w1 / (2.0 * h) } else { 0.0 });
                let inv = (v - c).abs() < *h;
                a.push(if inv { w1 * w2 / (2.0 * h * c) } else { 0.0 });
            }
        }
        acc
    });
    let mut total = vec![(MeanAccumulator::default(), MeanAccumulator::default()); bins.len()];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.0 = t.0.merge(&p.0);
            t.1 = t.1.merge(&p.1);
        }
    }
    Ok(bins
        .iter()
        .zip(total)
        .map(|((v, h), (a1, a))| DensityRow {
            v: *v,
            half_width: *h,
            f_v1: a1.mean(),
            f_v1_se: a1.std_error(),
            f_v_over_v: a.mean(),
            f_v_over_v_se: a.std_error(),
        })
        .collect())
}
