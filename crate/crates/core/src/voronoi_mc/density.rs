use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// Minimum-image distance on the unit torus `[0, 1)^d`.
    Torus,
}

impl Metric {
    /// Displacement `p - x` under the metric.
    #[inline]
    pub fn displacement(self, p: &[f64], x: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(p).zip(x) {
            let mut v = a - b;
            if self == Metric::Torus {
                v -= v.round();
            }
            *o = v;
        }
    }

    #[inline]
    pub fn dist_sq(self, p: &[f64], x: &[f64]) -> f64 {
        p.iter()
            .zip(x)
            .map(|(a, b)| {
                let mut v = a - b;
                if self == Metric::Torus {
                    v -= v.round();
                }
                v * v
            })
            .sum()
    }
}

/// A pair of densities `f_0`, `f_1` on `[0, 1]^d` with an evaluation point `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityKind {
    /// `f_0 = f_1 = 1` on the torus.
    UniformTorus,
    /// `f_0 = f_1 = 1` on the cube, with boundary.
    UniformCube,
    /// Products of per-coordinate tents on the torus,
    /// `f_w(z) = prod_c (1 + a_w (1 - 4 delta(z_c, x_c)))`, where `delta` is the circular
    /// distance. Each factor is continuous, piecewise linear, integrates to one and
    /// peaks (or dips) at `x_c`, so `f_1(x) / f_0(x) = ((1 + a_1) / (1 + a_0))^d`.
    PiecewiseProduct { a0: f64, a1: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPairSpec {
    #[serde(flatten)]
    pub kind: DensityKind,
    pub d: usize,
    /// Evaluation point; defaults to the center of the cube.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
}

impl DensityPairSpec {
    pub fn uniform_torus(d: usize) -> Self {
        Self { kind: DensityKind::UniformTorus, d, x: None }
    }

    pub fn uniform_cube(d: usize) -> Self {
        Self { kind: DensityKind::UniformCube, d, x: None }
    }

    /// Uniform `f_0` and a tent-product `f_1` with `f_1(x) / f_0(x) = ratio`.
    pub fn with_ratio(d: usize, ratio: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(d));
        }
        let s = Self {
            kind: DensityKind::PiecewiseProduct { a0: 0.0, a1: ratio.powf(1.0 / d as f64) - 1.0 },
            d,
            x: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(x) = &self.x {
            if x.len() != self.d {
                return Err(Error::UnsupportedSpec(format!(
                    "evaluation point has {} coordinates, expected {}",
                    x.len(),
                    self.d
                )));
            }
            let inside = x.iter().all(|&v| if self.metric() == Metric::Torus { (0.0..1.0).contains(&v) } else { v > 0.0 && v < 1.0 });
            if !inside {
                return Err(Error::UnsupportedSpec("evaluation point must be interior to [0, 1)^d".into()));
            }
        }
        if let DensityKind::PiecewiseProduct { a0, a1 } = self.kind {
            if !(a0.abs() < 1.0 && a1.abs() < 1.0) {
                return Err(Error::UnsupportedSpec(format!(
                    "tent amplitudes must lie in (-1, 1) for strictly positive densities, got a0={a0}, a1={a1}"
                )));
            }
        }
        Ok(())
    }

    pub fn metric(&self) -> Metric {
        match self.kind {
            DensityKind::UniformCube => Metric::Euclidean,
            _ => Metric::Torus,
        }
    }

    pub fn point(&self) -> Vec<f64> {
        self.x.clone().unwrap_or_else(|| vec![0.5; self.d])
    }

    fn amplitude(&self, w: bool) -> f64 {
        match self.kind {
            DensityKind::PiecewiseProduct { a0, a1 } => {
                if w {
                    a1
                } else {
                    a0
                }
            }
            _ => 0.0,
        }
    }

    /// `f_1(x) / f_0(x)`.
    pub fn density_ratio(&self) -> f64 {
        let x = self.point();
        self.density(true, &x) / self.density(false, &x)
    }

    /// Lower bound of `f_w` over the support.
    pub fn density_floor(&self, w: bool) -> f64 {
        (1.0 - self.amplitude(w).abs()).powi(self.d as i32)
    }

    pub fn density(&self, w: bool, z: &[f64]) -> f64 {
        let a = self.amplitude(w);
        if a == 0.0 {
            return 1.0;
        }
        let x = self.point();
        z.iter()
            .zip(&x)
            .map(|(zc, xc)| {
                let mut t = zc - xc;
                t -= t.round();
                1.0 + a * (1.0 - 4.0 * t.abs())
            })
            .product()
    }

    /// Draws one point from `f_w` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, w: bool, x: &[f64], rng: &mut R, out: &mut [f64]) {
        let a = self.amplitude(w);
        for (o, xc) in out.iter_mut().zip(x) {
            *o = if a == 0.0 {
                rng.gen::<f64>()
            } else {
                // per-coordinate rejection against the flat envelope 1 + |a|
                loop {
                    let t: f64 = rng.gen::<f64>() - 0.5;
                    let g = 1.0 + a * (1.0 - 4.0 * t.abs());
                    if rng.gen::<f64>() * (1.0 + a.abs()) < g {
                        let v = xc + t;
                        break v - v.floor();
                    }
                }
            };
        }
    }

    /// `count` draws from `f_w`, row-major.
    pub fn sample<R: Rng + ?Sized>(&self, w: bool, count: usize, rng: &mut R) -> Vec<f64> {
        let x = self.point();
        let mut out = vec![0.0; count * self.d];
        for row in out.chunks_exact_mut(self.d) {
            self.sample_into(w, &x, rng, row);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn tent_product_is_a_density_with_requested_ratio() {
        let s = DensityPairSpec::with_ratio(2, 2.0).unwrap();
        assert!((s.density_ratio() - 2.0).abs() < 1e-12);
        // midpoint rule on a 400 x 400 grid is exact up to kinks
        let k = 400;
        let mut total = 0.0;
        for i in 0..k {
            for j in 0..k {
                let z = [(i as f64 + 0.5) / k as f64, (j as f64 + 0.5) / k as f64];
                total += s.density(true, &z);
            }
        }
        assert!((total / (k * k) as f64 - 1.0).abs() < 1e-4);
        assert!(DensityPairSpec::with_ratio(1, 2.0).is_err());
    }

    #[test]
    fn sampler_matches_density() {
        let s = DensityPairSpec::with_ratio(1, 1.8).unwrap();
        let mut rng = stream(9, 0);
        let pts = s.sample(true, 200_000, &mut rng);
        // mass within 0.1 of x = 0.5: integral of 1 + a(1 - 4|t|) over |t| < 0.1
        let a = 0.8;
        let expect = 0.2 + a * (0.2 - 4.0 * 0.01);
        let got = pts.iter().filter(|v| (*v - 0.5).abs() < 0.1).count() as f64 / 200_000.0;
        assert!((got - expect).abs() < 0.005, "{got} vs {expect}");
    }

    #[test]
    fn torus_displacement() {
        let mut d = [0.0; 2];
        Metric::Torus.displacement(&[0.95, 0.1], &[0.05, 0.9], &mut d);
        assert!((d[0] + 0.1).abs() < 1e-12 && (d[1] - 0.2).abs() < 1e-12);
        assert!((Metric::Torus.dist_sq(&[0.95, 0.1], &[0.05, 0.9]) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn config_round_trip() {
        let s = DensityPairSpec::with_ratio(3, 2.0).unwrap();
        let text = toml::to_string(&s).unwrap();
        assert_eq!(toml::from_str::<DensityPairSpec>(&text).unwrap(), s);
        let t: DensityPairSpec = toml::from_str("kind = \"uniform_torus\"\nd = 2\n").unwrap();
        assert_eq!(t, DensityPairSpec::uniform_torus(2));
    }
}
