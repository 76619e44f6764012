//! Balls and two-ball unions in `R^d`.
//!
//! Everything the constants are built from reduces to one quantity: the volume of
//! the union of two balls that both pass through a common point. With both balls
//! anchored at the origin, a ball of volume fraction `v` has radius `v^(1/d)`, and
//! the separation of the two centers is fixed by the angle between their directions.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::special::ln_beta;

/// Volume `c_d` of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => return 2.0,
        2 => return PI,
        _ => {}
    }
    let half = d as f64 / 2.0;
    (half * PI.ln() - statrs::function::gamma::ln_gamma(half + 1.0)).exp()
}

pub fn ball_volume(d: usize, r: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("radius must be nonnegative, got {r}")));
    }
    Ok(unit_ball_volume(d) * r.powi(d as i32))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallUnionConfig {
    pub dim: usize,
    pub r1: f64,
    pub r2: f64,
    /// Distance between the two centers.
    pub t: f64,
}

impl BallUnionConfig {
    pub fn new(dim: usize, r1: f64, r2: f64, t: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        for (name, v) in [("r1", r1), ("r2", r2), ("t", t)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { dim, r1, r2, t })
    }
}

pub fn two_ball_union_volume(cfg: &BallUnionConfig) -> f64 {
    BallGeometry::new(cfg.dim).union_volume(cfg.r1, cfg.r2, cfg.t)
}

/// Per-dimension kernel with the cap-volume normalizer cached.
///
/// Intersections are split at the radical hyperplane into two spherical caps;
/// the fraction of a ball beyond a hyperplane at normalized signed distance `s`
/// is `I_{1-s^2}((d+1)/2, 1/2) / 2` for `s >= 0`.
#[derive(Debug, Clone)]
pub struct BallGeometry {
    dim: usize,
    unit_volume: f64,
    /// `Gamma(a + 1/2) / (Gamma(a + 1) sqrt(pi))` for the recurrence steps in `a`.
    steps: Vec<f64>,
}

impl BallGeometry {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        // I_x(a, 1/2) starts at a = 1/2 (even d) or a = 1 (odd d) and steps a -> a + 1
        let mut a = if dim % 2 == 0 { 0.5 } else { 1.0 };
        let mut kappa = if dim % 2 == 0 { 2.0 / PI } else { 0.5 };
        let target = (dim as f64 + 1.0) / 2.0;
        let mut steps = Vec::new();
        while a + 0.5 < target {
            steps.push(kappa);
            kappa *= (a + 0.5) / (a + 1.0);
            a += 1.0;
        }
        Self {
            dim,
            unit_volume: unit_ball_volume(dim),
            steps,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn unit_volume(&self) -> f64 {
        self.unit_volume
    }

    fn pow_d(&self, r: f64) -> f64 {
        r.powi(self.dim as i32)
    }

    /// Fraction of a ball lying beyond a hyperplane at signed distance `s * r` from its center.
    pub fn cap_fraction(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        if s <= -1.0 {
            return 1.0;
        }
        let a = s.abs();
        let half = 0.5 * self.cap_beta(a);
        if s >= 0.0 {
            half
        } else {
            1.0 - half
        }
    }

    /// `I_{1-s^2}((d+1)/2, 1/2)` for `s` in `[0, 1]`, via the exact recurrence
    /// `I_x(a+1, b) = I_x(a, b) - x^a (1-x)^b Gamma(a+b) / (Gamma(a+1) Gamma(b))`.
    fn cap_beta(&self, s: f64) -> f64 {
        let x = (1.0 - s) * (1.0 + s);
        let (mut value, mut xa) = if self.dim % 2 == 0 {
            (2.0 / PI * s.acos(), x.sqrt())
        } else {
            (1.0 - s, x)
        };
        for &kappa in &self.steps {
            value -= kappa * xa * s;
            xa *= x;
        }
        value.clamp(0.0, 1.0)
    }

    /// Volume of the intersection of two balls with radii `r1`, `r2` and centers `t` apart.
    pub fn intersection_volume(&self, r1: f64, r2: f64, t: f64) -> f64 {
        if r1 <= 0.0 || r2 <= 0.0 || t >= r1 + r2 {
            return 0.0;
        }
        if t <= (r1 - r2).abs() {
            return self.unit_volume * self.pow_d(r1.min(r2));
        }
        if self.dim == 1 {
            let lo = (-r1).max(t - r2);
            let hi = r1.min(t + r2);
            return (hi - lo).max(0.0);
        }
        let a1 = (t * t + r1 * r1 - r2 * r2) / (2.0 * t);
        let a2 = t - a1;
        self.unit_volume
            * (self.pow_d(r1) * self.cap_fraction(a1 / r1) + self.pow_d(r2) * self.cap_fraction(a2 / r2))
    }

    pub fn union_volume(&self, r1: f64, r2: f64, t: f64) -> f64 {
        if self.dim == 1 {
            // exact interval arithmetic: [-r1, r1] and [t - r2, t + r2]
            let overlap = (r1.min(t + r2) - (-r1).max(t - r2)).max(0.0);
            return 2.0 * r1 + 2.0 * r2 - overlap;
        }
        if t <= (r1 - r2).abs() {
            return self.unit_volume * self.pow_d(r1.max(r2));
        }
        let total = self.unit_volume * (self.pow_d(r1) + self.pow_d(r2));
        (total - self.intersection_volume(r1, r2, t)).max(0.0)
    }

    /// Union volume of two balls through a common point, in units of `c_d`.
    ///
    /// The balls have volumes `v1 * c_d` and `v2 * c_d` and their center directions,
    /// seen from the common point, meet at angle `gamma`.
    pub fn normalized_union(&self, v1: f64, v2: f64, gamma: f64) -> f64 {
        let inv_d = 1.0 / self.dim as f64;
        let r1 = v1.powf(inv_d);
        let r2 = v2.powf(inv_d);
        let half = (0.5 * gamma).sin();
        // law of cosines written to stay accurate for gamma near zero
        let t2 = (r1 - r2) * (r1 - r2) + 4.0 * r1 * r2 * half * half;
        self.union_volume(r1, r2, t2.max(0.0).sqrt()) / self.unit_volume
    }
}

/// `c_d^{-1}` times the union volume of two balls through a common point; see
/// [`BallGeometry::normalized_union`].
pub fn normalized_union_g(d: usize, v1: f64, v2: f64, gamma: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    if !(v1 > 0.0 && v1 <= 1.0 && v2 > 0.0 && v2 <= 1.0) {
        return Err(Error::Domain(format!(
            "volume fractions must lie in (0, 1], got v1={v1}, v2={v2}"
        )));
    }
    if !(0.0..=PI).contains(&gamma) {
        return Err(Error::Domain(format!("angle must lie in [0, pi], got {gamma}")));
    }
    Ok(BallGeometry::new(d).normalized_union(v1, v2, gamma))
}

/// Density of the angle between two independent uniform directions on `S^{d-1}`.
#[derive(Debug, Clone, Copy)]
pub struct AngleLaw {
    dim: usize,
    norm: f64,
}

impl AngleLaw {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain(format!(
                "the angle density needs d >= 2 (d = 1 has a two-point angle law), got {dim}"
            )));
        }
        Ok(Self {
            dim,
            norm: ln_beta(0.5, (dim as f64 - 1.0) / 2.0).exp(),
        })
    }

    pub fn density(&self, gamma: f64) -> f64 {
        if !(0.0..=PI).contains(&gamma) {
            return 0.0;
        }
        gamma.sin().powi(self.dim as i32 - 2) / self.norm
    }
}

pub fn angle_density(d: usize, gamma: f64) -> Result<f64> {
    Ok(AngleLaw::new(d)?.density(gamma))
}

/// A direction on the unit sphere `S^{d-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitDirection(Vec<f64>);

impl UnitDirection {
    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// A point of the closed unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitBallPoint(Vec<f64>);

impl UnitBallPoint {
    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sample_unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> UnitDirection {
    let mut v = vec![0.0; d];
    fill_unit_sphere(&mut v, rng);
    UnitDirection(v)
}

pub fn sample_unit_ball<R: Rng + ?Sized>(d: usize, rng: &mut R) -> UnitBallPoint {
    let mut v = vec![0.0; d];
    fill_unit_ball(&mut v, rng);
    UnitBallPoint(v)
}

/// Allocation-free form of [`sample_unit_sphere`].
pub fn fill_unit_sphere<R: Rng + ?Sized>(out: &mut [f64], rng: &mut R) {
    if out.len() == 1 {
        out[0] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let n = norm(out);
        if n > 1e-150 {
            out.iter_mut().for_each(|x| *x /= n);
            return;
        }
    }
}

/// Allocation-free form of [`sample_unit_ball`].
pub fn fill_unit_ball<R: Rng + ?Sized>(out: &mut [f64], rng: &mut R) {
    fill_unit_sphere(out, rng);
    let u: f64 = rng.gen();
    let r = u.powf(1.0 / out.len() as f64);
    out.iter_mut().for_each(|x| *x *= r);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn union(d: usize, r1: f64, r2: f64, t: f64) -> f64 {
        two_ball_union_volume(&BallUnionConfig::new(d, r1, r2, t).unwrap())
    }

    #[test]
    fn cap_kernel_matches_continued_fraction() {
        use crate::special::regularized_incomplete_beta;
        for d in 1..=12 {
            let g = BallGeometry::new(d);
            for k in 0..=50 {
                let s = k as f64 / 50.0;
                let x = (1.0 - s) * (1.0 + s);
                let cf = regularized_incomplete_beta((d as f64 + 1.0) / 2.0, 0.5, x).unwrap();
                assert!((g.cap_beta(s) - cf).abs() < 1e-13, "d={d} s={s}");
            }
        }
    }

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(1, 1.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((ball_volume(2, 1.0).unwrap() - PI).abs() < 1e-14);
        assert!((ball_volume(3, 2.0).unwrap() - 4.0 / 3.0 * PI * 8.0).abs() < 1e-12);
        assert!(matches!(ball_volume(0, 1.0), Err(Error::InvalidDimension(0))));
    }

    #[test]
    fn union_special_configurations() {
        assert!((union(2, 1.0, 1.0, 0.0) - PI).abs() < 1e-13);
        assert!((union(2, 1.0, 1.0, 2.0) - 2.0 * PI).abs() < 1e-13);
        assert!((union(3, 1.0, 0.5, 0.5) - 4.0 / 3.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn lens_matches_one_dimensional_quadrature() {
        // Oracle: area of the union of two unit discs one unit apart, as the
        // integral over x of the covered vertical extent (composite Simpson).
        let n = 200_000;
        let (lo, hi) = (-1.0, 2.0);
        let h = (hi - lo) / n as f64;
        let width = |x: f64| {
            let a = (1.0 - x * x).max(0.0).sqrt();
            let b = (1.0 - (x - 1.0) * (x - 1.0)).max(0.0).sqrt();
            2.0 * a.max(b)
        };
        let mut s = width(lo) + width(hi);
        for k in 1..n {
            let x = lo + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * width(x);
        }
        let oracle = s * h / 3.0;
        let v = union(2, 1.0, 1.0, 1.0);
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
        assert!((v - 5.054_815_608_3).abs() < 1e-9);
    }

    #[test]
    fn one_dimensional_intervals() {
        assert_eq!(union(1, 1.0, 0.5, 1.0), 2.5);
        assert_eq!(union(1, 1.0, 0.5, 0.2), 2.0);
        assert_eq!(union(1, 1.0, 1.0, 3.0), 4.0);
    }

    #[test]
    fn normalized_union_endpoints() {
        for d in 1..=6 {
            let g0 = normalized_union_g(d, 0.4, 0.7, 0.0).unwrap();
            let gpi = normalized_union_g(d, 0.4, 0.7, PI).unwrap();
            assert!((g0 - 0.7).abs() < 1e-12, "d={d} g0={g0}");
            assert!((gpi - 1.1).abs() < 1e-12, "d={d} gpi={gpi}");
        }
        assert!((normalized_union_g(1, 0.5, 0.5, PI).unwrap() - 1.0).abs() < 1e-15);
        assert!(normalized_union_g(2, 0.0, 0.5, 1.0).is_err());
        assert!(normalized_union_g(2, 0.5, 0.5, 4.0).is_err());
    }

    #[test]
    fn angle_density_values() {
        assert!((angle_density(2, 0.3).unwrap() - 1.0 / PI).abs() < 1e-14);
        assert!((angle_density(3, PI / 2.0).unwrap() - 0.5).abs() < 1e-14);
        assert!(angle_density(1, 0.3).is_err());
        // Simpson normalization check
        let law = AngleLaw::new(5).unwrap();
        let n = 2000;
        let h = PI / n as f64;
        let mut s = law.density(0.0) + law.density(PI);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * law.density(k as f64 * h);
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_draws() {
        let mut rng = stream(11, 0);
        for _ in 0..100 {
            let v = sample_unit_sphere(1, &mut rng);
            assert!(v.components()[0] == 1.0 || v.components()[0] == -1.0);
        }
        let a = sample_unit_sphere(3, &mut stream(5, 2));
        let b = sample_unit_sphere(3, &mut stream(5, 2));
        assert_eq!(a, b);
        assert!((norm(a.components()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_mean_is_centered() {
        let mut rng = stream(1, 0);
        let n = 1_000_000;
        let mut m = [0.0; 2];
        let mut v = [0.0; 2];
        for _ in 0..n {
            fill_unit_sphere(&mut v, &mut rng);
            m[0] += v[0];
            m[1] += v[1];
        }
        for c in m {
            assert!((c / n as f64).abs() < 3e-3);
        }
    }

    #[test]
    fn ball_draws() {
        let n = 1_000_000;
        let mut rng = stream(2, 0);
        let mut v = [0.0; 4];
        let threshold = 0.5f64.powf(0.25);
        let inside = (0..n)
            .filter(|_| {
                fill_unit_ball(&mut v, &mut rng);
                norm(&v) <= threshold
            })
            .count();
        assert!((inside as f64 / n as f64 - 0.5).abs() < 0.002);

        let mut v1 = [0.0; 1];
        let mean: f64 = (0..n)
            .map(|_| {
                fill_unit_ball(&mut v1, &mut rng);
                v1[0]
            })
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.003);

        let mut v3 = [0.0; 3];
        let m2: f64 = (0..n)
            .map(|_| {
                fill_unit_ball(&mut v3, &mut rng);
                v3.iter().map(|x| x * x).sum::<f64>()
            })
            .sum::<f64>()
            / n as f64;
        assert!((m2 - 0.6).abs() < 0.002);
    }
}
