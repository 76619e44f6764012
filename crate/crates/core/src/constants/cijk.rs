//! The coefficients `c_ijk(d)`.
//!
//! `alpha(d) * c_ijk(d)` is the integral over `D(1) = {v1, v2 in [0, 1], v1 + v2 >= 1}` of
//! `P_ijk(1, v1, v2) f_S(1 | v1, v2)`, where
//! `P_ijk(1, v1, v2) = (1 - v1)^i (1 - v2)^j (v1 + v2 - 1)^k` and `f_S(. | v1, v2)` is the
//! density of the normalized union volume `g(v1, v2, gamma)` when `gamma` is the angle
//! between two independent uniform directions.
//!
//! Two deterministic rules are provided:
//!
//! * [`QuadratureRule::Ray`] writes `(v1, v2) = s (u, 1 - u)`. Homogeneity of `g` makes the
//!   `s` integral collapse against the density, leaving
//!   `∫_0^1 du ∫_0^pi dgamma h(gamma) P_ijk(1, u/G, (1-u)/G) / G^2` with `G = g(u, 1-u, gamma)`.
//!   The integrand is bounded (`G >= 1/2`) and needs no root finding.
//! * [`QuadratureRule::MidpointRoot`] evaluates `f_S(1 | v1, v2)` at midpoint nodes of
//!   `D(1)` by solving `g = 1` for the angle. The density has integrable singularities on
//!   the edges of `D(1)`, so this rule converges slowly; it is kept as a diagnostic.
//!
//! The Monte Carlo route samples `v1, v2 ~ U(0, 1)` and the angle law, and keeps draws
//! with `g <= 1`; by homogeneity the ratios `(v1/g, v2/g)` then follow the `v -> 0` limit
//! of the conditional law of `(V1/V, V2/V)` given `V = v`.

use std::f64::consts::PI;

use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;

use super::estimate::{ConstantEstimate, ConstantKind, Indices, Method};
use crate::error::{Error, Result};
use crate::geometry::{fill_unit_sphere, AngleLaw, BallGeometry};
use crate::quadrature::gauss_legendre;
use crate::rng::{chunked, MeanAccumulator};

pub type Triple = (usize, usize, usize);

/// Index triples `(i, j, k) >= 0` with `i + k <= M - 1` and `j + k <= M - 1`.
pub fn triples(m: usize) -> Vec<Triple> {
    let mut out = Vec::new();
    if m == 0 {
        return out;
    }
    for k in 0..m {
        for i in 0..(m - k) {
            for j in 0..(m - k) {
                out.push((i, j, k));
            }
        }
    }
    out
}

/// `(i + j + k + 1)! / (i! j! k!)`
pub fn multinomial_weight(i: usize, j: usize, k: usize) -> f64 {
    let mut w = 1.0f64;
    // (i+j+k+1)! / (i! j! k!) = (i+j+k+1) * C(i+j+k, k) * C(i+j, j)
    w *= (i + j + k + 1) as f64;
    w *= binomial(i + j + k, k);
    w *= binomial(i + j, j);
    w
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, r| acc * (n - r) as f64 / (r + 1) as f64).round()
}

fn factorial_ratio(num: &[usize], den: usize) -> Ratio<i128> {
    // prod(num_i!) / den!
    let f = |n: usize| (1..=n as i128).product::<i128>();
    Ratio::new(num.iter().map(|&n| f(n)).product(), f(den))
}

/// Exact `c_ijk(1)` as a rational number.
pub fn c_ijk_d1_exact(i: usize, j: usize, k: usize) -> Ratio<i128> {
    let third = Ratio::new(1, 3);
    let two_thirds = Ratio::new(2, 3);
    match (i != 0, j != 0, k != 0) {
        (false, false, false) => Ratio::from_integer(1),
        (true, true, false) => third * factorial_ratio(&[i, j], i + j + 1),
        (true, false, true) => third * factorial_ratio(&[i, k], i + k + 1),
        (false, true, true) => third * factorial_ratio(&[j, k], j + k + 1),
        (false, false, true) => two_thirds / Ratio::from_integer(k as i128 + 1),
        (false, true, false) => two_thirds / Ratio::from_integer(j as i128 + 1),
        (true, false, false) => two_thirds / Ratio::from_integer(i as i128 + 1),
        (true, true, true) => Ratio::from_integer(0),
    }
}

pub fn c_ijk_closed_form_d1(i: usize, j: usize, k: usize) -> Result<ConstantEstimate> {
    if i + j + k > 30 {
        return Err(Error::Domain(format!(
            "closed-form c_ijk(1) supports i + j + k <= 30, got {}",
            i + j + k
        )));
    }
    let r = c_ijk_d1_exact(i, j, k);
    Ok(ConstantEstimate::closed_form(
        ConstantKind::CIjk,
        Indices::c_ijk(i, j, k, 1),
        *r.numer() as f64 / *r.denom() as f64,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    Ray,
    MidpointRoot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub rule: QuadratureRule,
    /// Nodes per axis at the coarsest level.
    pub base: usize,
    /// Maximum number of grid doublings.
    pub max_doublings: usize,
    /// Stop once successive levels differ by less than this, relative.
    pub rel_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::Ray,
            base: 256,
            max_doublings: 3,
            rel_tol: 0.005,
        }
    }
}

/// Integrals `I_ijk = alpha(d) c_ijk(d)` for several triples, with the refinement gap.
#[derive(Debug, Clone)]
pub struct MomentIntegrals {
    pub d: usize,
    pub triples: Vec<Triple>,
    pub values: Vec<f64>,
    pub gaps: Vec<f64>,
    pub grid_size: usize,
}

impl MomentIntegrals {
    pub fn get(&self, t: Triple) -> Option<(f64, f64)> {
        self.triples
            .iter()
            .position(|&x| x == t)
            .map(|p| (self.values[p], self.gaps[p]))
    }
}

pub fn moment_integrals(d: usize, triples: &[Triple], grid: &GridSpec) -> Result<MomentIntegrals> {
    if d < 2 {
        return Err(Error::Domain(
            "quadrature needs d >= 2; at d = 1 the angle law is discrete and c_ijk(1) has a closed form"
                .into(),
        ));
    }
    if let Some(&(i, j, k)) = triples.iter().find(|(i, j, k)| i + j + k > 20) {
        return Err(Error::Domain(format!("i + j + k must be <= 20, got ({i}, {j}, {k})")));
    }
    if grid.base < 2 {
        return Err(Error::Domain("grid base must be at least 2".into()));
    }
    let eval = |n: usize| match grid.rule {
        QuadratureRule::Ray => ray_rule(d, n, triples),
        QuadratureRule::MidpointRoot => midpoint_root_rule(d, n, triples),
    };
    let mut n = grid.base;
    let mut prev = eval(n)?;
    let mut gaps = vec![f64::INFINITY; triples.len()];
    for _ in 0..grid.max_doublings {
        n *= 2;
        let next = eval(n)?;
        gaps = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).collect();
        prev = next;
        let done = gaps
            .iter()
            .zip(&prev)
            .all(|(g, v)| *g <= grid.rel_tol * v.abs() + 1e-14);
        if done {
            break;
        }
    }
    Ok(MomentIntegrals {
        d,
        triples: triples.to_vec(),
        values: prev,
        gaps,
        grid_size: n,
    })
}

struct Powers {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Powers {
    fn new(max: usize) -> Self {
        Self {
            a: vec![1.0; max + 1],
            b: vec![1.0; max + 1],
            c: vec![1.0; max + 1],
        }
    }

    fn fill(&mut self, a: f64, b: f64, c: f64) {
        for p in 1..self.a.len() {
            self.a[p] = self.a[p - 1] * a;
            self.b[p] = self.b[p - 1] * b;
            self.c[p] = self.c[p - 1] * c;
        }
    }

    fn p(&self, (i, j, k): Triple) -> f64 {
        self.a[i] * self.b[j] * self.c[k]
    }
}

fn max_power(triples: &[Triple]) -> usize {
    triples.iter().map(|&(i, j, k)| i.max(j).max(k)).max().unwrap_or(0)
}

fn ray_rule(d: usize, n: usize, triples: &[Triple]) -> Result<Vec<f64>> {
    let geom = BallGeometry::new(d);
    let law = AngleLaw::new(d)?;
    // split u at 1/2, where G has a kink at gamma = 0
    let (ul, wl) = gauss_legendre(n, 0.0, 0.5);
    let (uh, wh) = gauss_legendre(n, 0.5, 1.0);
    let us: Vec<(f64, f64)> = ul.into_iter().zip(wl).chain(uh.into_iter().zip(wh)).collect();
    let (gs, wg) = gauss_legendre(n, 0.0, PI);
    let angle: Vec<(f64, f64)> = gs
        .into_iter()
        .zip(wg)
        .map(|(g, w)| (g, w * law.density(g)))
        .collect();
    let pmax = max_power(triples);
    let rows: Vec<Vec<f64>> = us
        .par_iter()
        .map(|&(u, wu)| {
            let mut acc = vec![0.0; triples.len()];
            let mut pw = Powers::new(pmax);
            for &(gamma, wgam) in &angle {
                let g = geom.normalized_union(u, 1.0 - u, gamma);
                let w = wu * wgam / (g * g);
                let v1 = u / g;
                let v2 = (1.0 - u) / g;
                pw.fill(1.0 - v1, 1.0 - v2, (1.0 / g - 1.0).max(0.0));
                for (slot, &t) in acc.iter_mut().zip(triples) {
                    *slot += w * pw.p(t);
                }
            }
            acc
        })
        .collect();
    Ok(sum_rows(rows, triples.len()))
}

fn sum_rows(rows: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    rows.into_iter().fold(vec![0.0; len], |mut acc, r| {
        acc.iter_mut().zip(r).for_each(|(a, b)| *a += b);
        acc
    })
}

const BISECTION_MAX_ITER: usize = 200;
const BISECTION_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-6;

/// Angle `gamma*` solving `g(v1, v2, gamma) = 1`.
pub fn union_root(geom: &BallGeometry, v1: f64, v2: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, PI);
    let glo = geom.normalized_union(v1, v2, lo) - 1.0;
    let ghi = geom.normalized_union(v1, v2, hi) - 1.0;
    if glo > 0.0 || ghi < 0.0 {
        return Err(Error::NoRoot { v1, v2 });
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let w = geom.normalized_union(v1, v2, mid) - 1.0;
        if w.abs() < BISECTION_TOL || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if w > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Nonconvergent("union-volume bisection"))
}

/// Density at 1 of `g(v1, v2, gamma)` for a random angle, `h(gamma*) / |dg/dgamma(gamma*)|`.
pub fn union_density_at_one(d: usize, v1: f64, v2: f64) -> Result<f64> {
    let geom = BallGeometry::new(d);
    let law = AngleLaw::new(d)?;
    density_at_one(&geom, &law, v1, v2)
}

fn density_at_one(geom: &BallGeometry, law: &AngleLaw, v1: f64, v2: f64) -> Result<f64> {
    let root = union_root(geom, v1, v2)?;
    let lo = (root - FD_STEP).max(0.0);
    let hi = (root + FD_STEP).min(PI);
    let slope = (geom.normalized_union(v1, v2, hi) - geom.normalized_union(v1, v2, lo)) / (hi - lo);
    if slope <= 0.0 {
        return Err(Error::Nonconvergent("union-volume slope"));
    }
    Ok(law.density(root) / slope)
}

fn midpoint_root_rule(d: usize, n: usize, triples: &[Triple]) -> Result<Vec<f64>> {
    let geom = BallGeometry::new(d);
    let law = AngleLaw::new(d)?;
    let h = 1.0 / n as f64;
    let pmax = max_power(triples);
    let rows: Result<Vec<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|a| {
            let v1 = (a as f64 + 0.5) * h;
            let mut acc = vec![0.0; triples.len()];
            let mut pw = Powers::new(pmax);
            for b in 0..n {
                let v2 = (b as f64 + 0.5) * h;
                if v1 + v2 <= 1.0 {
                    continue;
                }
                let f = density_at_one(&geom, &law, v1, v2)?;
                pw.fill(1.0 - v1, 1.0 - v2, v1 + v2 - 1.0);
                for (slot, &t) in acc.iter_mut().zip(triples) {
                    *slot += h * h * f * pw.p(t);
                }
            }
            Ok(acc)
        })
        .collect();
    Ok(sum_rows(rows?, triples.len()))
}

/// `c_ijk(d)` by quadrature, normalized by the supplied `alpha(d)` estimate.
pub fn c_ijk_quadrature(
    d: usize,
    i: usize,
    j: usize,
    k: usize,
    grid: &GridSpec,
    alpha_d: &ConstantEstimate,
) -> Result<ConstantEstimate> {
    let ints = moment_integrals(d, &[(i, j, k)], grid)?;
    Ok(coefficient_from_integral(&ints, 0, alpha_d))
}

/// All `c_ijk(d)` needed for `alpha(M, d)` up to `max_m`, from one quadrature pass.
pub fn c_ijk_quadrature_all(
    d: usize,
    max_m: usize,
    grid: &GridSpec,
    alpha_d: &ConstantEstimate,
) -> Result<Vec<ConstantEstimate>> {
    let ts = triples(max_m);
    let ints = moment_integrals(d, &ts, grid)?;
    Ok((0..ts.len())
        .map(|p| coefficient_from_integral(&ints, p, alpha_d))
        .collect())
}

/// `alpha(d)` as the quadrature integral of the `(0, 0, 0)` moment, i.e. the mass of
/// the density of the normalized union volume at one.
pub fn alpha_d_quadrature(d: usize, grid: &GridSpec) -> Result<ConstantEstimate> {
    let ints = moment_integrals(d, &[(0, 0, 0)], grid)?;
    Ok(ConstantEstimate {
        kind: ConstantKind::AlphaD,
        indices: Indices::alpha_d(d),
        value: ints.values[0],
        error_bound: ints.gaps[0],
        method: Method::Quadrature,
        n_samples: None,
        grid_size: Some(ints.grid_size as u64),
        seed: None,
    })
}

fn coefficient_from_integral(ints: &MomentIntegrals, p: usize, alpha_d: &ConstantEstimate) -> ConstantEstimate {
    let (i, j, k) = ints.triples[p];
    ConstantEstimate {
        kind: ConstantKind::CIjk,
        indices: Indices::c_ijk(i, j, k, ints.d),
        value: ints.values[p] / alpha_d.value,
        error_bound: ints.gaps[p] / alpha_d.value,
        method: Method::Quadrature,
        n_samples: None,
        grid_size: Some(ints.grid_size as u64),
        seed: None,
    }
}

/// One draw of the scale-free triple: `Some((v1/g, v2/g))` when `g <= 1`.
fn scale_free_draw<R: Rng + ?Sized>(geom: &BallGeometry, dir: &mut [f64], rng: &mut R) -> Option<(f64, f64, f64)> {
    let v1: f64 = rng.gen();
    let v2: f64 = rng.gen();
    // cosine of the angle between two uniform directions is the first coordinate of one
    fill_unit_sphere(dir, rng);
    let gamma = dir[0].clamp(-1.0, 1.0).acos();
    if v1 <= 0.0 || v2 <= 0.0 {
        return None;
    }
    let g = geom.normalized_union(v1, v2, gamma);
    (g <= 1.0).then(|| (v1 / g, v2 / g, g))
}

/// Monte Carlo estimate of the limit of `Q_ijk(v)` as `v -> 0`.
pub fn c_ijk_monte_carlo(d: usize, i: usize, j: usize, k: usize, n_samples: u64, seed: u64) -> Result<ConstantEstimate> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    let geom = BallGeometry::new(d);
    let parts = chunked(n_samples as usize, 1 << 15, seed, |rng, _, len| {
        let mut acc = MeanAccumulator::default();
        let mut dir = vec![0.0; d];
        for _ in 0..len {
            if let Some((x1, x2, _)) = scale_free_draw(&geom, &mut dir, rng) {
                let p = (1.0 - x1).powi(i as i32) * (1.0 - x2).powi(j as i32) * (x1 + x2 - 1.0).max(0.0).powi(k as i32);
                acc.push(p);
            }
        }
        acc
    });
    let acc = parts.iter().fold(MeanAccumulator::default(), |a, b| a.merge(b));
    if acc.count < 2 {
        return Err(Error::Domain("too few accepted draws".into()));
    }
    Ok(ConstantEstimate {
        kind: ConstantKind::CIjk,
        indices: Indices::c_ijk(i, j, k, d),
        value: acc.mean(),
        error_bound: acc.std_error(),
        method: Method::MonteCarlo,
        n_samples: Some(n_samples),
        grid_size: None,
        seed: Some(seed),
    })
}

/// Monte Carlo estimate of `alpha(M, d) = 2 E[1{g <= 1} sum_ijk w_ijk P_ijk]` with
/// `(v1, v2)` uniform on the unit square.
pub fn alpha_md_monte_carlo(m: usize, d: usize, n_samples: u64, seed: u64) -> Result<ConstantEstimate> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    if m == 0 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    let ts = triples(m);
    let weights: Vec<f64> = ts.iter().map(|&(i, j, k)| multinomial_weight(i, j, k)).collect();
    let geom = BallGeometry::new(d);
    let parts = chunked(n_samples as usize, 1 << 15, seed, |rng, _, len| {
        let mut acc = MeanAccumulator::default();
        let mut dir = vec![0.0; d];
        let mut pw = Powers::new(m);
        for _ in 0..len {
            let x = match scale_free_draw(&geom, &mut dir, rng) {
                Some((x1, x2, _)) => {
                    pw.fill(1.0 - x1, 1.0 - x2, (x1 + x2 - 1.0).max(0.0));
                    2.0 * ts.iter().zip(&weights).map(|(&t, w)| w * pw.p(t)).sum::<f64>()
                }
                None => 0.0,
            };
            acc.push(x);
        }
        acc
    });
    let acc = parts.iter().fold(MeanAccumulator::default(), |a, b| a.merge(b));
    Ok(ConstantEstimate {
        kind: ConstantKind::AlphaMd,
        indices: Indices::alpha_md(m, d),
        value: acc.mean(),
        error_bound: acc.std_error(),
        method: Method::MonteCarlo,
        n_samples: Some(n_samples),
        grid_size: None,
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_cases() {
        assert_eq!(c_ijk_d1_exact(0, 0, 0), Ratio::from_integer(1));
        assert_eq!(c_ijk_d1_exact(1, 1, 1), Ratio::from_integer(0));
        assert_eq!(c_ijk_d1_exact(1, 1, 0), Ratio::new(1, 18));
        assert_eq!(c_ijk_d1_exact(0, 0, 3), Ratio::new(1, 6));
        assert_eq!(c_ijk_d1_exact(2, 0, 1), Ratio::new(1, 36));
        let e = c_ijk_closed_form_d1(1, 1, 0).unwrap();
        assert_eq!(e.method, Method::ClosedForm);
        assert_eq!(e.error_bound, 0.0);
        assert!((e.value - 1.0 / 18.0).abs() < 1e-16);
    }

    #[test]
    fn triple_counts() {
        // sum_k (M - k)^2
        for m in 1..=10 {
            let expect: usize = (0..m).map(|k| (m - k) * (m - k)).sum();
            assert_eq!(triples(m).len(), expect);
        }
        assert_eq!(triples(1), vec![(0, 0, 0)]);
    }

    #[test]
    fn multinomial_weights() {
        assert_eq!(multinomial_weight(0, 0, 0), 1.0);
        assert_eq!(multinomial_weight(1, 1, 0), 6.0);
        assert_eq!(multinomial_weight(2, 1, 3), 5040.0 / 12.0);
    }

    #[test]
    fn quadrature_rejects_d1() {
        let g = GridSpec::default();
        assert!(moment_integrals(1, &[(0, 0, 0)], &g).is_err());
    }

    #[test]
    fn zero_triple_is_alpha() {
        let g = GridSpec { base: 64, ..GridSpec::default() };
        let ints = moment_integrals(2, &[(0, 0, 0)], &g).unwrap();
        assert!((ints.values[0] - 1.28).abs() < 0.01);
    }

    #[test]
    fn density_root_errors_off_domain() {
        // v1 + v2 < 1: the union never reaches 1
        assert!(matches!(
            union_density_at_one(2, 0.3, 0.3),
            Err(Error::NoRoot { .. })
        ));
        assert!(union_density_at_one(3, 0.6, 0.7).unwrap() > 0.0);
    }
}
