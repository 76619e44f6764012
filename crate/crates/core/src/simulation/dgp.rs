use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{Dataset, Oracle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CovariateLaw {
    /// Uniform on `[0, 1]^d`.
    Uniform,
    /// Independent `Beta(a, b)` coordinates.
    Beta { a: f64, b: f64 },
}

/// `intercept + sum_c sum_k coefficients[c][k] x_c^(k+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditivePolynomial {
    pub intercept: f64,
    pub coefficients: Vec<Vec<f64>>,
}

impl AdditivePolynomial {
    pub fn constant(c: f64, d: usize) -> Self {
        Self { intercept: c, coefficients: vec![vec![]; d] }
    }

    pub fn linear(intercept: f64, slope: &[f64]) -> Self {
        Self {
            intercept,
            coefficients: slope.iter().map(|&s| vec![s]).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut total = self.intercept;
        for (c, coef) in self.coefficients.iter().enumerate() {
            let mut p = 1.0;
            for a in coef {
                p *= x[c];
                total += a * p;
            }
        }
        total
    }

    /// Range of the polynomial over `[0, 1]^d`, bounded coordinate-wise on a fine grid.
    fn range_on_cube(&self) -> (f64, f64) {
        let (mut lo, mut hi) = (self.intercept, self.intercept);
        for coef in &self.coefficients {
            let vals = (0..=1000).map(|k| {
                let t = k as f64 / 1000.0;
                let mut p = 1.0;
                coef.iter().map(|a| {
                    p *= t;
                    a * p
                }).sum::<f64>()
            });
            let (a, b) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            lo += a;
            hi += b;
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum PropensityModel {
    Constant { e: f64 },
    /// `1 / (1 + exp(-(intercept + slope . x)))`.
    Logistic { intercept: f64, slope: Vec<f64> },
}

impl PropensityModel {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant { e } => *e,
            Self::Logistic { intercept, slope } => {
                let t = intercept + slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                1.0 / (1.0 + (-t).exp())
            }
        }
    }
}

/// A data-generating process on `[0, 1]^d` with Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub name: String,
    pub d: usize,
    pub covariates: CovariateLaw,
    pub propensity: PropensityModel,
    pub mu0: AdditivePolynomial,
    pub mu1: AdditivePolynomial,
    /// Conditional variances, which must stay positive on the cube.
    pub sigma0_sq: AdditivePolynomial,
    pub sigma1_sq: AdditivePolynomial,
}

/// Lower bound required of the propensity over the support.
pub const PROPENSITY_MARGIN: f64 = 0.01;

const PRESETS: [(&str, &str); 4] = [
    ("linear-constant-e", include_str!("../../presets/linear-constant-e.toml")),
    ("linear-logistic-e", include_str!("../../presets/linear-logistic-e.toml")),
    ("nonlinear-constant-e", include_str!("../../presets/nonlinear-constant-e.toml")),
    ("nonlinear-logistic-e", include_str!("../../presets/nonlinear-logistic-e.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// A shipped preset by name.
pub fn preset(name: &str) -> Result<DgpSpec> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}; available: {}", preset_names().join(", "))))?;
    DgpSpec::from_toml(text)
}

/// One simulated sample with its oracle quantities.
#[derive(Debug, Clone)]
pub struct SimulatedSample {
    pub data: Dataset,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    /// `Y_i - mu_{W_i}(X_i)`.
    pub eps: Vec<f64>,
}

impl DgpSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        if d == 0 {
            return Err(Error::InvalidDimension(d));
        }
        for (name, p) in [("mu0", &self.mu0), ("mu1", &self.mu1), ("sigma0_sq", &self.sigma0_sq), ("sigma1_sq", &self.sigma1_sq)] {
            if p.coefficients.len() != d {
                return Err(Error::Config(format!("{name} needs {d} coefficient lists, got {}", p.coefficients.len())));
            }
        }
        for (name, p) in [("sigma0_sq", &self.sigma0_sq), ("sigma1_sq", &self.sigma1_sq)] {
            if p.range_on_cube().0 <= 0.0 {
                return Err(Error::Config(format!("{name} must be positive on the cube")));
            }
        }
        match &self.propensity {
            PropensityModel::Constant { e } => {
                if !(*e > PROPENSITY_MARGIN && *e < 1.0 - PROPENSITY_MARGIN) {
                    return Err(Error::Config(format!("constant propensity {e} is not bounded away from 0 and 1")));
                }
            }
            PropensityModel::Logistic { intercept, slope } => {
                if slope.len() != d {
                    return Err(Error::Config(format!("logistic slope needs {d} entries")));
                }
                let lo = intercept + slope.iter().map(|s| s.min(0.0)).sum::<f64>();
                let hi = intercept + slope.iter().map(|s| s.max(0.0)).sum::<f64>();
                let f = |t: f64| 1.0 / (1.0 + (-t).exp());
                if f(lo) <= PROPENSITY_MARGIN || f(hi) >= 1.0 - PROPENSITY_MARGIN {
                    return Err(Error::Config("logistic propensity leaves [0.01, 0.99] on the cube".into()));
                }
            }
        }
        if let CovariateLaw::Beta { a, b } = self.covariates {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::Config("beta parameters must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn tau_x(&self, x: &[f64]) -> f64 {
        self.mu1.eval(x) - self.mu0.eval(x)
    }

    pub fn sigma_sq(&self, w: bool, x: &[f64]) -> f64 {
        if w {
            self.sigma1_sq.eval(x)
        } else {
            self.sigma0_sq.eval(x)
        }
    }

    pub fn mu(&self, w: bool, x: &[f64]) -> f64 {
        if w {
            self.mu1.eval(x)
        } else {
            self.mu0.eval(x)
        }
    }

    /// Largest polynomial degree among the mean functions.
    pub fn mean_degree(&self) -> usize {
        self.mu0.degree().max(self.mu1.degree())
    }

    pub fn propensity_oracle(&self) -> Oracle {
        let p = self.propensity.clone();
        Oracle::new(move |x| p.eval(x))
    }

    pub fn sigma_oracles(&self) -> (Oracle, Oracle) {
        let (s0, s1) = (self.sigma0_sq.clone(), self.sigma1_sq.clone());
        (Oracle::new(move |x| s0.eval(x)), Oracle::new(move |x| s1.eval(x)))
    }

    fn draw_covariates<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.covariates {
            CovariateLaw::Uniform => out.iter_mut().for_each(|v| *v = rng.gen()),
            CovariateLaw::Beta { a, b } => {
                let law = Beta::new(a, b).expect("validated beta parameters");
                out.iter_mut().for_each(|v| *v = law.sample(rng));
            }
        }
    }

    /// Draws `n` units, redrawing treatments until each group has at least `min_group` units.
    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, min_group: usize, rng: &mut R) -> Result<SimulatedSample> {
        let d = self.d;
        if n < 2 * min_group.max(1) {
            return Err(Error::InsufficientGroup { needed: min_group, n0: n, n1: 0 });
        }
        let mut x = vec![0.0; n * d];
        for row in x.chunks_exact_mut(d) {
            self.draw_covariates(rng, row);
        }
        let e: Vec<f64> = x.chunks_exact(d).map(|r| self.propensity.eval(r)).collect();
        let mut w = vec![false; n];
        let mut ok = false;
        for _ in 0..100 {
            for (t, p) in w.iter_mut().zip(&e) {
                *t = rng.gen::<f64>() < *p;
            }
            let n1 = w.iter().filter(|&&t| t).count();
            if n1 >= min_group && n - n1 >= min_group {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::DegeneratePropensity);
        }
        let mut mu0 = Vec::with_capacity(n);
        let mut mu1 = Vec::with_capacity(n);
        let mut eps = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for (i, row) in x.chunks_exact(d).enumerate() {
            let (m0, m1) = (self.mu0.eval(row), self.mu1.eval(row));
            let z: f64 = rng.sample(StandardNormal);
            let noise = z * self.sigma_sq(w[i], row).sqrt();
            mu0.push(m0);
            mu1.push(m1);
            eps.push(noise);
            y.push(if w[i] { m1 } else { m0 } + noise);
        }
        Ok(SimulatedSample {
            data: Dataset::new(y, w, x, d)?,
            mu0,
            mu1,
            eps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn presets_parse_and_round_trip() {
        for name in preset_names() {
            let p = preset(name).unwrap();
            assert_eq!(p.name, name);
            assert_eq!(DgpSpec::from_toml(&p.to_toml().unwrap()).unwrap(), p);
        }
        assert!(matches!(preset("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut p = preset("linear-constant-e").unwrap();
        p.propensity = PropensityModel::Constant { e: 1.0 };
        assert!(p.validate().is_err());
        let mut p = preset("linear-constant-e").unwrap();
        p.sigma1_sq = AdditivePolynomial::linear(0.5, &[-1.0, 0.0]);
        assert!(p.validate().is_err());
    }

    #[test]
    fn simulation_uses_oracles() {
        let p = preset("nonlinear-logistic-e").unwrap();
        let s = p.simulate(500, 2, &mut stream(1, 0)).unwrap();
        for i in 0..500 {
            let x = s.data.row(i);
            assert_eq!(s.mu0[i], p.mu0.eval(x));
            let mu = if s.data.treated(i) { s.mu1[i] } else { s.mu0[i] };
            assert!((s.data.y()[i] - mu - s.eps[i]).abs() < 1e-12);
        }
    }
}
