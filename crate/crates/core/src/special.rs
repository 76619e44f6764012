//! Special functions used by the cap-volume kernel and the interval code.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const MAX_ITER: usize = 500;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "incomplete beta shape parameters must be positive, got a={a}, b={b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "incomplete beta argument must lie in [0, 1], got {x}"
        )));
    }
    Ok(IncompleteBeta::new(a, b).eval(x))
}

/// `I_x(a, b)` with the normalizing constant cached, for repeated calls at fixed shape.
#[derive(Debug, Clone, Copy)]
pub struct IncompleteBeta {
    a: f64,
    b: f64,
    ln_beta: f64,
}

impl IncompleteBeta {
    pub fn new(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            ln_beta: ln_beta(a, b),
        }
    }

    /// Evaluates at `x`, which the caller guarantees lies in `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_split(x, 1.0 - x)
    }

    /// Evaluates with `x` and `1 - x` supplied separately, so callers that can form
    /// the complement without cancellation keep full relative precision.
    pub fn eval_split(&self, x: f64, one_minus_x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if one_minus_x <= 0.0 {
            return 1.0;
        }
        let (a, b) = (self.a, self.b);
        let front = (a * x.ln() + b * one_minus_x.ln() - self.ln_beta).exp();
        if x < (a + 1.0) / (a + b + 2.0) {
            front * continued_fraction(a, b, x) / a
        } else {
            1.0 - front * continued_fraction(b, a, one_minus_x) / b
        }
    }
}

// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Two-sided standard normal critical value `z_{(1+level)/2}`.
pub fn normal_critical_value(level: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(0.5 * (1.0 + level))
}

pub fn normal_cdf(z: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.cdf(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_shape_is_identity() {
        let v = regularized_incomplete_beta(1.0, 1.0, 0.3).unwrap();
        assert!((v - 0.3).abs() < 1e-14);
    }

    #[test]
    fn endpoints() {
        for &(a, b) in &[(0.5, 0.5), (2.0, 7.5), (5.5, 0.5)] {
            assert_eq!(regularized_incomplete_beta(a, b, 1.0).unwrap(), 1.0);
            assert_eq!(regularized_incomplete_beta(a, b, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn arcsine_median() {
        let v = regularized_incomplete_beta(0.5, 0.5, 0.5).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_domain() {
        assert!(regularized_incomplete_beta(1.0, 1.0, 1.5).is_err());
        assert!(regularized_incomplete_beta(1.0, 1.0, -0.1).is_err());
        assert!(regularized_incomplete_beta(0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn agrees_with_statrs() {
        // statrs carries its own continued-fraction implementation.
        for &(a, b) in &[(1.5, 0.5), (2.0, 0.5), (5.5, 0.5), (0.7, 3.2), (10.0, 10.0)] {
            for k in 0..=40 {
                let x = k as f64 / 40.0;
                let ours = regularized_incomplete_beta(a, b, x).unwrap();
                let theirs = statrs::function::beta::beta_reg(a, b, x);
                assert!(
                    (ours - theirs).abs() < 1e-12,
                    "a={a} b={b} x={x}: {ours} vs {theirs}"
                );
            }
        }
    }

    #[test]
    fn half_integer_closed_form() {
        // I_x(3/2, 1/2) = (2/pi)(asin(sqrt x) - sqrt(x(1-x)))
        for k in 1..20 {
            let x = k as f64 / 20.0;
            let exact = 2.0 / std::f64::consts::PI * (x.sqrt().asin() - (x * (1.0 - x)).sqrt());
            let v = regularized_incomplete_beta(1.5, 0.5, x).unwrap();
            assert!((v - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn critical_value_95() {
        assert!((normal_critical_value(0.95) - 1.959963984540054).abs() < 1e-9);
    }
}
