use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantKind {
    /// `alpha(d) = E[2 / T^2]`.
    AlphaD,
    /// Limit of the conditional moment `Q_ijk(v)` as `v -> 0`.
    CIjk,
    /// `alpha(M, d)`, the limiting second moment of the catchment measure.
    AlphaMd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MonteCarlo,
    Quadrature,
    ClosedForm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::MonteCarlo => "monte_carlo",
            Method::Quadrature => "quadrature",
            Method::ClosedForm => "closed_form",
        })
    }
}

/// `(M, d)` for `alpha_Md`, `(i, j, k, d)` for `c_ijk`, `d` alone for `alpha_d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Indices {
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl Indices {
    pub fn alpha_d(d: usize) -> Self {
        Self { d, m: None, i: None, j: None, k: None }
    }

    pub fn alpha_md(m: usize, d: usize) -> Self {
        Self { d, m: Some(m), i: None, j: None, k: None }
    }

    pub fn c_ijk(i: usize, j: usize, k: usize, d: usize) -> Self {
        Self { d, m: None, i: Some(i), j: Some(j), k: Some(k) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub kind: ConstantKind,
    pub indices: Indices,
    #[serde(serialize_with = "sig17::serialize")]
    pub value: f64,
    /// Monte Carlo standard error, or the quadrature refinement gap.
    #[serde(serialize_with = "sig17::serialize")]
    pub error_bound: f64,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ConstantEstimate {
    pub fn closed_form(kind: ConstantKind, indices: Indices, value: f64) -> Self {
        Self {
            kind,
            indices,
            value,
            error_bound: 0.0,
            method: Method::ClosedForm,
            n_samples: None,
            grid_size: None,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.value >= 0.0) || !self.value.is_finite() {
            return Err(Error::Schema(format!("negative or non-finite value in {self:?}")));
        }
        if !(self.error_bound >= 0.0) {
            return Err(Error::Schema(format!("negative error bound in {self:?}")));
        }
        if self.method == Method::ClosedForm && self.error_bound != 0.0 {
            return Err(Error::Schema(format!("closed form entry with nonzero error: {self:?}")));
        }
        let idx = &self.indices;
        let shape_ok = match self.kind {
            ConstantKind::AlphaD => idx.m.is_none() && idx.i.is_none(),
            ConstantKind::AlphaMd => idx.m.is_some() && idx.i.is_none(),
            ConstantKind::CIjk => idx.m.is_none() && idx.i.is_some() && idx.j.is_some() && idx.k.is_some(),
        };
        if !shape_ok || idx.d == 0 {
            return Err(Error::Schema(format!("indices do not match kind in {self:?}")));
        }
        Ok(())
    }
}

/// Floats written with 17 significant digits, which always round-trip.
pub(crate) mod sig17 {
    use serde::ser::Error as _;
    use serde::{Serialize, Serializer};
    use serde_json::value::RawValue;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if !v.is_finite() {
            return Err(S::Error::custom(format!("cannot serialize non-finite value {v}")));
        }
        let raw = RawValue::from_string(format!("{v:.16e}")).map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}
