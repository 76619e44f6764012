use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::estimate::{ConstantEstimate, ConstantKind, Indices, Method};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Cache of computed constants, at most one entry per `(kind, indices, method)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsTable {
    entries: BTreeMap<(ConstantKind, Indices, Method), ConstantEstimate>,
    pub tool_version: String,
    pub created_unix: u64,
}

#[derive(Serialize, Deserialize)]
struct TableDocument {
    schema_version: u32,
    tool_version: String,
    created_unix: u64,
    entries: Vec<ConstantEstimate>,
}

impl Default for ConstantsTable {
    fn default() -> Self {
        Self::new()
    }
}

impl ConstantsTable {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    /// Inserts or replaces the entry with the same `(kind, indices, method)`.
    pub fn insert(&mut self, estimate: ConstantEstimate) -> Option<ConstantEstimate> {
        self.entries
            .insert((estimate.kind, estimate.indices, estimate.method), estimate)
    }

    pub fn get(&self, kind: ConstantKind, indices: Indices, method: Method) -> Option<&ConstantEstimate> {
        self.entries.get(&(kind, indices, method))
    }

    /// Best available entry: closed form, then quadrature, then Monte Carlo.
    pub fn best(&self, kind: ConstantKind, indices: Indices) -> Option<&ConstantEstimate> {
        [Method::ClosedForm, Method::Quadrature, Method::MonteCarlo]
            .into_iter()
            .find_map(|m| self.get(kind, indices, m))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConstantEstimate> {
        self.entries.values()
    }

    pub fn merge(&mut self, other: &ConstantsTable) {
        for e in other.iter() {
            self.insert(e.clone());
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = TableDocument {
            schema_version: SCHEMA_VERSION,
            tool_version: self.tool_version.clone(),
            created_unix: self.created_unix,
            entries: self.entries.values().cloned().collect(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Schema("constants document is empty".into()));
        }
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Schema(format!(
                    "schema version {v} does not match supported version {SCHEMA_VERSION}"
                )))
            }
            None => return Err(Error::Schema("missing schema_version".into())),
        }
        let doc: TableDocument =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let mut table = ConstantsTable {
            entries: BTreeMap::new(),
            tool_version: doc.tool_version,
            created_unix: doc.created_unix,
        };
        for e in doc.entries {
            e.validate()?;
            if table.insert(e.clone()).is_some() {
                return Err(Error::Schema(format!("duplicate entry {:?}", (e.kind, e.indices, e.method))));
            }
        }
        Ok(table)
    }
}

pub fn store_constants(table: &ConstantsTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = table.to_json()?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_constants(path: impl AsRef<Path>) -> Result<ConstantsTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ConstantsTable::from_json(&text)
}

/// The cache shipped with the crate.
pub fn bundled_constants() -> ConstantsTable {
    ConstantsTable::from_json(include_str!("../../data/constants.json"))
        .expect("bundled constants cache is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_table() -> ConstantsTable {
        let mut t = ConstantsTable::new();
        t.insert(ConstantEstimate {
            kind: ConstantKind::AlphaD,
            indices: Indices::alpha_d(2),
            value: 1.280_123_456_789_012_3,
            error_bound: 6.1e-5,
            method: Method::MonteCarlo,
            n_samples: Some(10_000_000),
            grid_size: None,
            seed: Some(7),
        });
        t.insert(ConstantEstimate::closed_form(ConstantKind::AlphaMd, Indices::alpha_md(3, 1), 10.5));
        t.insert(ConstantEstimate {
            kind: ConstantKind::CIjk,
            indices: Indices::c_ijk(1, 0, 2, 3),
            value: 0.1 + 0.2,
            error_bound: 1e-9,
            method: Method::Quadrature,
            n_samples: None,
            grid_size: Some(512),
            seed: None,
        });
        t
    }

    #[test]
    fn round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let t = sample_table();
        store_constants(&t, &path).unwrap();
        assert_eq!(load_constants(&path).unwrap(), t);
    }

    #[test]
    fn numbers_carry_seventeen_digits() {
        let text = sample_table().to_json().unwrap();
        assert!(text.contains("3.0000000000000004e-1"), "{text}");
        assert!(text.contains("1.0500000000000000e1"));
    }

    #[test]
    fn empty_document_is_schema_error() {
        assert!(matches!(ConstantsTable::from_json(""), Err(Error::Schema(_))));
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let text = sample_table().to_json().unwrap().replace(
            "\"schema_version\": 1",
            "\"schema_version\": 99",
        );
        assert!(matches!(ConstantsTable::from_json(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn one_entry_per_key() {
        let mut t = sample_table();
        let n = t.len();
        let mut e = t.best(ConstantKind::AlphaD, Indices::alpha_d(2)).unwrap().clone();
        e.value = 1.3;
        assert!(t.insert(e).is_some());
        assert_eq!(t.len(), n);
    }

    #[test]
    fn bundled_cache_has_alpha_d_for_one_to_ten() {
        let t = bundled_constants();
        for d in 1..=10 {
            assert!(t.best(ConstantKind::AlphaD, Indices::alpha_d(d)).is_some(), "d={d}");
        }
    }
}
