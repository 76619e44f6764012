use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("insufficient group size: need at least {needed} units per group, have n0={n0}, n1={n1}")]
    InsufficientGroup { needed: usize, n0: usize, n1: usize },

    #[error("rank-deficient design matrix for group {group}")]
    RankDeficient { group: u8 },

    #[error("missing constant: {0}")]
    MissingConstant(String),

    #[error("degenerate propensity: every unit has the same treatment")]
    DegeneratePropensity,

    #[error("no root of the union-volume equation at (v1={v1}, v2={v2})")]
    NoRoot { v1: f64, v2: f64 },

    #[error("{0} did not converge")]
    Nonconvergent(&'static str),

    #[error("unsupported specification: {0}")]
    UnsupportedSpec(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
