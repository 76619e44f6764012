use std::fmt;
use std::path::Path;

use matchvar::Error;
use serde::Serialize;

/// A failed run and the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const EXIT_INVALID: u8 = 2;
pub const EXIT_MISMATCH: u8 = 3;
pub const EXIT_GROUP: u8 = 4;
pub const EXIT_CHECK: u8 = 5;

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(EXIT_INVALID, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InsufficientGroup { .. } => EXIT_GROUP,
            _ => EXIT_INVALID,
        };
        Self::new(code, e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CmdResult = Result<(), Failure>;

/// Structured record of one run: tool version, the full configuration and the results.
#[derive(Serialize)]
pub struct Record<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    pub result: &'a R,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
}

pub fn write_record<C: Serialize, R: Serialize>(
    path: Option<&Path>,
    command: &str,
    config: &C,
    result: &R,
    passed: Option<bool>,
) -> CmdResult {
    let Some(path) = path else { return Ok(()) };
    let record = Record {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        result,
        passed,
    };
    let text = serde_json::to_string_pretty(&record).map_err(|e| Failure::invalid(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display())))
}

/// Turns a failed pass/fail check into exit code 5.
pub fn check(passed: bool, what: &str) -> CmdResult {
    if passed {
        println!("PASS  {what}");
        Ok(())
    } else {
        println!("FAIL  {what}");
        Err(Failure::new(EXIT_CHECK, format!("check failed: {what}")))
    }
}

pub fn fmt_pm(value: f64, err: f64) -> String {
    if err == 0.0 {
        format!("{value:.4}")
    } else {
        format!("{value:.4}±{err:.1e}")
    }
}
