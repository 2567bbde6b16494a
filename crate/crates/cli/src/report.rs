use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Everything a run produced, with enough embedded data for `verify` to recheck it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub params: Value,
    pub results: Value,
    /// Exact rationals are carried as `"num/den"` strings.
    pub certificates: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub wall_time_ms: u128,
}

/// A failed run and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Exit 1: a check or certificate did not hold. Carries the partial report, if any.
    Verification(String, Option<Box<RunReport>>),
    /// Exit 2: flags, files or parameters were unusable.
    BadParams(String),
    /// Exit 3: a randomized search ran out of budget.
    Budget(String, Option<Box<RunReport>>),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Verification(..) => 1,
            Failure::BadParams(_) => 2,
            Failure::Budget(..) => 3,
        }
    }

    pub fn report(&self) -> Option<&RunReport> {
        match self {
            Failure::Verification(_, r) | Failure::Budget(_, r) => r.as_deref(),
            Failure::BadParams(_) => None,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Verification(msg, _) => write!(f, "verification failed: {msg}"),
            Failure::BadParams(msg) => write!(f, "bad parameters: {msg}"),
            Failure::Budget(msg, _) => write!(f, "budget exhausted: {msg}"),
        }
    }
}

pub fn bad(e: impl fmt::Display) -> Failure {
    Failure::BadParams(e.to_string())
}

pub fn failed(e: impl fmt::Display) -> Failure {
    Failure::Verification(e.to_string(), None)
}
