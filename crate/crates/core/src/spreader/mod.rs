//! Bit spreading along arithmetic progressions.
//!
//! Positions of the output are split into progressions of difference `2^m`,
//! level by level. Each progression carries one source bit, so the output
//! `omega_i = tau_{f(i)}` repeats that bit once per `2^m` positions and any
//! window of length `2^m` holds the whole source prefix `tau([0, B_m))`.
//! Knowing the window's offset modulo `2^m` is enough to read that prefix
//! back out, see [`recover_prefix`].

mod allocation;
mod weights;

pub use allocation::{
    recover_prefix, spread, Allocation, AllocationExport, CountRule, LevelAssignment, LevelExport, Tau,
    FULL_TRACK_LIMIT, LEVEL_CAP,
};
pub use weights::{choose_m0, level_count, m0_certificate, UnknownPreset, WeightSeries};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpreadError {
    #[error("budget certificate fails at m0 = {m0}: {certificate} > 1")]
    CertificateFails { m0: u32, certificate: String },
    #[error("m0 = {m0} exceeds max level {max_level}")]
    InvalidLevels { m0: u32, max_level: u32 },
    #[error("max level {max_level} exceeds the materialization limit {limit}")]
    MaxLevelTooLarge { max_level: u32, limit: u32 },
    #[error("level {level} needs {needed} progressions but only {available} remain")]
    InsufficientProgressions {
        level: u32,
        available: String,
        needed: String,
    },
    #[error("position {position} is beyond the planned horizon {horizon}")]
    OutsideHorizon { position: u64, horizon: u64 },
    #[error("position {position} is not covered by any level up to {processed_through}")]
    Uncovered { position: u64, processed_through: u32 },
    #[error("source needs {needed} bits, only {have} supplied")]
    TauTooShort { needed: u64, have: u64 },
    #[error("level {level} is not fully materialized")]
    LevelNotMaterialized { level: u32 },
    #[error("window has length {got}, expected {expected}")]
    WindowLength { expected: u64, got: u64 },
    #[error("source bit {bit} reads differently at window offsets {} and {}", offsets.0, offsets.1)]
    Inconsistent { bit: u64, offsets: (u64, u64) },
    #[error("window [{k}, {k}+2^{m}) holds source bit {bit} {occurrences} times")]
    CoverageViolation {
        k: u64,
        m: u32,
        bit: u64,
        occurrences: u32,
    },
    #[error("invalid allocation export: {0}")]
    InvalidExport(String),
}
