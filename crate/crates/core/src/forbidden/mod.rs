//! Per-length forbidden families that a fixed string hits with high probability.
//!
//! The lowest levels are uniform random sets. The top level is the implicit
//! set of "simple" strings whose aligned blocks repeat, certified by an exact
//! count instead of being enumerated. A string either has many distinct
//! windows, so a random set is likely to contain one of them, or it is simple
//! and sits in the top level outright.

mod derand;
mod family;
mod sampling;
mod simple;

pub use derand::{
    avoid_probability, averaged_avoid_probability, derandomize_family, interval_schedule, schedule_union, Derandomized,
    ScheduledInterval,
};
pub use family::{
    hit_probability, multi_level_family, two_level_family, BuiltFamily, FamilyCertificate, FamilyDoc, FamilyModel,
    LayeredParams, LevelCertificate, LevelDoc, LevelFamily, LevelSet, LevelSpec, Pool,
};
pub use sampling::{miss_probability_pool, miss_probability_random_set, sample_pool_set, sample_uniform_set, with_replacement_miss};
pub use simple::{biguint_to_bits, bits_to_biguint, count_simple, distinct_substrings, is_simple, SimpleChain};

use thiserror::Error;

use crate::dist::DistError;
use crate::ratio::RatioError;

/// Largest random level the constructions will materialize.
pub const MAX_SAMPLE: u64 = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ForbiddenError {
    #[error("window length {n} exceeds string length {len}")]
    WindowTooLong { n: usize, len: usize },
    #[error("block length {block} does not divide length {len}")]
    NotDivisible { block: usize, len: usize },
    #[error("cannot draw {requested} strings from a pool of {pool}")]
    PoolTooSmall { requested: String, pool: String },
    #[error("level {length} would hold {size} strings, more than the sampling limit")]
    SampleTooLarge { length: usize, size: String },
    #[error("level {length} holds {cardinality} strings, above the bound {bound}")]
    SizeBound {
        length: usize,
        cardinality: String,
        bound: String,
    },
    #[error("string has length {got}, family expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("averaged avoid probability {averaged} is not below {epsilon}")]
    AveragedBoundFails { averaged: String, epsilon: String },
    #[error("no seed below {tried} produced a family below the bound")]
    SearchExhausted { tried: u64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parameter search gave up: {0}")]
    SearchLimit(String),
    #[error("certificate does not verify: {0}")]
    Certificate(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Ratio(#[from] RatioError),
}
