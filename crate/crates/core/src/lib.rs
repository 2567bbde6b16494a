//! Constructions around everywhere complex binary sequences.
//!
//! * [`spreader`] repeats source bits along arithmetic progressions so every
//!   power-of-two window contains a prefix of the source.
//! * [`forbidden`] builds small per-length forbidden families that any fixed
//!   string hits with high probability, and derandomizes them against an
//!   explicit distribution.
//! * [`adversary`] picks one forbidden string per position against an
//!   explicit (sub)probability distribution by exhaustive search.
//! * [`avoider`] builds long strings avoiding a given forbidden family by
//!   occurrence resampling.
//! * [`proxy`] is a dictionary-parse compressor used as a rough complexity
//!   upper bound in reports.
//!
//! All probabilities are exact rationals ([`ExactProb`]); randomness comes
//! from the seeded, counter-based [`RandomSource`].

pub mod adversary;
pub mod avoider;
pub mod bits;
pub mod combin;
pub mod dist;
pub mod forbidden;
pub mod proxy;
pub mod ratio;
pub mod rng;
pub mod spreader;

pub use bits::{BitError, BitFileFormat, BitString};
pub use combin::binom;
pub use dist::{DistError, FiniteDistribution};
pub use ratio::{ExactProb, Ratio, RatioError};
pub use rng::{RandomSource, RandomStream};

/// `x([k, k+n))`.
pub fn window(x: &BitString, k: usize, n: usize) -> Result<BitString, BitError> {
    x.window(k, n)
}
