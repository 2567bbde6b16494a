//! Long strings with no forbidden substring, by occurrence resampling.
//!
//! Start from uniform bits; while some window `x([k, k+n))` lies in `A_n`, redraw
//! the bits of the leftmost such window (shortest first on ties). Only windows
//! overlapping the redrawn bits can change, so violations are kept in an ordered
//! set and rechecked locally after each redraw.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::forbidden::{LevelFamily, LevelSet};
use crate::rng::RandomSource;

/// Longest string the brute-force oracle will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AvoidError {
    #[error("level {0} is not an explicit set")]
    NotExplicit(usize),
    #[error("level {n} is longer than 64 bits")]
    LevelTooLong { n: usize },
    #[error("level {n} does not fit strings of length {length}")]
    LevelBeyondLength { n: usize, length: usize },
    #[error("resample budget must be positive")]
    ZeroBudget,
    #[error("budget exhausted after {resamples} resamples with {residual} violations left")]
    BudgetExhausted { resamples: u64, residual: usize },
    #[error("brute force is limited to length {BRUTE_FORCE_LIMIT}, got {0}")]
    TooLong(usize),
}

/// Every `(k, n)` with `x([k, k+n)) in A_n`, ordered by `k` then `n`.
pub fn scan_violations(x: &BitString, family: &LevelFamily) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for k in 0..x.len() {
        for (&n, level) in family.levels().range(..=x.len() - k) {
            if level.contains(&x.window(k, n).expect("in range")) {
                out.push((k, n));
            }
        }
    }
    out
}

/// Explicit levels as sets of window values, shortest first.
struct Compiled {
    levels: Vec<(usize, HashSet<u64>)>,
}

impl Compiled {
    fn new(family: &LevelFamily) -> Result<Self, AvoidError> {
        let mut levels = Vec::new();
        for (&n, level) in family.levels() {
            let LevelSet::Explicit(set) = level else {
                return Err(AvoidError::NotExplicit(n));
            };
            if n > 64 {
                return Err(AvoidError::LevelTooLong { n });
            }
            levels.push((n, set.iter().map(|s| s.window_value(0, n)).collect()));
        }
        Ok(Self { levels })
    }

    fn violates(&self, x: &BitString, k: usize, level: usize) -> bool {
        let (n, set) = &self.levels[level];
        k + n <= x.len() && set.contains(&x.window_value(k, *n))
    }
}

/// A string length, resample budget and seed against an explicit family.
#[derive(Debug, Clone)]
pub struct AvoidanceInstance {
    family: LevelFamily,
    length: usize,
    max_resamples: u64,
    source: RandomSource,
}

impl AvoidanceInstance {
    /// Rejects implicit levels, levels longer than the target, and a zero budget.
    /// Level sizes were already held to `floor(2^(alpha n))` by the family itself.
    pub fn new(family: LevelFamily, length: usize, max_resamples: u64, source: RandomSource) -> Result<Self, AvoidError> {
        if max_resamples == 0 {
            return Err(AvoidError::ZeroBudget);
        }
        for (&n, level) in family.levels() {
            if level.as_explicit().is_none() {
                return Err(AvoidError::NotExplicit(n));
            }
            if n > length {
                return Err(AvoidError::LevelBeyondLength { n, length });
            }
        }
        Ok(Self {
            family,
            length,
            max_resamples,
            source,
        })
    }

    pub fn family(&self) -> &LevelFamily {
        &self.family
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn max_resamples(&self) -> u64 {
        self.max_resamples
    }

    pub fn source(&self) -> &RandomSource {
        &self.source
    }
}

/// A successful build and what it cost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvoidOutcome {
    pub bits: BitString,
    pub resamples: u64,
    pub initial_violations: usize,
}

/// Resamples the leftmost-shortest violation until none remain or the budget runs out.
///
/// The initial string comes from substream 0 of the instance's source and all
/// redraws from substream 1, so the output depends only on the instance.
pub fn build_avoiding_string(inst: &AvoidanceInstance) -> Result<AvoidOutcome, AvoidError> {
    let compiled = Compiled::new(&inst.family)?;
    let mut x = inst.source.stream(0).bits(inst.length);
    let mut redraw = inst.source.stream(1);

    // Violations keyed (k, n-rank); the rank order matches n order.
    let mut violations: BTreeSet<(usize, usize)> = BTreeSet::new();
    for k in 0..inst.length {
        for level in 0..compiled.levels.len() {
            if compiled.violates(&x, k, level) {
                violations.insert((k, level));
            }
        }
    }
    let initial_violations = violations.len();

    let mut resamples = 0u64;
    while let Some(&(k, level)) = violations.first() {
        if resamples == inst.max_resamples {
            return Err(AvoidError::BudgetExhausted {
                resamples,
                residual: violations.len(),
            });
        }
        let n = compiled.levels[level].0;
        for i in k..k + n {
            x.set(i, redraw.bit());
        }
        resamples += 1;
        for (rank, (m, _)) in compiled.levels.iter().enumerate() {
            let from = (k + 1).saturating_sub(*m);
            for start in from..k + n {
                if compiled.violates(&x, start, rank) {
                    violations.insert((start, rank));
                } else {
                    violations.remove(&(start, rank));
                }
            }
        }
    }
    Ok(AvoidOutcome {
        bits: x,
        resamples,
        initial_violations,
    })
}

/// The numerically smallest length-`length` string with no violation, if any.
pub fn brute_force_avoider(family: &LevelFamily, length: usize) -> Result<Option<BitString>, AvoidError> {
    if length > BRUTE_FORCE_LIMIT {
        return Err(AvoidError::TooLong(length));
    }
    let levels: Vec<(usize, &LevelSet)> = family.levels().iter().map(|(&n, l)| (n, l)).collect();
    let mut x = BitString::with_capacity(length);
    Ok(extend(&mut x, length, &levels).then_some(x))
}

/// Depth-first extension, 0 before 1, pruning at the first window that ends in a violation.
fn extend(x: &mut BitString, length: usize, levels: &[(usize, &LevelSet)]) -> bool {
    if x.len() == length {
        return true;
    }
    for bit in [false, true] {
        x.push(bit);
        let end = x.len();
        let clean = levels
            .iter()
            .all(|(n, level)| *n > end || !level.contains(&x.window(end - n, *n).expect("in range")));
        if clean && extend(x, length, levels) {
            return true;
        }
        x.pop();
    }
    false
}
