//! Strings made of few distinct aligned blocks, counted and ranked exactly.

use std::collections::HashSet;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::ForbiddenError;
use crate::bits::BitString;
use crate::combin::{binom_big, pow2, surjections};

/// Number of distinct length-`n` windows of `x` over all offsets.
pub fn distinct_substrings(x: &BitString, n: usize) -> Result<usize, ForbiddenError> {
    if n > x.len() {
        return Err(ForbiddenError::WindowTooLong { n, len: x.len() });
    }
    let offsets = x.len() - n + 1;
    if n <= 64 {
        let mut seen = HashSet::with_capacity(offsets.min(1 << 16));
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut value = if n == 0 { 0 } else { x.window_value(0, n) };
        seen.insert(value);
        for k in 1..offsets {
            value = ((value << 1) | u64::from(x.get(k + n - 1).expect("in range"))) & mask;
            seen.insert(value);
        }
        return Ok(seen.len());
    }
    let seen: HashSet<BitString> = (0..offsets).map(|k| x.window(k, n).expect("in range")).collect();
    Ok(seen.len())
}

/// Distinct aligned `n`-blocks of `x`.
fn aligned_blocks(x: &BitString, n: usize) -> Result<HashSet<BitString>, ForbiddenError> {
    if n == 0 || !x.len().is_multiple_of(n) {
        return Err(ForbiddenError::NotDivisible { block: n, len: x.len() });
    }
    Ok((0..x.len() / n).map(|b| x.window(b * n, n).expect("aligned block")).collect())
}

/// True iff the aligned `n`-blocks of `x` take at most `t` distinct values.
pub fn is_simple(x: &BitString, n: usize, t: u64) -> Result<bool, ForbiddenError> {
    Ok(aligned_blocks(x, n)?.len() as u64 <= t)
}

/// Number of `big_n`-bit strings whose aligned `n`-blocks take at most `t` distinct values:
/// `sum_{j=1..t} C(2^n, j) * surj(big_n/n, j)`.
pub fn count_simple(big_n: u64, n: u64, t: &BigUint) -> Result<BigUint, ForbiddenError> {
    if n == 0 || !big_n.is_multiple_of(n) {
        return Err(ForbiddenError::NotDivisible {
            block: n as usize,
            len: big_n as usize,
        });
    }
    Ok(count_layer(&pow2(n), big_n / n, t))
}

/// Strings of `blocks` blocks drawn from `pool` block values, with at most `t` distinct blocks.
fn count_layer(pool: &BigUint, blocks: u64, t: &BigUint) -> BigUint {
    if blocks == 0 {
        return BigUint::one();
    }
    let max_j = t.to_u64().map_or(blocks, |t| t.min(blocks));
    (1..=max_j).map(|j| binom_big(pool, j) * surjections(blocks, j)).sum()
}

/// A tower of block lengths `n_1 | n_2 | ... | n_{t+1}` with distinctness thresholds.
///
/// Depth 0 strings are all `n_1`-bit strings. A depth-`j` string has length
/// `n_{j+1}` and is made of depth-`(j-1)` blocks of length `n_j` taking at most
/// `thresholds[j-1]` distinct values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleChain {
    lengths: Vec<usize>,
    thresholds: Vec<BigUint>,
    pools: Vec<BigUint>,
}

impl SimpleChain {
    pub fn new(lengths: Vec<usize>, thresholds: Vec<BigUint>) -> Result<Self, ForbiddenError> {
        if lengths.is_empty() || thresholds.len() + 1 != lengths.len() {
            return Err(ForbiddenError::InvalidParams(format!(
                "{} lengths need {} thresholds, got {}",
                lengths.len(),
                lengths.len().saturating_sub(1),
                thresholds.len()
            )));
        }
        if lengths[0] == 0 {
            return Err(ForbiddenError::InvalidParams("block lengths must be positive".into()));
        }
        for pair in lengths.windows(2) {
            if pair[1] <= pair[0] || pair[1] % pair[0] != 0 {
                return Err(ForbiddenError::InvalidParams(format!(
                    "length {} must be a larger multiple of {}",
                    pair[1], pair[0]
                )));
            }
        }
        let mut pools = vec![pow2(lengths[0] as u64)];
        for j in 1..lengths.len() {
            let blocks = (lengths[j] / lengths[j - 1]) as u64;
            let next = count_layer(&pools[j - 1], blocks, &thresholds[j - 1]);
            pools.push(next);
        }
        Ok(Self {
            lengths,
            thresholds,
            pools,
        })
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn thresholds(&self) -> &[BigUint] {
        &self.thresholds
    }

    pub fn depth(&self) -> usize {
        self.lengths.len() - 1
    }

    /// Length of depth-`depth` strings.
    pub fn length(&self, depth: usize) -> usize {
        self.lengths[depth]
    }

    /// Number of depth-`depth` strings.
    pub fn pool(&self, depth: usize) -> &BigUint {
        &self.pools[depth]
    }

    pub fn is_member(&self, x: &BitString, depth: usize) -> bool {
        if x.len() != self.lengths[depth] {
            return false;
        }
        if depth == 0 {
            return true;
        }
        let Ok(blocks) = aligned_blocks(x, self.lengths[depth - 1]) else {
            return false;
        };
        BigUint::from(blocks.len()) <= self.thresholds[depth - 1] && blocks.iter().all(|b| self.is_member(b, depth - 1))
    }

    /// The depth-`depth` string of the given rank, `rank < pool(depth)`.
    ///
    /// Ranks order first by number of distinct blocks, then by the set of block
    /// values (colex over their own ranks), then by the surjective layout.
    pub fn unrank(&self, depth: usize, rank: &BigUint) -> BitString {
        assert!(rank < &self.pools[depth], "rank out of range");
        if depth == 0 {
            return biguint_to_bits(rank, self.lengths[0]);
        }
        let pool = &self.pools[depth - 1];
        let blocks = (self.lengths[depth] / self.lengths[depth - 1]) as u64;
        let max_k = self.thresholds[depth - 1].to_u64().map_or(blocks, |t| t.min(blocks));
        let mut r = rank.clone();
        for k in 1..=max_k {
            let layouts = surjections(blocks, k);
            let size = binom_big(pool, k) * &layouts;
            if r >= size {
                r -= size;
                continue;
            }
            let value_rank = &r / &layouts;
            let layout_rank = &r % &layouts;
            let values = unrank_combination(&value_rank, k);
            let layout = unrank_surjection(&layout_rank, blocks, k);
            let pieces: Vec<BitString> = values.iter().map(|v| self.unrank(depth - 1, v)).collect();
            let mut out = BitString::with_capacity(self.lengths[depth]);
            for &label in &layout {
                out.extend_from(&pieces[label]);
            }
            return out;
        }
        unreachable!("rank below pool size always lands in some block count")
    }
}

/// Width-`n` string of the numeral `v`, bit 0 most significant.
pub fn biguint_to_bits(v: &BigUint, n: usize) -> BitString {
    (0..n).map(|i| v.bit((n - 1 - i) as u64)).collect()
}

pub fn bits_to_biguint(x: &BitString) -> BigUint {
    let mut v = BigUint::zero();
    for (i, b) in x.iter().enumerate() {
        if b {
            v.set_bit((x.len() - 1 - i) as u64, true);
        }
    }
    v
}

/// Colex unranking: the `k`-subset `{c_1 < ... < c_k}` with `sum C(c_i, i) = rank`.
fn unrank_combination(rank: &BigUint, k: u64) -> Vec<BigUint> {
    let mut r = rank.clone();
    let mut out = Vec::with_capacity(k as usize);
    for i in (1..=k).rev() {
        // Largest v with C(v, i) <= r; C(i-1, i) = 0 so v >= i-1.
        let mut lo = BigUint::from(i - 1);
        let mut hi = lo.clone() + 1u32;
        while binom_big(&hi, i) <= r {
            hi <<= 1u32;
        }
        while &hi - &lo > BigUint::one() {
            let mid = (&lo + &hi) >> 1u32;
            if binom_big(&mid, i) <= r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        r -= binom_big(&lo, i);
        out.push(lo);
    }
    out.reverse();
    out
}

/// Ways to fill `slots` positions from `k` labels so that `missing` specific labels all appear.
fn completions(slots: u64, missing: u64, k: u64) -> BigUint {
    let mut plus = BigUint::zero();
    let mut minus = BigUint::zero();
    for i in 0..=missing {
        let term = binom_big(&BigUint::from(missing), i) * BigUint::from(k - i).pow(slots as u32);
        if i % 2 == 0 {
            plus += term;
        } else {
            minus += term;
        }
    }
    plus - minus
}

/// Lexicographic unranking of surjections `positions -> 0..k`.
fn unrank_surjection(rank: &BigUint, positions: u64, k: u64) -> Vec<usize> {
    let mut r = rank.clone();
    let mut used = vec![false; k as usize];
    let mut missing = k;
    let mut out = Vec::with_capacity(positions as usize);
    for pos in 0..positions {
        let slots = positions - pos - 1;
        for label in 0..k as usize {
            let still_missing = missing - u64::from(!used[label]);
            let ways = completions(slots, still_missing, k);
            if r < ways {
                if !used[label] {
                    used[label] = true;
                    missing -= 1;
                }
                out.push(label);
                break;
            }
            r -= ways;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainDoc {
    pub lengths: Vec<usize>,
    pub thresholds: Vec<String>,
}

impl SimpleChain {
    pub(crate) fn to_doc(&self) -> ChainDoc {
        ChainDoc {
            lengths: self.lengths.clone(),
            thresholds: self.thresholds.iter().map(ToString::to_string).collect(),
        }
    }

    pub(crate) fn from_doc(doc: &ChainDoc) -> Result<Self, ForbiddenError> {
        let thresholds = doc
            .thresholds
            .iter()
            .map(|t| t.parse().map_err(|_| ForbiddenError::InvalidParams(format!("bad threshold {t:?}"))))
            .collect::<Result<_, _>>()?;
        Self::new(doc.lengths.clone(), thresholds)
    }
}
