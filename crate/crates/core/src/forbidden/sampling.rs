use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use super::simple::{biguint_to_bits, SimpleChain};
use super::ForbiddenError;
use crate::bits::BitString;
use crate::combin::pow2;
use crate::ratio::{ExactProb, Ratio};
use crate::rng::{RandomSource, RandomStream};

/// Uniform `s`-subset of `0..pool` (Floyd's algorithm).
pub(crate) fn sample_ranks(pool: &BigUint, s: u64, stream: &mut RandomStream) -> Result<BTreeSet<BigUint>, ForbiddenError> {
    if BigUint::from(s) > *pool {
        return Err(ForbiddenError::PoolTooSmall {
            requested: s.to_string(),
            pool: pool.to_string(),
        });
    }
    let mut chosen = BTreeSet::new();
    let mut j = pool - BigUint::from(s);
    while &j < pool {
        let t = stream.below_big(&(&j + 1u32));
        if chosen.contains(&t) {
            chosen.insert(j.clone());
        } else {
            chosen.insert(t);
        }
        j += 1u32;
    }
    Ok(chosen)
}

/// Uniform set of `s` distinct `n`-bit strings, drawn from substream `n` of `rs`.
pub fn sample_uniform_set(n: usize, s: u64, rs: &RandomSource) -> Result<BTreeSet<BitString>, ForbiddenError> {
    let ranks = sample_ranks(&pow2(n as u64), s, &mut rs.stream(n as u64))?;
    Ok(ranks.iter().map(|r| biguint_to_bits(r, n)).collect())
}

/// Uniform set of `s` distinct depth-`depth` strings of `chain`, drawn from the
/// substream named by their length.
pub fn sample_pool_set(
    chain: &SimpleChain,
    depth: usize,
    s: u64,
    rs: &RandomSource,
) -> Result<BTreeSet<BitString>, ForbiddenError> {
    let length = chain.length(depth);
    let ranks = sample_ranks(chain.pool(depth), s, &mut rs.stream(length as u64))?;
    Ok(ranks.iter().map(|r| chain.unrank(depth, r)).collect())
}

/// `C(pool - d, s) / C(pool, s)`: chance a uniform `s`-subset of a pool misses `d` fixed members.
pub fn miss_probability_pool(d: u64, pool: &BigUint, s: &BigUint) -> ExactProb {
    if d == 0 || s.is_zero() {
        return ExactProb::one();
    }
    if BigUint::from(d) + s > *pool {
        return ExactProb::zero();
    }
    // Both products below telescope to the same ratio; take the shorter one.
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    match s.to_u64() {
        Some(s_small) if s_small < d => {
            let rest = pool - BigUint::from(d);
            for i in 0..s_small {
                num *= &rest - BigUint::from(i);
                den *= pool - BigUint::from(i);
            }
        }
        _ => {
            let rest = pool - s;
            for i in 0..d {
                num *= &rest - BigUint::from(i);
                den *= pool - BigUint::from(i);
            }
        }
    }
    ExactProb::new(num, den).expect("ratio of positive products below 1")
}

/// Miss probability for a uniform `s`-subset of the `n`-cube and `d` fixed strings.
pub fn miss_probability_random_set(d: u64, n: u64, s: &BigUint) -> ExactProb {
    miss_probability_pool(d, &pow2(n), s)
}

/// `(1 - 2^-h)^s`, the with-replacement estimate; an upper bound on the exact miss
/// probability whenever `d >= 2^h`.
pub fn with_replacement_miss(h: u64, s: u64) -> ExactProb {
    ExactProb::from_ratio(Ratio::one().checked_sub(&Ratio::pow2_neg(h)).expect("below 1"))
        .expect("in [0, 1]")
        .pow(s)
}
