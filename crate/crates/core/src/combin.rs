//! Exact combinatorial counting.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::ratio::Ratio;

/// `C(a, b)`; zero when `b > a`.
pub fn binom(a: u64, b: u64) -> BigUint {
    binom_big(&BigUint::from(a), b)
}

/// `C(a, b)` for a big upper argument.
pub fn binom_big(a: &BigUint, b: u64) -> BigUint {
    if BigUint::from(b) > *a {
        return BigUint::zero();
    }
    // Use the smaller of b and a - b when a is small enough to matter.
    let b = match (a - BigUint::from(b)).to_u64() {
        Some(rest) if rest < b => rest,
        _ => b,
    };
    let mut acc = BigUint::one();
    for i in 0..b {
        acc *= a - BigUint::from(i);
        acc /= BigUint::from(i + 1);
    }
    acc
}

/// `2^k`.
pub fn pow2(k: u64) -> BigUint {
    BigUint::one() << k
}

/// Number of functions from `positions` slots onto exactly `values` labelled values.
pub fn surjections(positions: u64, values: u64) -> BigUint {
    let mut total = BigInt::zero();
    for i in 0..=values {
        let term = BigInt::from(binom(values, i)) * BigInt::from(BigUint::from(values - i).pow(positions as u32));
        if i % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    debug_assert!(!total.is_negative());
    total.to_biguint().unwrap_or_default()
}

/// Surjection counts onto `0..=max_values` values, advanced one position at a time.
///
/// Holds Stirling numbers of the second kind `S(p, j)` and yields `j! S(p, j)`.
#[derive(Debug, Clone)]
pub struct SurjectionTable {
    positions: u64,
    stirling: Vec<BigUint>,
    factorials: Vec<BigUint>,
}

impl SurjectionTable {
    pub fn new(max_values: usize) -> Self {
        let mut stirling = vec![BigUint::zero(); max_values + 1];
        stirling[0] = BigUint::one();
        let mut factorials = vec![BigUint::one(); max_values + 1];
        for j in 1..=max_values {
            factorials[j] = &factorials[j - 1] * BigUint::from(j);
        }
        Self {
            positions: 0,
            stirling,
            factorials,
        }
    }

    pub fn positions(&self) -> u64 {
        self.positions
    }

    pub fn advance(&mut self) {
        for j in (1..self.stirling.len()).rev() {
            let next = &self.stirling[j] * BigUint::from(j) + &self.stirling[j - 1];
            self.stirling[j] = next;
        }
        self.stirling[0] = BigUint::zero();
        self.positions += 1;
    }

    pub fn surjections(&self, values: usize) -> BigUint {
        &self.stirling[values] * &self.factorials[values]
    }
}

/// `floor(2^(alpha * n))`, exact.
pub fn floor_pow2(alpha: &Ratio, n: u64) -> BigUint {
    let exponent = alpha.numer() * BigUint::from(n);
    let q = alpha.denom().to_u32().expect("alpha denominator fits in u32");
    let shift = exponent.to_u64().expect("exponent fits in u64");
    pow2(shift).nth_root(q)
}

/// Smallest `k` with `2^k >= value`, i.e. the bit width needed to index `value` items.
pub fn ceil_log2(value: u64) -> u32 {
    if value <= 1 {
        0
    } else {
        64 - (value - 1).leading_zeros()
    }
}
