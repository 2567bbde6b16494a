use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;

use crate::ratio::Ratio;

/// A convergent series of non-negative rationals `a_m` with a certified tail bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightSeries {
    /// `a_m = 0`.
    Zero,
    /// `a_m = 1/(m(m+1))` for `m >= 1`, `a_0 = 0`; tail from `M >= 1` is exactly `1/M`.
    InverseTriangular,
    /// `a_m = r^m` with `0 <= r < 1`; tail is exactly `r^M/(1-r)`.
    Geometric(Ratio),
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("unknown weight preset {0:?}; expected zero, inverse-triangular or geometric:<num/den> with ratio below 1")]
pub struct UnknownPreset(pub String);

impl WeightSeries {
    pub fn term(&self, m: u32) -> Ratio {
        match self {
            WeightSeries::Zero => Ratio::zero(),
            WeightSeries::InverseTriangular if m == 0 => Ratio::zero(),
            WeightSeries::InverseTriangular => {
                Ratio::new(1u32, BigUint::from(m) * BigUint::from(m + 1)).expect("nonzero")
            }
            WeightSeries::Geometric(r) => r.pow(u64::from(m)),
        }
    }

    /// An upper bound on `sum_{m >= from} a_m`; exact for every preset.
    pub fn tail_bound(&self, from: u32) -> Ratio {
        match self {
            WeightSeries::Zero => Ratio::zero(),
            WeightSeries::InverseTriangular => Ratio::new(1u32, from.max(1)).expect("nonzero"),
            WeightSeries::Geometric(r) => {
                let rest = Ratio::one().checked_sub(r).expect("ratio below 1");
                r.pow(u64::from(from)).checked_div(&rest).expect("ratio below 1")
            }
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for WeightSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSeries::Zero => f.write_str("zero"),
            WeightSeries::InverseTriangular => f.write_str("inverse-triangular"),
            WeightSeries::Geometric(r) => write!(f, "geometric:{r}"),
        }
    }
}

impl FromStr for WeightSeries {
    type Err = UnknownPreset;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(WeightSeries::Zero),
            "inverse-triangular" => Ok(WeightSeries::InverseTriangular),
            _ => {
                let r: Ratio = s
                    .strip_prefix("geometric:")
                    .and_then(|r| r.parse().ok())
                    .ok_or_else(|| UnknownPreset(s.to_string()))?;
                if r >= Ratio::one() {
                    return Err(UnknownPreset(s.to_string()));
                }
                Ok(WeightSeries::Geometric(r))
            }
        }
    }
}

/// The level-`m0` budget certificate: `tail(M) + sum_{m>=M} (m^2 + 1)/2^m`.
///
/// Uses `sum_{m>=M} m^2/2^m = (2M^2+4M+6)/2^M` and `sum_{m>=M} 2^-m = 2^(1-M)`.
/// The `+1` absorbs the ceiling in each level's progression count.
pub fn m0_certificate(weights: &WeightSeries, m: u32) -> Ratio {
    let big_m = u64::from(m);
    let squares = Ratio::new(2 * big_m * big_m + 4 * big_m + 6, 1u32).expect("nonzero") * Ratio::pow2_neg(big_m);
    let ceilings = Ratio::integer(2u32) * Ratio::pow2_neg(big_m);
    weights.tail_bound(m) + squares + ceilings
}

/// Smallest level whose budget certificate is at most 1.
pub fn choose_m0(weights: &WeightSeries) -> u32 {
    (0..)
        .find(|&m| m0_certificate(weights, m) <= Ratio::one())
        .expect("certificate tends to zero")
}

/// Progressions assigned at level `m`: `ceil(a_m 2^m + m^2)`.
pub fn level_count(weights: &WeightSeries, m: u32) -> BigUint {
    let boosted = weights.term(m) * Ratio::integer(BigUint::from(1u32) << m) + Ratio::integer(u64::from(m) * u64::from(m));
    boosted.ceil()
}
