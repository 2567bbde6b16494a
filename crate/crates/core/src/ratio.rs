//! Exact non-negative rationals and probabilities over big integers.
//!
//! Nothing in here ever rounds. Values are kept in lowest terms so derived
//! equality is value equality.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RatioError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("cannot parse rational {0:?}; expected \"num/den\" or an integer")]
    Parse(String),
    #[error("subtraction would be negative")]
    Negative,
    #[error("probability {0} exceeds 1")]
    AboveOne(String),
}

/// A non-negative rational number in lowest terms.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: BigUint,
    den: BigUint,
}

impl Ratio {
    pub fn new(num: impl Into<BigUint>, den: impl Into<BigUint>) -> Result<Self, RatioError> {
        let (num, den) = (num.into(), den.into());
        if den.is_zero() {
            return Err(RatioError::ZeroDenominator);
        }
        Ok(Self::reduced(num, den))
    }

    pub fn integer(value: impl Into<BigUint>) -> Self {
        Self {
            num: value.into(),
            den: BigUint::one(),
        }
    }

    pub fn zero() -> Self {
        Self::integer(0u32)
    }

    pub fn one() -> Self {
        Self::integer(1u32)
    }

    /// `2^-k`.
    pub fn pow2_neg(k: u64) -> Self {
        Self {
            num: BigUint::one(),
            den: BigUint::one() << k,
        }
    }

    fn reduced(num: BigUint, den: BigUint) -> Self {
        if num.is_zero() {
            return Self::zero();
        }
        let g = num.gcd(&den);
        if g.is_one() {
            Self { num, den }
        } else {
            Self {
                num: num / &g,
                den: den / g,
            }
        }
    }

    pub fn numer(&self) -> &BigUint {
        &self.num
    }

    pub fn denom(&self) -> &BigUint {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn checked_sub(&self, other: &Ratio) -> Result<Ratio, RatioError> {
        let left = &self.num * &other.den;
        let right = &other.num * &self.den;
        if left < right {
            return Err(RatioError::Negative);
        }
        Ok(Self::reduced(left - right, &self.den * &other.den))
    }

    pub fn checked_div(&self, other: &Ratio) -> Result<Ratio, RatioError> {
        if other.is_zero() {
            return Err(RatioError::ZeroDenominator);
        }
        Ok(Self::reduced(&self.num * &other.den, &self.den * &other.num))
    }

    pub fn pow(&self, exp: u64) -> Ratio {
        // Powers of a reduced fraction stay reduced.
        Self {
            num: num_traits::pow::Pow::pow(&self.num, exp),
            den: num_traits::pow::Pow::pow(&self.den, exp),
        }
    }

    pub fn ceil(&self) -> BigUint {
        let (q, r) = self.num.div_rem(&self.den);
        if r.is_zero() {
            q
        } else {
            q + 1u32
        }
    }

    pub fn floor(&self) -> BigUint {
        &self.num / &self.den
    }

    /// Lossy conversion for reports only.
    pub fn to_f64(&self) -> f64 {
        let shift = self.num.bits().max(self.den.bits()).saturating_sub(1000);
        let n = (&self.num >> shift).to_string().parse::<f64>().unwrap_or(f64::INFINITY);
        let d = (&self.den >> shift).to_string().parse::<f64>().unwrap_or(f64::INFINITY);
        n / d
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.den == other.den {
            return self.num.cmp(&other.num);
        }
        (&self.num * &other.den).cmp(&(&other.num * &self.den))
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Ratio {
    type Output = Ratio;
    fn add(self, rhs: &Ratio) -> Ratio {
        if self.den == rhs.den {
            return Ratio::reduced(&self.num + &rhs.num, self.den.clone());
        }
        Ratio::reduced(&self.num * &rhs.den + &rhs.num * &self.den, &self.den * &rhs.den)
    }
}

impl Add for Ratio {
    type Output = Ratio;
    fn add(self, rhs: Ratio) -> Ratio {
        &self + &rhs
    }
}

impl Mul for &Ratio {
    type Output = Ratio;
    fn mul(self, rhs: &Ratio) -> Ratio {
        Ratio::reduced(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}

impl Mul for Ratio {
    type Output = Ratio;
    fn mul(self, rhs: Ratio) -> Ratio {
        &self * &rhs
    }
}

impl std::iter::Sum for Ratio {
    fn sum<I: Iterator<Item = Ratio>>(iter: I) -> Ratio {
        iter.fold(Ratio::zero(), |acc, x| &acc + &x)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl fmt::Debug for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Ratio {
    type Err = RatioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RatioError::Parse(s.to_string());
        let s = s.trim();
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let num: BigUint = num.parse().map_err(|_| bad())?;
        let den: BigUint = den.parse().map_err(|_| bad())?;
        Ratio::new(num, den)
    }
}

impl From<u64> for Ratio {
    fn from(v: u64) -> Self {
        Ratio::integer(v)
    }
}

/// An exact probability: a rational in `[0, 1]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExactProb(Ratio);

impl ExactProb {
    pub fn new(num: impl Into<BigUint>, den: impl Into<BigUint>) -> Result<Self, RatioError> {
        Self::from_ratio(Ratio::new(num, den)?)
    }

    pub fn from_ratio(r: Ratio) -> Result<Self, RatioError> {
        if r.numer() > r.denom() {
            return Err(RatioError::AboveOne(r.to_string()));
        }
        Ok(Self(r))
    }

    pub fn zero() -> Self {
        Self(Ratio::zero())
    }

    pub fn one() -> Self {
        Self(Ratio::one())
    }

    pub fn pow2_neg(k: u64) -> Self {
        Self(Ratio::pow2_neg(k))
    }

    pub fn as_ratio(&self) -> &Ratio {
        &self.0
    }

    pub fn into_ratio(self) -> Ratio {
        self.0
    }

    pub fn numer(&self) -> &BigUint {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigUint {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.numer() == self.0.denom()
    }

    /// `1 - p`.
    pub fn complement(&self) -> ExactProb {
        Self(Ratio::reduced(self.denom() - self.numer(), self.denom().clone()))
    }

    pub fn checked_add(&self, other: &ExactProb) -> Result<ExactProb, RatioError> {
        Self::from_ratio(&self.0 + &other.0)
    }

    pub fn checked_sub(&self, other: &ExactProb) -> Result<ExactProb, RatioError> {
        Ok(Self(self.0.checked_sub(&other.0)?))
    }

    pub fn pow(&self, exp: u64) -> ExactProb {
        Self(self.0.pow(exp))
    }

    pub fn half(&self) -> ExactProb {
        Self(&self.0 * &Ratio::pow2_neg(1))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
}

impl Mul for &ExactProb {
    type Output = ExactProb;
    fn mul(self, rhs: &ExactProb) -> ExactProb {
        ExactProb(&self.0 * &rhs.0)
    }
}

impl Mul for ExactProb {
    type Output = ExactProb;
    fn mul(self, rhs: ExactProb) -> ExactProb {
        &self * &rhs
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for ExactProb {
    type Err = RatioError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_ratio(s.parse()?)
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl serde::Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> serde::Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let text = String::deserialize(deserializer)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Ratio);
string_serde!(ExactProb);
