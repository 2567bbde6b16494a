//! Explicit (sub)probability distributions over fixed-length strings.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bits::BitString;
use crate::ratio::{ExactProb, Ratio, RatioError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DistError {
    #[error("support string {string} has length {got}, expected {expected}")]
    WrongLength {
        string: String,
        got: usize,
        expected: usize,
    },
    #[error("masses sum to {0}, which exceeds 1")]
    MassAboveOne(String),
    #[error("masses plus deficit sum to {0}, not 1")]
    NotNormalized(String),
    #[error("uniform distribution over length {0} is too large to enumerate")]
    TooLarge(usize),
    #[error(transparent)]
    Ratio(#[from] RatioError),
    #[error("invalid distribution document: {0}")]
    Format(String),
}

/// A distribution over strings of one length, with the missing mass kept as
/// an explicit deficit ("no output").
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteDistribution {
    length: usize,
    masses: BTreeMap<BitString, ExactProb>,
    deficit: ExactProb,
}

impl FiniteDistribution {
    /// Builds a distribution whose deficit is whatever mass the support leaves over.
    pub fn new(length: usize, masses: BTreeMap<BitString, ExactProb>) -> Result<Self, DistError> {
        let total = Self::check_support(length, &masses)?;
        let deficit = ExactProb::one()
            .as_ratio()
            .checked_sub(&total)
            .map_err(|_| DistError::MassAboveOne(total.to_string()))?;
        Ok(Self {
            length,
            masses: masses.into_iter().filter(|(_, m)| !m.is_zero()).collect(),
            deficit: ExactProb::from_ratio(deficit)?,
        })
    }

    /// Builds a distribution with a stated deficit; masses and deficit must sum to exactly 1.
    pub fn with_deficit(
        length: usize,
        masses: BTreeMap<BitString, ExactProb>,
        deficit: ExactProb,
    ) -> Result<Self, DistError> {
        let total = &Self::check_support(length, &masses)? + deficit.as_ratio();
        if total != Ratio::one() {
            return Err(DistError::NotNormalized(total.to_string()));
        }
        Ok(Self {
            length,
            masses: masses.into_iter().filter(|(_, m)| !m.is_zero()).collect(),
            deficit,
        })
    }

    fn check_support(length: usize, masses: &BTreeMap<BitString, ExactProb>) -> Result<Ratio, DistError> {
        for s in masses.keys() {
            if s.len() != length {
                return Err(DistError::WrongLength {
                    string: s.to_string(),
                    got: s.len(),
                    expected: length,
                });
            }
        }
        Ok(masses.values().map(|m| m.as_ratio().clone()).sum())
    }

    /// Uniform over all strings of `length <= 24` bits.
    pub fn uniform(length: usize) -> Result<Self, DistError> {
        if length > 24 {
            return Err(DistError::TooLarge(length));
        }
        let mass = ExactProb::pow2_neg(length as u64);
        let masses = (0..1u64 << length)
            .map(|v| (BitString::from_u64(v, length), mass.clone()))
            .collect();
        Ok(Self {
            length,
            masses,
            deficit: ExactProb::zero(),
        })
    }

    pub fn point(x: BitString) -> Self {
        Self {
            length: x.len(),
            masses: BTreeMap::from([(x, ExactProb::one())]),
            deficit: ExactProb::zero(),
        }
    }

    /// Scales every support mass by `factor`, moving the removed mass into the deficit.
    pub fn scaled(&self, factor: &ExactProb) -> Self {
        let masses: BTreeMap<_, _> = self
            .masses
            .iter()
            .map(|(s, m)| (s.clone(), m * factor))
            .filter(|(_, m)| !m.is_zero())
            .collect();
        let support: Ratio = masses.values().map(|m: &ExactProb| m.as_ratio().clone()).sum();
        let deficit = Ratio::one().checked_sub(&support).expect("scaled mass at most 1");
        Self {
            length: self.length,
            masses,
            deficit: ExactProb::from_ratio(deficit).expect("deficit in [0, 1]"),
        }
    }

    /// Total mass on the support, `1 - deficit`.
    pub fn support_mass(&self) -> ExactProb {
        self.deficit.complement()
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn deficit(&self) -> &ExactProb {
        &self.deficit
    }

    pub fn masses(&self) -> &BTreeMap<BitString, ExactProb> {
        &self.masses
    }

    pub fn mass(&self, x: &BitString) -> ExactProb {
        self.masses.get(x).cloned().unwrap_or_else(ExactProb::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BitString, &ExactProb)> {
        self.masses.iter()
    }

    pub fn support_len(&self) -> usize {
        self.masses.len()
    }

    pub fn to_json(&self) -> DistributionDoc {
        DistributionDoc {
            length: self.length,
            masses: self.masses.iter().map(|(s, m)| (s.to_string(), m.to_string())).collect(),
            deficit: self.deficit.to_string(),
        }
    }

    pub fn from_json(doc: &DistributionDoc) -> Result<Self, DistError> {
        let mut masses = BTreeMap::new();
        for (s, m) in &doc.masses {
            let key: BitString = s.parse().map_err(|e| DistError::Format(format!("{s:?}: {e}")))?;
            masses.insert(key, m.parse::<ExactProb>()?);
        }
        Self::with_deficit(doc.length, masses, doc.deficit.parse()?)
    }
}

/// JSON form: `{"length": M, "masses": {"<bits>": "num/den"}, "deficit": "num/den"}`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DistributionDoc {
    pub length: usize,
    pub masses: BTreeMap<String, String>,
    #[serde(default = "zero_string")]
    pub deficit: String,
}

fn zero_string() -> String {
    "0/1".into()
}
