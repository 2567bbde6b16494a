//! One forbidden string per start position, chosen against an explicit distribution.
//!
//! For a distribution `P` over strings of length `N + n - 1`, a positional family
//! `s_0, ..., s_{N-1}` is avoided by `x` when no window `x([k, k+n))` equals `s_k`.
//! A uniformly random family is avoided with probability `(1 - 2^-n)^N` per
//! string, so once that is below `epsilon` some fixed family is too; the search
//! below finds the first one in lexicographic order.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::dist::FiniteDistribution;
use crate::ratio::{ExactProb, Ratio};

/// Largest `(2^n)^N * |support|` the averaging identity will enumerate.
const IDENTITY_WORK_LIMIT: u64 = 1 << 26;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdversaryError {
    #[error("distribution has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(String),
    #[error("window length {n} does not fit strings of length {len}")]
    WindowTooLong { n: usize, len: usize },
    #[error("averaged avoid probability {averaged} is not below {epsilon}; enlarge N or n")]
    ExistenceFails { averaged: String, epsilon: String },
    #[error("deficit {deficit} exceeds epsilon/2 = {half}")]
    DeficitTooLarge { deficit: String, half: String },
    #[error("{0} is too large to enumerate")]
    TooLarge(String),
    #[error("distribution must have total mass 1, deficit is {0}")]
    NotNormalized(String),
    #[error("averaged avoid probability {got} differs from {expected}")]
    IdentityFails { got: String, expected: String },
    #[error("no family meets the bound")]
    NotFound,
    #[error("invalid family: {0}")]
    InvalidFamily(String),
}

/// `s_0, ..., s_{N-1}` with the avoid probability certified for `epsilon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionalFamily {
    n: usize,
    strings: Vec<BitString>,
    certificate: ExactProb,
    epsilon: ExactProb,
}

impl PositionalFamily {
    /// A family without a search behind it; the certificate is whatever the caller states.
    pub fn new(n: usize, strings: Vec<BitString>, certificate: ExactProb, epsilon: ExactProb) -> Result<Self, AdversaryError> {
        if let Some(bad) = strings.iter().find(|s| s.len() != n) {
            return Err(AdversaryError::InvalidFamily(format!("{bad} has length {}, expected {n}", bad.len())));
        }
        if strings.is_empty() {
            return Err(AdversaryError::InvalidFamily("no positions".into()));
        }
        Ok(Self {
            n,
            strings,
            certificate,
            epsilon,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of positions `N`.
    pub fn positions(&self) -> usize {
        self.strings.len()
    }

    pub fn strings(&self) -> &[BitString] {
        &self.strings
    }

    pub fn certificate(&self) -> &ExactProb {
        &self.certificate
    }

    pub fn epsilon(&self) -> &ExactProb {
        &self.epsilon
    }

    /// Length of the strings this family is played against, `N + n - 1`.
    pub fn string_length(&self) -> usize {
        self.strings.len() + self.n - 1
    }

    pub fn to_doc(&self) -> PositionalDoc {
        PositionalDoc {
            n: self.n,
            big_n: self.strings.len(),
            strings: self.strings.clone(),
            certificate: self.certificate.clone(),
            epsilon: self.epsilon.clone(),
        }
    }

    pub fn from_doc(doc: &PositionalDoc) -> Result<Self, AdversaryError> {
        if doc.big_n != doc.strings.len() {
            return Err(AdversaryError::InvalidFamily(format!(
                "N = {} but {} strings listed",
                doc.big_n,
                doc.strings.len()
            )));
        }
        Self::new(doc.n, doc.strings.clone(), doc.certificate.clone(), doc.epsilon.clone())
    }
}

/// JSON form: `{"n": 2, "N": 3, "strings": ["00", ...], "certificate": "7/16", "epsilon": "1/2"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionalDoc {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub strings: Vec<BitString>,
    pub certificate: ExactProb,
    pub epsilon: ExactProb,
}

fn check_epsilon(epsilon: &ExactProb) -> Result<(), AdversaryError> {
    if epsilon.is_zero() {
        return Err(AdversaryError::InvalidEpsilon(epsilon.to_string()));
    }
    Ok(())
}

/// `1 - 2^-n`.
fn keep_probability(n: usize) -> ExactProb {
    ExactProb::pow2_neg(n as u64).complement()
}

/// Smallest `N` with `(1 - 2^-n)^N < epsilon`.
pub fn required_n(n: usize, epsilon: &ExactProb) -> Result<u64, AdversaryError> {
    check_epsilon(epsilon)?;
    if epsilon.is_one() {
        return Ok(1);
    }
    let q = keep_probability(n);
    let below = |big_n: u64| q.pow(big_n) < *epsilon;
    // Floating estimate, then exact correction in either direction.
    let estimate = (epsilon.to_f64().ln() / q.to_f64().ln()).ceil();
    let mut big_n = if estimate.is_finite() && estimate >= 1.0 {
        estimate as u64
    } else {
        1
    };
    if big_n.saturating_mul(n as u64) > 1 << 26 {
        return Err(AdversaryError::TooLarge(format!("(1 - 2^-{n})^{big_n}")));
    }
    while !below(big_n) {
        big_n += 1;
    }
    while big_n > 1 && below(big_n - 1) {
        big_n -= 1;
    }
    Ok(big_n)
}

fn check_length(p: &FiniteDistribution, n: usize, positions: usize) -> Result<(), AdversaryError> {
    let expected = positions + n - 1;
    if p.length() != expected {
        return Err(AdversaryError::LengthMismatch {
            expected,
            got: p.length(),
        });
    }
    Ok(())
}

fn avoids(x: &BitString, strings: &[BitString], n: usize) -> bool {
    strings
        .iter()
        .enumerate()
        .all(|(k, s)| x.window(k, n).expect("in range") != *s)
}

/// `sum_{x avoids fam} P(x) + deficit`.
pub fn avoid_probability(p: &FiniteDistribution, fam: &PositionalFamily) -> Result<ExactProb, AdversaryError> {
    check_length(p, fam.n, fam.positions())?;
    let avoided: Ratio = p
        .iter()
        .filter(|(x, _)| avoids(x, &fam.strings, fam.n))
        .map(|(_, m)| m.as_ratio().clone())
        .sum();
    Ok(ExactProb::from_ratio(avoided + p.deficit().as_ratio().clone()).expect("at most total mass"))
}

/// Support masses scaled to integers over their common denominator.
struct IntegerMasses {
    windows: Vec<Vec<u64>>,
    weights: Vec<BigUint>,
    denominator: BigUint,
}

impl IntegerMasses {
    fn new(p: &FiniteDistribution, n: usize, positions: usize) -> Result<Self, AdversaryError> {
        if n > 64 {
            return Err(AdversaryError::TooLarge(format!("window length {n}")));
        }
        let denominator = p.iter().fold(BigUint::one(), |acc, (_, m)| acc.lcm(m.denom()));
        let mut windows = Vec::with_capacity(p.support_len());
        let mut weights = Vec::with_capacity(p.support_len());
        for (x, m) in p.iter() {
            windows.push((0..positions).map(|k| x.window_value(k, n)).collect());
            weights.push(m.numer() * (&denominator / m.denom()));
        }
        Ok(Self {
            windows,
            weights,
            denominator,
        })
    }

    fn to_prob(&self, weight: &BigUint) -> ExactProb {
        ExactProb::new(weight.clone(), self.denominator.clone()).expect("at most total mass")
    }
}

struct Search<'a> {
    masses: &'a IntegerMasses,
    n: usize,
    positions: usize,
    /// The support may keep strictly less than `limit_num / limit_den` of the weight unhit.
    limit_num: BigUint,
    limit_den: BigUint,
    chosen: Vec<u64>,
}

impl Search<'_> {
    fn below_limit(&self, weight: &BigUint) -> bool {
        weight * &self.limit_den < self.limit_num
    }

    /// Unhit weight that no choice at positions `k..` can remove, by a per-position bound.
    fn lower_bound(&self, unhit: &[usize], total: &BigUint, k: usize) -> BigUint {
        let mut removable = BigUint::zero();
        for pos in k..self.positions {
            let mut per_value: BTreeMap<u64, BigUint> = BTreeMap::new();
            for &i in unhit {
                *per_value.entry(self.masses.windows[i][pos]).or_default() += &self.masses.weights[i];
            }
            removable += per_value.into_values().max().unwrap_or_default();
            if &removable >= total {
                return BigUint::zero();
            }
        }
        total - removable
    }

    fn run(&mut self, unhit: Vec<usize>, total: BigUint, k: usize) -> Option<BigUint> {
        if k == self.positions {
            return self.below_limit(&total).then_some(total);
        }
        if !self.below_limit(&self.lower_bound(&unhit, &total, k)) {
            return None;
        }
        let mut by_value: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for &i in &unhit {
            by_value.entry(self.masses.windows[i][k]).or_default().push(i);
        }
        // Values hitting nothing all leave the same subproblem; only the first is tried.
        let top = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        let first_idle = (0..=top).find(|v| !by_value.contains_key(v));
        let mut candidates: Vec<u64> = by_value.keys().copied().collect();
        if let Some(v) = first_idle {
            candidates.push(v);
            candidates.sort_unstable();
        }
        for v in candidates {
            self.chosen.push(v);
            let found = match by_value.get(&v) {
                Some(hit) => {
                    let removed: BigUint = hit.iter().map(|&i| &self.masses.weights[i]).sum();
                    let rest: Vec<usize> = unhit.iter().copied().filter(|i| !hit.contains(i)).collect();
                    self.run(rest, &total - removed, k + 1)
                }
                None => self.run(unhit.clone(), total.clone(), k + 1),
            };
            if found.is_some() {
                return found;
            }
            self.chosen.pop();
        }
        None
    }
}

/// `(1 - 2^-n)^N * support mass + deficit`, the avoid probability averaged over all families.
pub fn averaged_avoid(p: &FiniteDistribution, n: usize, positions: usize) -> ExactProb {
    let support = &keep_probability(n).pow(positions as u64) * &p.support_mass();
    support.checked_add(p.deficit()).expect("at most the total mass")
}

/// The first family in lexicographic order whose avoid probability is below `epsilon`.
///
/// `N = |P| - n + 1`. Fails up front when even the average over all families
/// is not below `epsilon`, since then nothing guarantees a family exists.
pub fn positional_family_search(
    p: &FiniteDistribution,
    n: usize,
    epsilon: &ExactProb,
) -> Result<PositionalFamily, AdversaryError> {
    check_epsilon(epsilon)?;
    if n == 0 || n > p.length() {
        return Err(AdversaryError::WindowTooLong { n, len: p.length() });
    }
    let positions = p.length() - n + 1;
    let averaged = averaged_avoid(p, n, positions);
    if averaged >= *epsilon {
        return Err(AdversaryError::ExistenceFails {
            averaged: averaged.to_string(),
            epsilon: epsilon.to_string(),
        });
    }
    let masses = IntegerMasses::new(p, n, positions)?;
    // Support weight left unhit must be below (epsilon - deficit) * denominator.
    let room = epsilon.as_ratio().checked_sub(p.deficit().as_ratio()).expect("averaged bound implies room");
    let mut search = Search {
        masses: &masses,
        n,
        positions,
        limit_num: room.numer() * &masses.denominator,
        limit_den: room.denom().clone(),
        chosen: Vec::with_capacity(positions),
    };
    let total: BigUint = masses.weights.iter().sum();
    let unhit_weight = search.run((0..masses.weights.len()).collect(), total, 0).ok_or(AdversaryError::NotFound)?;
    let strings = search.chosen.iter().map(|&v| BitString::from_u64(v, n)).collect();
    let certificate = masses
        .to_prob(&unhit_weight)
        .checked_add(p.deficit())
        .expect("below epsilon");
    PositionalFamily::new(n, strings, certificate, epsilon.clone())
}

/// A search family together with the bound on its enumerated part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncatedFamily {
    pub family: PositionalFamily,
    /// Avoid probability over the enumerated support alone, below `epsilon - deficit`.
    pub enumerated: ExactProb,
    pub deficit: ExactProb,
}

/// Search on the enumerated part of a distribution whose missing mass is at most `epsilon/2`.
///
/// The enumerated part is held to `epsilon - deficit`, so the full distribution,
/// whose extra mass all sits in the deficit, stays below `epsilon`.
pub fn truncated_search(p: &FiniteDistribution, n: usize, epsilon: &ExactProb) -> Result<TruncatedFamily, AdversaryError> {
    check_epsilon(epsilon)?;
    let half = epsilon.half();
    if *p.deficit() > half {
        return Err(AdversaryError::DeficitTooLarge {
            deficit: p.deficit().to_string(),
            half: half.to_string(),
        });
    }
    let family = positional_family_search(p, n, epsilon)?;
    let enumerated = family.certificate.checked_sub(p.deficit()).expect("certificate includes the deficit");
    Ok(TruncatedFamily {
        family,
        enumerated,
        deficit: p.deficit().clone(),
    })
}

/// Average avoid probability over all `(2^n)^N` families, by enumeration.
///
/// Checks the result against `(1 - 2^-n)^N` and returns it.
pub fn expected_avoid_identity(p: &FiniteDistribution, n: usize, positions: usize) -> Result<ExactProb, AdversaryError> {
    check_length(p, n, positions)?;
    if !p.deficit().is_zero() {
        return Err(AdversaryError::NotNormalized(p.deficit().to_string()));
    }
    let bits = n as u64 * positions as u64;
    let work = (p.support_len() as u64).saturating_mul(positions as u64);
    if bits > 20 || (1u64 << bits).saturating_mul(work) > IDENTITY_WORK_LIMIT {
        return Err(AdversaryError::TooLarge(format!("(2^{n})^{positions} families")));
    }
    let masses = IntegerMasses::new(p, n, positions)?;
    let mask = (1u64 << n) - 1;
    let mut total = BigUint::zero();
    for code in 0..1u64 << bits {
        // Position 0 occupies the most significant n bits of the code.
        for (i, windows) in masses.windows.iter().enumerate() {
            let avoided = (0..positions).all(|k| windows[k] != (code >> (n * (positions - 1 - k))) & mask);
            if avoided {
                total += &masses.weights[i];
            }
        }
    }
    let got = ExactProb::new(total, masses.denominator.clone() << bits).expect("average of probabilities");
    let expected = keep_probability(n).pow(positions as u64);
    if got != expected {
        return Err(AdversaryError::IdentityFails {
            got: got.to_string(),
            expected: expected.to_string(),
        });
    }
    Ok(got)
}

/// Number of positions a family needs so a random one is avoided below `epsilon`.
pub fn positions_for(n: usize, epsilon: &ExactProb) -> Result<usize, AdversaryError> {
    let big_n = required_n(n, epsilon)?;
    big_n
        .to_usize()
        .ok_or_else(|| AdversaryError::TooLarge(format!("N = {big_n}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u64, d: u64) -> ExactProb {
        ExactProb::new(n, d).unwrap()
    }

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn family(strings: &[&str]) -> PositionalFamily {
        PositionalFamily::new(strings[0].len(), strings.iter().map(|s| bs(s)).collect(), ExactProb::one(), ExactProb::one()).unwrap()
    }

    #[test]
    fn required_n_examples() {
        assert_eq!(required_n(2, &p(1, 2)).unwrap(), 3);
        assert_eq!(required_n(5, &ExactProb::one()).unwrap(), 1);
        assert!(required_n(2, &ExactProb::zero()).is_err());
        for n in 1..6 {
            for (a, b) in [(1u64, 2u64), (1, 3), (1, 10), (3, 100)] {
                let eps = p(a, b);
                let big_n = required_n(n, &eps).unwrap();
                let q = keep_probability(n);
                assert!(q.pow(big_n) < eps);
                assert!(big_n == 1 || q.pow(big_n - 1) >= eps);
                assert!(required_n(n, &eps.half()).unwrap() >= big_n);
            }
        }
    }

    #[test]
    fn avoid_probability_examples() {
        let u = FiniteDistribution::uniform(4).unwrap();
        assert_eq!(avoid_probability(&u, &family(&["00", "00", "00"])).unwrap(), p(8, 16));
        let point = FiniteDistribution::point(bs("0011"));
        assert!(avoid_probability(&point, &family(&["00", "11", "11"])).unwrap().is_zero());
        let empty = FiniteDistribution::new(4, BTreeMap::new()).unwrap();
        assert!(avoid_probability(&empty, &family(&["00", "00", "00"])).unwrap().is_one());
        assert!(avoid_probability(&u, &family(&["00", "00"])).is_err());
    }

    /// All 64 families against uniform B^4, in lexicographic order.
    fn toy_oracle() -> Vec<(Vec<String>, ExactProb)> {
        let u = FiniteDistribution::uniform(4).unwrap();
        (0..64u64)
            .map(|code| {
                let strings: Vec<String> = (0..3).map(|k| BitString::from_u64((code >> (4 - 2 * k)) & 3, 2).to_string()).collect();
                let refs: Vec<&str> = strings.iter().map(String::as_str).collect();
                let avoid = avoid_probability(&u, &family(&refs)).unwrap();
                (strings, avoid)
            })
            .collect()
    }

    #[test]
    fn toy_search_is_first_in_lex_order() {
        let u = FiniteDistribution::uniform(4).unwrap();
        let found = positional_family_search(&u, 2, &p(1, 2)).unwrap();
        let names: Vec<String> = found.strings().iter().map(ToString::to_string).collect();
        assert_eq!(names, ["00", "00", "10"]);
        assert_eq!(found.certificate(), &p(7, 16));
        let oracle = toy_oracle();
        assert_eq!(oracle[0].1, p(8, 16));
        assert_eq!(oracle[1].1, p(8, 16));
        let first = oracle.iter().find(|(_, a)| *a < p(1, 2)).unwrap();
        assert_eq!(first.0, names);
        assert_eq!(&first.1, found.certificate());
    }

    #[test]
    fn search_matches_oracle_for_every_threshold() {
        let u = FiniteDistribution::uniform(4).unwrap();
        let oracle = toy_oracle();
        for num in 1..=16u64 {
            let eps = p(num, 16);
            let expected = oracle.iter().find(|(_, a)| *a < eps);
            match positional_family_search(&u, 2, &eps) {
                Ok(found) => {
                    let names: Vec<String> = found.strings().iter().map(ToString::to_string).collect();
                    assert_eq!(Some(&names), expected.map(|e| &e.0), "eps {eps}");
                }
                Err(AdversaryError::ExistenceFails { .. }) => assert!(keep_probability(2).pow(3) >= eps),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn point_mass_searches() {
        // (7/8)^6 < 1/2, so six positions of 3-bit windows are needed.
        let x = bs("10110111");
        let found = positional_family_search(&FiniteDistribution::point(x.clone()), 3, &p(1, 2)).unwrap();
        assert!(found.certificate().is_zero());
        assert_eq!(avoid_probability(&FiniteDistribution::point(x.clone()), &found).unwrap(), *found.certificate());
        // Idle choices come first in lex order, so only the last position hits.
        let names: Vec<String> = found.strings().iter().map(ToString::to_string).collect();
        assert_eq!(names, ["000", "000", "000", "000", "000", "111"]);
        assert!(positional_family_search(&FiniteDistribution::point(bs("10110")), 3, &p(1, 2)).is_err());
    }

    #[test]
    fn truncated_toy() {
        let scaled = FiniteDistribution::uniform(4).unwrap().scaled(&p(7, 8));
        let out = truncated_search(&scaled, 2, &p(1, 2)).unwrap();
        assert!(out.enumerated < p(3, 8));
        assert_eq!(out.deficit, p(1, 8));
        let recomputed = avoid_probability(&scaled, &out.family).unwrap();
        assert_eq!(&recomputed, out.family.certificate());
        assert!(recomputed < p(1, 2));
        assert!(matches!(
            truncated_search(&scaled, 2, &p(1, 8)),
            Err(AdversaryError::DeficitTooLarge { .. })
        ));
        let exact = truncated_search(&FiniteDistribution::uniform(4).unwrap(), 2, &p(1, 2)).unwrap();
        assert_eq!(exact.family.strings(), positional_family_search(&FiniteDistribution::uniform(4).unwrap(), 2, &p(1, 2)).unwrap().strings());
    }

    #[test]
    fn identity_examples() {
        assert_eq!(expected_avoid_identity(&FiniteDistribution::uniform(4).unwrap(), 2, 3).unwrap(), p(27, 64));
        for n in 1..=3usize {
            for positions in 1..=4usize {
                if n * positions > 12 {
                    continue;
                }
                let len = positions + n - 1;
                let x = BitString::from_u64(0b1011_0110_1 & ((1 << len) - 1), len);
                let got = expected_avoid_identity(&FiniteDistribution::point(x), n, positions).unwrap();
                assert_eq!(got, keep_probability(n).pow(positions as u64));
            }
        }
        let scaled = FiniteDistribution::uniform(4).unwrap().scaled(&p(1, 2));
        assert!(expected_avoid_identity(&scaled, 2, 3).is_err());
    }

    #[test]
    fn doc_round_trip() {
        let u = FiniteDistribution::uniform(4).unwrap();
        let found = positional_family_search(&u, 2, &p(1, 2)).unwrap();
        let text = serde_json::to_string(&found.to_doc()).unwrap();
        assert!(text.contains("\"certificate\":\"7/16\""));
        assert!(text.contains("\"N\":3"));
        let back = PositionalFamily::from_doc(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, found);
    }
}
