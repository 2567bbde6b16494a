use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::weights::{level_count, m0_certificate, WeightSeries};
use super::SpreadError;
use crate::bits::BitString;
use crate::ratio::Ratio;
use crate::rng::RandomSource;

/// Highest level ever processed; keeps differences `2^m` and source indices within `u64`.
pub const LEVEL_CAP: u32 = 62;

/// Highest level that is materialized with every progression (needed for window recovery).
pub const FULL_TRACK_LIMIT: u32 = 24;

/// How many progressions each level receives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CountRule {
    /// `ceil(a_m 2^m + m^2)` from a certified series.
    Weights(WeightSeries),
    /// Hand-chosen counts for toy allocations; levels not listed get none.
    /// Never used for certificates.
    Explicit(BTreeMap<u32, u64>),
}

impl CountRule {
    fn count(&self, m: u32) -> Result<u64, SpreadError> {
        match self {
            CountRule::Weights(w) => level_count(w, m).to_u64().ok_or(SpreadError::InsufficientProgressions {
                level: m,
                available: "2^63".into(),
                needed: level_count(w, m).to_string(),
            }),
            CountRule::Explicit(counts) => Ok(counts.get(&m).copied().unwrap_or(0)),
        }
    }

    fn last_explicit_level(&self) -> Option<u32> {
        match self {
            CountRule::Weights(_) => None,
            CountRule::Explicit(counts) => Some(counts.keys().next_back().copied().unwrap_or(0)),
        }
    }
}

/// Progressions assigned at one level.
///
/// Every progression here has difference `2^level`; `first_terms` are sorted and
/// the progression at index `i` carries source bit `first_source + i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelAssignment {
    pub level: u32,
    pub count: u64,
    pub first_source: u64,
    pub first_terms: Vec<u64>,
    /// False for levels above `max_level`, which only keep progressions starting below the horizon.
    pub complete: bool,
}

impl LevelAssignment {
    pub fn difference(&self) -> u64 {
        1u64 << self.level
    }

    /// `B_m`: source bits placed at this level or below.
    pub fn prefix_end(&self) -> u64 {
        self.first_source + self.count
    }
}

/// The position-to-source-bit map built from arithmetic progressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    m0: u32,
    max_level: u32,
    horizon: u64,
    rule: CountRule,
    levels: Vec<LevelAssignment>,
    least_uncovered: Vec<Option<u64>>,
}

impl Allocation {
    /// Plans levels `m0..` from a weight series whose budget certificate must hold at `m0`.
    ///
    /// Levels up to `max_level` are kept in full. Later levels only track
    /// progressions starting below `horizon` and stop once every position
    /// below the horizon is covered.
    pub fn plan(weights: &WeightSeries, m0: u32, max_level: u32, horizon: u64) -> Result<Self, SpreadError> {
        let certificate = m0_certificate(weights, m0);
        if certificate > Ratio::one() {
            return Err(SpreadError::CertificateFails {
                m0,
                certificate: certificate.to_string(),
            });
        }
        Self::build(CountRule::Weights(weights.clone()), m0, max_level, horizon)
    }

    /// Test-mode allocation with explicit per-level counts, bypassing the budget certificate.
    pub fn from_explicit_counts(counts: BTreeMap<u32, u64>, m0: u32, max_level: u32, horizon: u64) -> Result<Self, SpreadError> {
        Self::build(CountRule::Explicit(counts), m0, max_level, horizon)
    }

    fn build(rule: CountRule, m0: u32, max_level: u32, horizon: u64) -> Result<Self, SpreadError> {
        if m0 > max_level {
            return Err(SpreadError::InvalidLevels { m0, max_level });
        }
        if max_level > FULL_TRACK_LIMIT {
            return Err(SpreadError::MaxLevelTooLarge {
                max_level,
                limit: FULL_TRACK_LIMIT,
            });
        }

        let mut tracked: Vec<u64> = (0..1u64 << m0).collect();
        let mut available: u128 = 1u128 << m0;
        let mut next_source: u64 = 0;
        let mut levels = Vec::new();
        let mut least_uncovered = Vec::new();
        let mut m = m0;
        loop {
            let count = rule.count(m)?;
            if u128::from(count) > available {
                return Err(SpreadError::InsufficientProgressions {
                    level: m,
                    available: available.to_string(),
                    needed: count.to_string(),
                });
            }
            let take = (count as usize).min(tracked.len());
            let first_terms: Vec<u64> = tracked.drain(..take).collect();
            levels.push(LevelAssignment {
                level: m,
                count,
                first_source: next_source,
                first_terms,
                complete: m <= max_level,
            });
            next_source += count;
            available = (available - u128::from(count)) * 2;

            if m >= max_level {
                tracked.retain(|&a| a < horizon);
            }
            least_uncovered.push(tracked.first().copied());

            let finished = m >= max_level
                && (tracked.is_empty() || rule.last_explicit_level().is_some_and(|last| m >= last));
            if finished || m >= LEVEL_CAP {
                break;
            }

            // Halving keeps first terms below the new difference, and the odd
            // halves all start above the even ones, so the list stays sorted.
            let d = 1u64 << m;
            let upper: Vec<u64> = tracked.iter().map(|&a| a + d).collect();
            tracked.extend(upper);
            m += 1;
            if m > max_level {
                tracked.retain(|&a| a < horizon);
            }
        }

        Ok(Self {
            m0,
            max_level,
            horizon,
            rule,
            levels,
            least_uncovered,
        })
    }

    pub fn m0(&self) -> u32 {
        self.m0
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn rule(&self) -> &CountRule {
        &self.rule
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.rule, CountRule::Explicit(_))
    }

    pub fn levels(&self) -> &[LevelAssignment] {
        &self.levels
    }

    pub fn level(&self, m: u32) -> Option<&LevelAssignment> {
        m.checked_sub(self.m0).and_then(|i| self.levels.get(i as usize))
    }

    /// Highest level processed (may exceed `max_level` while covering the horizon).
    pub fn top_level(&self) -> u32 {
        self.levels.last().map_or(self.m0, |l| l.level)
    }

    /// `B_m`, the length of the source prefix every `2^m` window carries.
    pub fn prefix_len(&self, m: u32) -> Option<u64> {
        self.level(m).map(LevelAssignment::prefix_end)
    }

    /// Least position still uncovered (below the horizon beyond `max_level`) after each level.
    pub fn least_uncovered(&self) -> &[Option<u64>] {
        &self.least_uncovered
    }

    /// `sum_m count_m / 2^m` over all processed levels.
    pub fn budget(&self) -> Ratio {
        self.levels
            .iter()
            .map(|l| Ratio::integer(l.count) * Ratio::pow2_neg(u64::from(l.level)))
            .sum()
    }

    /// The source bit repeated at position `i`.
    pub fn source_index(&self, i: u64) -> Result<u64, SpreadError> {
        if i >= self.horizon {
            return Err(SpreadError::OutsideHorizon {
                position: i,
                horizon: self.horizon,
            });
        }
        for lvl in &self.levels {
            let residue = i & (lvl.difference() - 1);
            if let Ok(idx) = lvl.first_terms.binary_search(&residue) {
                return Ok(lvl.first_source + idx as u64);
            }
        }
        Err(SpreadError::Uncovered {
            position: i,
            processed_through: self.top_level(),
        })
    }

    /// Source indices of positions `0..len`, filled progression by progression.
    pub fn index_table(&self, len: u64) -> Result<Vec<u64>, SpreadError> {
        if len > self.horizon {
            return Err(SpreadError::OutsideHorizon {
                position: len - 1,
                horizon: self.horizon,
            });
        }
        let mut table = vec![u64::MAX; len as usize];
        for lvl in &self.levels {
            let d = lvl.difference();
            for (idx, &a) in lvl.first_terms.iter().enumerate() {
                let j = lvl.first_source + idx as u64;
                let mut pos = a;
                while pos < len {
                    table[pos as usize] = j;
                    pos = match pos.checked_add(d) {
                        Some(p) => p,
                        None => break,
                    };
                }
            }
        }
        if let Some(pos) = table.iter().position(|&j| j == u64::MAX) {
            return Err(SpreadError::Uncovered {
                position: pos as u64,
                processed_through: self.top_level(),
            });
        }
        Ok(table)
    }

    /// Checks that `[k, k + 2^m)` holds every source index below `B_m`, and each
    /// level-`m` index exactly once. `table` comes from [`Allocation::index_table`].
    pub fn check_window(&self, table: &[u64], k: u64, m: u32) -> Result<(), SpreadError> {
        let lvl = self.level(m).ok_or(SpreadError::LevelNotMaterialized { level: m })?;
        let width = 1u64 << m;
        let end = k + width;
        if end > table.len() as u64 {
            return Err(SpreadError::OutsideHorizon {
                position: end - 1,
                horizon: table.len() as u64,
            });
        }
        let prefix = lvl.prefix_end() as usize;
        let mut seen = vec![0u32; prefix];
        for &j in &table[k as usize..end as usize] {
            if let Some(slot) = seen.get_mut(j as usize) {
                *slot += 1;
            }
        }
        for (j, &c) in seen.iter().enumerate() {
            let at_level = j as u64 >= lvl.first_source;
            if c == 0 || (at_level && c != 1) {
                return Err(SpreadError::CoverageViolation {
                    k,
                    m,
                    bit: j as u64,
                    occurrences: c,
                });
            }
        }
        Ok(())
    }

    pub fn to_export(&self) -> AllocationExport {
        let (weights, explicit_counts) = match &self.rule {
            CountRule::Weights(w) => (Some(w.to_string()), None),
            CountRule::Explicit(c) => (None, Some(c.clone())),
        };
        AllocationExport {
            m0: self.m0,
            max_level: self.max_level,
            horizon: self.horizon,
            weights,
            explicit_counts,
            levels: self
                .levels
                .iter()
                .map(|l| LevelExport {
                    level: l.level,
                    count: l.count,
                    first_source: l.first_source,
                    complete: l.complete,
                    first_terms: l.first_terms.clone(),
                })
                .collect(),
        }
    }

    /// Rebuilds an allocation from its export, re-verifying every structural invariant.
    pub fn from_export(doc: &AllocationExport) -> Result<Self, SpreadError> {
        let bad = |msg: String| SpreadError::InvalidExport(msg);
        let rule = match (&doc.weights, &doc.explicit_counts) {
            (Some(w), None) => CountRule::Weights(w.parse().map_err(|e: super::UnknownPreset| bad(e.to_string()))?),
            (None, Some(c)) => CountRule::Explicit(c.clone()),
            _ => return Err(bad("exactly one of weights and explicit_counts must be given".into())),
        };
        if doc.m0 > doc.max_level || doc.max_level > FULL_TRACK_LIMIT {
            return Err(bad(format!("bad level range m0={} max_level={}", doc.m0, doc.max_level)));
        }
        if let CountRule::Weights(w) = &rule {
            let cert = m0_certificate(w, doc.m0);
            if cert > Ratio::one() {
                return Err(SpreadError::CertificateFails {
                    m0: doc.m0,
                    certificate: cert.to_string(),
                });
            }
        }

        let mut levels: Vec<LevelAssignment> = Vec::with_capacity(doc.levels.len());
        let mut next_source = 0u64;
        for (i, l) in doc.levels.iter().enumerate() {
            let m = doc.m0 + i as u32;
            if l.level != m || m > LEVEL_CAP {
                return Err(bad(format!("level {} out of sequence (expected {m})", l.level)));
            }
            if l.count != rule.count(m)? {
                return Err(bad(format!("level {m} count {} disagrees with the count rule", l.count)));
            }
            if l.first_source != next_source {
                return Err(bad(format!("level {m} first_source {} should be {next_source}", l.first_source)));
            }
            let complete = m <= doc.max_level;
            if l.complete != complete {
                return Err(bad(format!("level {m} completeness flag is wrong")));
            }
            let n = l.first_terms.len() as u64;
            if (complete && n != l.count) || n > l.count {
                return Err(bad(format!("level {m} lists {n} progressions for count {}", l.count)));
            }
            let d = 1u64 << m;
            if !l.first_terms.windows(2).all(|p| p[0] < p[1]) || l.first_terms.last().is_some_and(|&a| a >= d) {
                return Err(bad(format!("level {m} first terms must be ascending and below {d}")));
            }
            for &a in &l.first_terms {
                for lower in &levels {
                    if lower.first_terms.binary_search(&(a & (lower.difference() - 1))).is_ok() {
                        return Err(bad(format!(
                            "progression {a} mod {d} overlaps level {} progression",
                            lower.level
                        )));
                    }
                }
            }
            next_source += l.count;
            levels.push(LevelAssignment {
                level: m,
                count: l.count,
                first_source: l.first_source,
                first_terms: l.first_terms.clone(),
                complete,
            });
        }
        if levels.last().is_none_or(|l| l.level < doc.max_level) {
            return Err(bad("levels must reach max_level".into()));
        }
        Ok(Self {
            m0: doc.m0,
            max_level: doc.max_level,
            horizon: doc.horizon,
            rule,
            levels,
            least_uncovered: Vec::new(),
        })
    }
}

/// JSON export of an allocation; enough for an independent checker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationExport {
    pub m0: u32,
    pub max_level: u32,
    pub horizon: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_counts: Option<BTreeMap<u32, u64>>,
    pub levels: Vec<LevelExport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelExport {
    pub level: u32,
    pub count: u64,
    pub first_source: u64,
    pub complete: bool,
    pub first_terms: Vec<u64>,
}

/// Where the source bits come from.
#[derive(Debug, Clone, Copy)]
pub enum Tau<'a> {
    Bits(&'a BitString),
    /// Draws exactly as many bits as needed from substream 0.
    Random(RandomSource),
}

/// `omega_i = tau_{f(i)}` for `i < len`. Returns the output and the source bits used.
pub fn spread(alloc: &Allocation, tau: Tau<'_>, len: u64) -> Result<(BitString, BitString), SpreadError> {
    let table = alloc.index_table(len)?;
    let needed = table.iter().max().map_or(0, |&j| j + 1);
    let source = match tau {
        Tau::Bits(bits) => {
            if (bits.len() as u64) < needed {
                return Err(SpreadError::TauTooShort {
                    needed,
                    have: bits.len() as u64,
                });
            }
            bits.clone()
        }
        Tau::Random(rs) => rs.stream(0).bits(needed as usize),
    };
    let omega = table.iter().map(|&j| source.get(j as usize).expect("length checked")).collect();
    Ok((omega, source))
}

/// Reads `tau([0, B_m))` back out of a window of length `2^m` cut at a position `≡ kmod (mod 2^m)`.
///
/// Every copy of a source bit inside the window must agree.
pub fn recover_prefix(alloc: &Allocation, w: &BitString, kmod: u64, m: u32) -> Result<BitString, SpreadError> {
    if m < alloc.m0() {
        return Err(SpreadError::LevelNotMaterialized { level: m });
    }
    let top = alloc.level(m).filter(|l| l.complete).ok_or(SpreadError::LevelNotMaterialized { level: m })?;
    let width = 1u64 << m;
    if w.len() as u64 != width {
        return Err(SpreadError::WindowLength {
            expected: width,
            got: w.len() as u64,
        });
    }
    let kmod = kmod % width;
    let mut out = BitString::zeros(top.prefix_end() as usize);
    for lvl in &alloc.levels()[..=(m - alloc.m0()) as usize] {
        let d = lvl.difference();
        for (idx, &a) in lvl.first_terms.iter().enumerate() {
            let source = lvl.first_source + idx as u64;
            let first = (a + width - kmod) % d;
            let value = w.get(first as usize).expect("offset inside window");
            let mut pos = first + d;
            while pos < width {
                if w.get(pos as usize) != Some(value) {
                    return Err(SpreadError::Inconsistent {
                        bit: source,
                        offsets: (first, pos),
                    });
                }
                pos += d;
            }
            out.set(source as usize, value);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Allocation {
        Allocation::from_explicit_counts(BTreeMap::from([(1, 1), (2, 2)]), 1, 2, 1 << 16).unwrap()
    }

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn toy_allocation_by_hand() {
        let a = toy();
        assert_eq!(a.levels()[0].first_terms, vec![0]);
        assert_eq!(a.levels()[1].first_terms, vec![1, 3]);
        assert_eq!(a.levels()[1].first_source, 1);
        assert_eq!(a.prefix_len(2), Some(3));
        assert_eq!(a.source_index(0).unwrap(), 0);
        assert_eq!(a.source_index(3).unwrap(), 2);
        assert_eq!(a.source_index(5).unwrap(), 1);
        assert_eq!(a.budget(), Ratio::one());
    }

    #[test]
    fn full_occupation_is_parity() {
        let a = Allocation::from_explicit_counts(BTreeMap::from([(1, 2)]), 1, 1, 100).unwrap();
        assert_eq!(a.source_index(4).unwrap(), 0);
        for i in 0..100 {
            assert_eq!(a.source_index(i).unwrap(), i % 2);
        }
        let (omega, _) = spread(&a, Tau::Bits(&bs("10")), 6).unwrap();
        assert_eq!(omega, bs("101010"));
    }

    #[test]
    fn toy_spread_and_recover() {
        let a = toy();
        let tau = bs("101");
        let (omega, _) = spread(&a, Tau::Bits(&tau), 8).unwrap();
        assert_eq!(omega, bs("10111011"));
        let w = omega.window(1, 4).unwrap();
        assert_eq!(w, bs("0111"));
        assert_eq!(recover_prefix(&a, &w, 1, 2).unwrap(), bs("101"));
        assert!(matches!(
            spread(&a, Tau::Bits(&bs("10")), 8),
            Err(SpreadError::TauTooShort { needed: 3, have: 2 })
        ));
    }

    #[test]
    fn tampered_window_is_rejected() {
        let a = toy();
        // window [0, 4) of 10111011 is 1011; tau_0 sits at offsets 0 and 2.
        let mut w = bs("1011");
        w.flip(2);
        assert!(matches!(recover_prefix(&a, &w, 0, 2), Err(SpreadError::Inconsistent { bit: 0, .. })));
    }

    #[test]
    fn constant_tau_gives_constant_output() {
        let w = WeightSeries::InverseTriangular;
        let a = Allocation::plan(&w, 8, 10, 4096).unwrap();
        let zeros = BitString::zeros(100_000);
        let (omega, _) = spread(&a, Tau::Bits(&zeros), 4096).unwrap();
        assert_eq!(omega.count_ones(), 0);
    }

    #[test]
    fn plan_refuses_bad_m0() {
        let w = WeightSeries::InverseTriangular;
        assert!(matches!(Allocation::plan(&w, 7, 10, 1024), Err(SpreadError::CertificateFails { m0: 7, .. })));
        assert!(matches!(Allocation::plan(&w, 9, 8, 1024), Err(SpreadError::InvalidLevels { .. })));
    }

    #[test]
    fn first_terms_below_difference() {
        let a = Allocation::plan(&WeightSeries::Zero, 8, 12, 1 << 16).unwrap();
        for l in a.levels() {
            assert!(l.first_terms.iter().all(|&t| t < l.difference()));
        }
    }

    #[test]
    fn uncovered_positions_report_the_level_reached() {
        let a = Allocation::from_explicit_counts(BTreeMap::from([(1, 1)]), 1, 2, 64).unwrap();
        assert!(matches!(a.source_index(1), Err(SpreadError::Uncovered { position: 1, processed_through: 2 })));
        assert!(matches!(a.source_index(64), Err(SpreadError::OutsideHorizon { .. })));
    }

    #[test]
    fn export_round_trip_and_tamper_detection() {
        let a = Allocation::plan(&WeightSeries::InverseTriangular, 8, 10, 1 << 14).unwrap();
        let doc = a.to_export();
        let text = serde_json::to_string(&doc).unwrap();
        let back = Allocation::from_export(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.levels(), a.levels());

        let mut overlapping = doc.clone();
        let lower = overlapping.levels[0].first_terms[0];
        overlapping.levels[1].first_terms[0] = lower + 256;
        overlapping.levels[1].first_terms.sort();
        assert!(Allocation::from_export(&overlapping).is_err());

        let mut miscounted = doc.clone();
        miscounted.levels[0].count += 1;
        assert!(Allocation::from_export(&miscounted).is_err());

        let mut big_first = doc;
        big_first.levels[0].first_terms.push(300);
        assert!(Allocation::from_export(&big_first).is_err());
    }
}
