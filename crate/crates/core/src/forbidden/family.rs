use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::sampling::{miss_probability_pool, sample_pool_set, sample_uniform_set, with_replacement_miss};
use super::simple::{count_simple, distinct_substrings, ChainDoc, SimpleChain};
use super::{ForbiddenError, MAX_SAMPLE};
use crate::bits::BitString;
use crate::combin::{binom_big, floor_pow2, pow2, SurjectionTable};
use crate::ratio::{ExactProb, Ratio};
use crate::rng::RandomSource;

/// Largest block count tried when searching for the top length.
const MAX_BLOCKS: u64 = 1 << 20;
/// Largest random-level length tried when searching for it.
const MAX_LOW_LENGTH: usize = 64;

/// One level of a concrete family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LevelSet {
    Explicit(BTreeSet<BitString>),
    /// All depth-`depth` strings of `chain`, tested by membership and counted exactly.
    Simple { chain: SimpleChain, depth: usize },
}

impl LevelSet {
    pub fn cardinality(&self) -> BigUint {
        match self {
            LevelSet::Explicit(set) => BigUint::from(set.len()),
            LevelSet::Simple { chain, depth } => chain.pool(*depth).clone(),
        }
    }

    pub fn contains(&self, x: &BitString) -> bool {
        match self {
            LevelSet::Explicit(set) => set.contains(x),
            LevelSet::Simple { chain, depth } => chain.is_member(x, *depth),
        }
    }

    pub fn as_explicit(&self) -> Option<&BTreeSet<BitString>> {
        match self {
            LevelSet::Explicit(set) => Some(set),
            LevelSet::Simple { .. } => None,
        }
    }
}

/// Per-length forbidden sets `A_i` with `|A_i| <= floor(2^(alpha i))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelFamily {
    alpha: Ratio,
    levels: BTreeMap<usize, LevelSet>,
}

impl LevelFamily {
    pub fn new(alpha: Ratio, levels: BTreeMap<usize, LevelSet>) -> Result<Self, ForbiddenError> {
        let family = Self { alpha, levels };
        family.verify()?;
        Ok(family)
    }

    pub fn empty(alpha: Ratio) -> Self {
        Self {
            alpha,
            levels: BTreeMap::new(),
        }
    }

    /// Explicit levels only.
    pub fn explicit(alpha: Ratio, levels: BTreeMap<usize, BTreeSet<BitString>>) -> Result<Self, ForbiddenError> {
        Self::new(alpha, levels.into_iter().map(|(n, set)| (n, LevelSet::Explicit(set))).collect())
    }

    pub fn alpha(&self) -> &Ratio {
        &self.alpha
    }

    pub fn levels(&self) -> &BTreeMap<usize, LevelSet> {
        &self.levels
    }

    pub fn level(&self, n: usize) -> Option<&LevelSet> {
        self.levels.get(&n)
    }

    pub fn size_bound(&self, n: usize) -> BigUint {
        floor_pow2(&self.alpha, n as u64)
    }

    /// Checks string lengths, level shapes and every size bound.
    pub fn verify(&self) -> Result<(), ForbiddenError> {
        let zero = Ratio::zero();
        if self.alpha <= zero || self.alpha > Ratio::one() {
            return Err(ForbiddenError::InvalidParams(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        for (&n, level) in &self.levels {
            match level {
                LevelSet::Explicit(set) => {
                    if let Some(bad) = set.iter().find(|x| x.len() != n) {
                        return Err(ForbiddenError::LengthMismatch {
                            expected: n,
                            got: bad.len(),
                        });
                    }
                }
                LevelSet::Simple { chain, depth } => {
                    if *depth > chain.depth() || chain.length(*depth) != n {
                        return Err(ForbiddenError::InvalidParams(format!(
                            "level {n} names depth {depth} of a chain with lengths {:?}",
                            chain.lengths()
                        )));
                    }
                }
            }
            let cardinality = level.cardinality();
            let bound = self.size_bound(n);
            if cardinality > bound {
                return Err(ForbiddenError::SizeBound {
                    length: n,
                    cardinality: cardinality.to_string(),
                    bound: bound.to_string(),
                });
            }
        }
        Ok(())
    }

    /// First `(k, n)` in `(k, n)` order with `x([k, k+n)) in A_n`.
    pub fn first_hit(&self, x: &BitString) -> Option<(usize, usize)> {
        (0..x.len()).find_map(|k| {
            self.levels
                .range(..=x.len() - k)
                .find(|(&n, level)| level.contains(&x.window(k, n).expect("in range")))
                .map(|(&n, _)| (k, n))
        })
    }

    pub fn hits(&self, x: &BitString) -> bool {
        self.levels.iter().any(|(&n, level)| {
            n <= x.len() && (0..=x.len() - n).any(|k| level.contains(&x.window(k, n).expect("in range")))
        })
    }

    pub fn to_doc(&self) -> FamilyDoc {
        FamilyDoc {
            alpha: self.alpha.to_string(),
            levels: self
                .levels
                .iter()
                .map(|(&n, level)| LevelDoc {
                    length: n,
                    cardinality: level.cardinality().to_string(),
                    size_bound: self.size_bound(n).to_string(),
                    body: match level {
                        LevelSet::Explicit(set) => LevelBody::Explicit {
                            strings: set.iter().map(BitString::to_hex).collect(),
                        },
                        LevelSet::Simple { chain, depth } => LevelBody::Simple {
                            chain: chain.to_doc(),
                            depth: *depth,
                        },
                    },
                })
                .collect(),
        }
    }

    /// Parses a document and re-verifies every stated cardinality and bound.
    pub fn from_doc(doc: &FamilyDoc) -> Result<Self, ForbiddenError> {
        let alpha: Ratio = doc
            .alpha
            .parse()
            .map_err(|_| ForbiddenError::InvalidParams(format!("bad alpha {:?}", doc.alpha)))?;
        let mut levels = BTreeMap::new();
        for level in &doc.levels {
            let set = match &level.body {
                LevelBody::Explicit { strings } => {
                    let mut set = BTreeSet::new();
                    for s in strings {
                        let x = BitString::from_hex(s, level.length)
                            .map_err(|e| ForbiddenError::InvalidParams(format!("level {}: {e}", level.length)))?;
                        if !set.insert(x) {
                            return Err(ForbiddenError::InvalidParams(format!("level {}: duplicate {s}", level.length)));
                        }
                    }
                    LevelSet::Explicit(set)
                }
                LevelBody::Simple { chain, depth } => LevelSet::Simple {
                    chain: SimpleChain::from_doc(chain)?,
                    depth: *depth,
                },
            };
            if set.cardinality().to_string() != level.cardinality {
                return Err(ForbiddenError::Certificate(format!(
                    "level {} states cardinality {} but holds {}",
                    level.length,
                    level.cardinality,
                    set.cardinality()
                )));
            }
            if levels.insert(level.length, set).is_some() {
                return Err(ForbiddenError::InvalidParams(format!("level {} listed twice", level.length)));
            }
        }
        let family = Self::new(alpha, levels)?;
        for level in &doc.levels {
            if family.size_bound(level.length).to_string() != level.size_bound {
                return Err(ForbiddenError::Certificate(format!(
                    "level {} states bound {}",
                    level.length, level.size_bound
                )));
            }
        }
        Ok(family)
    }
}

/// JSON form of a [`LevelFamily`]; explicit strings are hex of the packed bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyDoc {
    pub alpha: String,
    pub levels: Vec<LevelDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelDoc {
    pub length: usize,
    pub cardinality: String,
    pub size_bound: String,
    #[serde(flatten)]
    body: LevelBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LevelBody {
    Explicit { strings: Vec<String> },
    Simple { chain: ChainDoc, depth: usize },
}

/// Where a random level draws its strings from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pool {
    /// Every string of the level's length.
    Cube,
    /// The depth-`depth` strings of a chain.
    Chain { chain: SimpleChain, depth: usize },
}

impl Pool {
    pub fn size(&self, length: usize) -> BigUint {
        match self {
            Pool::Cube => pow2(length as u64),
            Pool::Chain { chain, depth } => chain.pool(*depth).clone(),
        }
    }

    pub fn contains(&self, x: &BitString) -> bool {
        match self {
            Pool::Cube => true,
            Pool::Chain { chain, depth } => chain.is_member(x, *depth),
        }
    }

    fn sample(&self, length: usize, size: u64, rs: &RandomSource) -> Result<BTreeSet<BitString>, ForbiddenError> {
        match self {
            Pool::Cube => sample_uniform_set(length, size, rs),
            Pool::Chain { chain, depth } => sample_pool_set(chain, *depth, size, rs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LevelSpec {
    /// A uniform `size`-subset of the pool, drawn afresh per realization.
    Random { pool: Pool, size: u64 },
    Fixed(LevelSet),
}

/// A random family: the distribution that [`FamilyModel::realize`] samples from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyModel {
    alpha: Ratio,
    string_length: usize,
    levels: BTreeMap<usize, LevelSpec>,
}

impl FamilyModel {
    /// A model for strings of length `string_length`; every level must fit inside it.
    pub fn new(alpha: Ratio, string_length: usize, levels: BTreeMap<usize, LevelSpec>) -> Result<Self, ForbiddenError> {
        for (&n, spec) in &levels {
            if n == 0 || n > string_length {
                return Err(ForbiddenError::InvalidParams(format!(
                    "level {n} does not fit strings of length {string_length}"
                )));
            }
            let bound = floor_pow2(&alpha, n as u64);
            let cardinality = match spec {
                LevelSpec::Random { pool, size } => {
                    let available = pool.size(n);
                    if BigUint::from(*size) > available {
                        return Err(ForbiddenError::PoolTooSmall {
                            requested: size.to_string(),
                            pool: available.to_string(),
                        });
                    }
                    BigUint::from(*size)
                }
                LevelSpec::Fixed(set) => set.cardinality(),
            };
            if cardinality > bound {
                return Err(ForbiddenError::SizeBound {
                    length: n,
                    cardinality: cardinality.to_string(),
                    bound: bound.to_string(),
                });
            }
        }
        Ok(Self {
            alpha,
            string_length,
            levels,
        })
    }

    /// Uniform random levels of full size `floor(2^(alpha n))` for each `n` in `lengths`.
    pub fn uniform_levels(
        alpha: Ratio,
        lengths: impl IntoIterator<Item = usize>,
        string_length: usize,
    ) -> Result<Self, ForbiddenError> {
        let mut levels = BTreeMap::new();
        for n in lengths {
            let size = sample_size(&alpha, n)?;
            levels.insert(n, LevelSpec::Random { pool: Pool::Cube, size });
        }
        Self::new(alpha, string_length, levels)
    }

    pub fn alpha(&self) -> &Ratio {
        &self.alpha
    }

    pub fn string_length(&self) -> usize {
        self.string_length
    }

    pub fn levels(&self) -> &BTreeMap<usize, LevelSpec> {
        &self.levels
    }

    /// Draws every random level from `rs`; level `n` uses substream `n`.
    pub fn realize(&self, rs: &RandomSource) -> Result<LevelFamily, ForbiddenError> {
        let mut levels = BTreeMap::new();
        for (&n, spec) in &self.levels {
            let set = match spec {
                LevelSpec::Random { pool, size } => LevelSet::Explicit(pool.sample(n, *size, rs)?),
                LevelSpec::Fixed(set) => set.clone(),
            };
            levels.insert(n, set);
        }
        LevelFamily::new(self.alpha.clone(), levels)
    }

    /// Exact probability over the random levels that no level hits `x`.
    pub fn miss_probability(&self, x: &BitString) -> Result<ExactProb, ForbiddenError> {
        if x.len() != self.string_length {
            return Err(ForbiddenError::LengthMismatch {
                expected: self.string_length,
                got: x.len(),
            });
        }
        let mut miss = ExactProb::one();
        for (&n, spec) in &self.levels {
            let factor = match spec {
                LevelSpec::Fixed(set) => {
                    let hit = (0..=x.len() - n).any(|k| set.contains(&x.window(k, n).expect("in range")));
                    if hit {
                        ExactProb::zero()
                    } else {
                        ExactProb::one()
                    }
                }
                LevelSpec::Random { pool: Pool::Cube, size } => {
                    let d = distinct_substrings(x, n)? as u64;
                    miss_probability_pool(d, &pow2(n as u64), &BigUint::from(*size))
                }
                LevelSpec::Random { pool, size } => {
                    let windows: BTreeSet<BitString> = (0..=x.len() - n)
                        .map(|k| x.window(k, n).expect("in range"))
                        .filter(|w| pool.contains(w))
                        .collect();
                    miss_probability_pool(windows.len() as u64, &pool.size(n), &BigUint::from(*size))
                }
            };
            if factor.is_zero() {
                return Ok(factor);
            }
            miss = &miss * &factor;
        }
        Ok(miss)
    }
}

fn sample_size(alpha: &Ratio, n: usize) -> Result<u64, ForbiddenError> {
    let size = floor_pow2(alpha, n as u64);
    match size.to_u64() {
        Some(s) if s <= MAX_SAMPLE => Ok(s),
        _ => Err(ForbiddenError::SampleTooLarge {
            length: n,
            size: size.to_string(),
        }),
    }
}

/// Exact probability over the model's random levels that some level hits `x`.
pub fn hit_probability(x: &BitString, model: &FamilyModel) -> Result<ExactProb, ForbiddenError> {
    Ok(model.miss_probability(x)?.complement())
}

/// Lengths `n_1 | n_2 | ... | n_{t+1}`, block thresholds and targets for a layered family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredParams {
    alpha: Ratio,
    epsilon: ExactProb,
    lengths: Vec<usize>,
    thresholds: Vec<BigUint>,
}

impl LayeredParams {
    pub fn new(
        alpha: Ratio,
        epsilon: ExactProb,
        lengths: Vec<usize>,
        thresholds: Vec<BigUint>,
    ) -> Result<Self, ForbiddenError> {
        if lengths.len() < 2 {
            return Err(ForbiddenError::InvalidParams("need at least two lengths".into()));
        }
        let layers = lengths.len() as u64;
        if alpha <= Ratio::new(1u32, layers).expect("nonzero") || alpha >= Ratio::one() {
            return Err(ForbiddenError::InvalidParams(format!(
                "alpha {alpha} must lie in (1/{layers}, 1) for {layers} lengths"
            )));
        }
        if epsilon.is_zero() {
            return Err(ForbiddenError::InvalidParams("epsilon must be positive".into()));
        }
        SimpleChain::new(lengths.clone(), thresholds.clone())?;
        Ok(Self {
            alpha,
            epsilon,
            lengths,
            thresholds,
        })
    }

    /// Thresholds `2^ceil((t+1-j) n_j / (t+1))` for `j = 1..t`.
    pub fn with_default_thresholds(alpha: Ratio, epsilon: ExactProb, lengths: Vec<usize>) -> Result<Self, ForbiddenError> {
        let layers = lengths.len() as u64;
        let thresholds = lengths
            .iter()
            .take(lengths.len().saturating_sub(1))
            .enumerate()
            .map(|(i, &n)| pow2(((layers - 1 - i as u64) * n as u64).div_ceil(layers)))
            .collect();
        Self::new(alpha, epsilon, lengths, thresholds)
    }

    pub fn alpha(&self) -> &Ratio {
        &self.alpha
    }

    pub fn epsilon(&self) -> &ExactProb {
        &self.epsilon
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn thresholds(&self) -> &[BigUint] {
        &self.thresholds
    }
}

/// Exact parameter certificate for one level of a layered family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCertificate {
    pub length: usize,
    /// `"random"` or `"simple"`.
    pub kind: String,
    #[serde(with = "decimal")]
    pub pool: BigUint,
    #[serde(with = "decimal")]
    pub cardinality: BigUint,
    #[serde(with = "decimal")]
    pub size_bound: BigUint,
    /// Distinct pool windows any string escaping the higher levels must show here.
    #[serde(default, with = "opt_decimal", skip_serializing_if = "Option::is_none")]
    pub threshold: Option<BigUint>,
    /// Exact miss probability of this level at exactly `threshold` distinct windows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub miss_bound: Option<ExactProb>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyCertificate {
    pub alpha: Ratio,
    pub epsilon: ExactProb,
    pub lengths: Vec<usize>,
    #[serde(with = "decimal_vec")]
    pub thresholds: Vec<BigUint>,
    pub levels: Vec<LevelCertificate>,
    /// Largest per-level miss bound: every string of the top length is hit with
    /// probability at least `1 - worst_case_miss`.
    pub worst_case_miss: ExactProb,
    /// `(1 - 2^-ceil(n/2))^s` for two-level families, used to choose `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<ExactProb>,
    pub meets_epsilon: bool,
}

impl FamilyCertificate {
    /// Recomputes every number from `alpha`, the lengths and the thresholds.
    pub fn verify(&self) -> Result<(), ForbiddenError> {
        let fail = |msg: String| Err(ForbiddenError::Certificate(msg));
        let t = self.thresholds.len();
        if self.lengths.len() != t + 1 || self.levels.len() != t + 1 {
            return fail("level count does not match the lengths".into());
        }
        let mut pool = pow2(self.lengths[0] as u64);
        let mut worst = ExactProb::zero();
        for (j, level) in self.levels.iter().enumerate() {
            let n = self.lengths[j];
            let bound = floor_pow2(&self.alpha, n as u64);
            if level.length != n || level.size_bound != bound {
                return fail(format!("level {j}: length or size bound differs"));
            }
            if level.cardinality > bound {
                return fail(format!("level {n}: cardinality {} above {bound}", level.cardinality));
            }
            if j > 0 {
                let blocks = (n / self.lengths[j - 1]) as u64;
                pool = recount_layer(&pool, blocks, &self.thresholds[j - 1]);
            }
            if level.pool != pool {
                return fail(format!("level {n}: pool {} but recount gives {pool}", level.pool));
            }
            if j < t {
                let threshold = &self.thresholds[j];
                let miss = miss_probability_pool(threshold.to_u64().unwrap_or(u64::MAX), &pool, &bound);
                if level.kind != "random" || level.cardinality != bound || level.threshold.as_ref() != Some(threshold) {
                    return fail(format!("level {n}: random level misdescribed"));
                }
                if level.miss_bound.as_ref() != Some(&miss) {
                    return fail(format!("level {n}: miss bound differs from recomputation {miss}"));
                }
                worst = worst.max(miss);
            } else if level.kind != "simple" || level.cardinality != pool {
                return fail(format!("top level {n}: cardinality differs from recount {pool}"));
            }
        }
        if t == 1 {
            let direct = count_simple(self.lengths[1] as u64, self.lengths[0] as u64, &self.thresholds[0])?;
            if direct != self.levels[1].cardinality {
                return fail(format!("simple count differs from direct sum {direct}"));
            }
        }
        if worst != self.worst_case_miss {
            return fail(format!("worst-case miss recomputes to {worst}"));
        }
        if let Some(estimate) = &self.estimate {
            let h = self.lengths[0].div_ceil(2) as u64;
            let s = self.levels[0].cardinality.to_u64().unwrap_or(u64::MAX);
            if *estimate != with_replacement_miss(h, s) || *estimate >= self.epsilon {
                return fail(format!("estimate {estimate} does not recompute below epsilon"));
            }
        }
        if self.meets_epsilon != (worst < self.epsilon) {
            return fail("epsilon flag disagrees with the worst-case miss".into());
        }
        Ok(())
    }
}

/// Direct sum over distinct-block counts, without the Stirling table.
fn recount_layer(pool: &BigUint, blocks: u64, t: &BigUint) -> BigUint {
    let max_j = t.to_u64().map_or(blocks, |t| t.min(blocks));
    (1..=max_j)
        .map(|j| binom_big(pool, j) * crate::combin::surjections(blocks, j))
        .sum()
}

/// A constructed family with the model it was drawn from and its certificate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltFamily {
    pub model: FamilyModel,
    pub family: LevelFamily,
    pub certificate: FamilyCertificate,
}

/// Two lengths `n | N`: a random set of `floor(2^(alpha n))` `n`-bit strings, and every
/// `N`-bit string with at most `2^ceil(n/2)` distinct aligned `n`-blocks.
///
/// `n >= n_min` is the least length with `alpha n > ceil(n/2)` whose estimate
/// `(1 - 2^-ceil(n/2))^s` is below `epsilon`; `N` is the least multiple of `n` whose simple-string count fits
/// under `floor(2^(alpha N))`.
pub fn two_level_family(
    alpha: &Ratio,
    epsilon: &ExactProb,
    n_min: usize,
    rs: &RandomSource,
) -> Result<BuiltFamily, ForbiddenError> {
    if *alpha <= Ratio::new(1u32, 2u32).expect("nonzero") || *alpha >= Ratio::one() {
        return Err(ForbiddenError::InvalidParams(format!("alpha {alpha} must lie in (1/2, 1)")));
    }
    if epsilon.is_zero() {
        return Err(ForbiddenError::InvalidParams("epsilon must be positive".into()));
    }
    // The top length exists only when a block costs fewer than alpha*n bits: alpha*n > ceil(n/2).
    let (n, estimate) = (n_min.max(1)..=MAX_LOW_LENGTH)
        .filter(|&n| alpha * &Ratio::integer(n as u64) > Ratio::integer(n.div_ceil(2) as u64))
        .map(|n| -> Result<_, ForbiddenError> {
            let estimate = with_replacement_miss(n.div_ceil(2) as u64, sample_size(alpha, n)?);
            Ok((n, estimate))
        })
        .find(|r| r.as_ref().map_or(true, |(_, e)| e < epsilon))
        .ok_or_else(|| ForbiddenError::SearchLimit(format!("no n up to {MAX_LOW_LENGTH} meets epsilon")))??;

    let threshold = pow2(n.div_ceil(2) as u64);
    let big_n = top_length(alpha, n, &threshold)?;
    let chain = SimpleChain::new(vec![n, big_n], vec![threshold])?;
    let mut built = build_layered(alpha, epsilon, chain, rs)?;
    built.certificate.estimate = Some(estimate);
    Ok(built)
}

/// Least `N = p n`, `p >= 2`, with at most `floor(2^(alpha N))` simple strings.
fn top_length(alpha: &Ratio, n: usize, threshold: &BigUint) -> Result<usize, ForbiddenError> {
    let cube = pow2(n as u64);
    let max_values = threshold.to_usize().filter(|&t| t <= 1 << 16).ok_or_else(|| {
        ForbiddenError::SearchLimit(format!("threshold {threshold} too large to tabulate"))
    })?;
    let choose: Vec<BigUint> = (0..=max_values as u64).map(|j| binom_big(&cube, j)).collect();
    let mut table = SurjectionTable::new(max_values);
    table.advance();
    for blocks in 2..=MAX_BLOCKS {
        table.advance();
        let top = max_values.min(blocks as usize);
        let count: BigUint = (1..=top).map(|j| &choose[j] * table.surjections(j)).sum();
        let big_n = blocks as usize * n;
        if count <= floor_pow2(alpha, big_n as u64) {
            return Ok(big_n);
        }
    }
    Err(ForbiddenError::SearchLimit(format!("no top length up to {MAX_BLOCKS} blocks of {n}")))
}

/// Random levels at every chain length but the last, drawn from the simple strings
/// one level down; the last level is the implicit simple set.
pub fn multi_level_family(params: &LayeredParams, rs: &RandomSource) -> Result<BuiltFamily, ForbiddenError> {
    let chain = SimpleChain::new(params.lengths.clone(), params.thresholds.clone())?;
    build_layered(&params.alpha, &params.epsilon, chain, rs)
}

fn build_layered(
    alpha: &Ratio,
    epsilon: &ExactProb,
    chain: SimpleChain,
    rs: &RandomSource,
) -> Result<BuiltFamily, ForbiddenError> {
    let t = chain.depth();
    let mut specs = BTreeMap::new();
    let mut certs = Vec::with_capacity(t + 1);
    let mut worst = ExactProb::zero();
    for j in 0..t {
        let n = chain.length(j);
        let pool = if j == 0 {
            Pool::Cube
        } else {
            Pool::Chain {
                chain: chain.clone(),
                depth: j,
            }
        };
        let size = sample_size(alpha, n)?;
        let available = pool.size(n);
        if BigUint::from(size) > available {
            return Err(ForbiddenError::PoolTooSmall {
                requested: size.to_string(),
                pool: available.to_string(),
            });
        }
        let threshold = chain.thresholds()[j].clone();
        let miss = miss_probability_pool(threshold.to_u64().unwrap_or(u64::MAX), &available, &BigUint::from(size));
        worst = worst.max(miss.clone());
        certs.push(LevelCertificate {
            length: n,
            kind: "random".into(),
            pool: available,
            cardinality: BigUint::from(size),
            size_bound: BigUint::from(size),
            threshold: Some(threshold),
            miss_bound: Some(miss),
        });
        specs.insert(n, LevelSpec::Random { pool, size });
    }
    let top = chain.length(t);
    let top_set = LevelSet::Simple {
        chain: chain.clone(),
        depth: t,
    };
    certs.push(LevelCertificate {
        length: top,
        kind: "simple".into(),
        pool: chain.pool(t).clone(),
        cardinality: top_set.cardinality(),
        size_bound: floor_pow2(alpha, top as u64),
        threshold: None,
        miss_bound: None,
    });
    specs.insert(top, LevelSpec::Fixed(top_set));

    let model = FamilyModel::new(alpha.clone(), top, specs)?;
    let family = model.realize(rs)?;
    let meets_epsilon = worst < *epsilon;
    let certificate = FamilyCertificate {
        alpha: alpha.clone(),
        epsilon: epsilon.clone(),
        lengths: chain.lengths().to_vec(),
        thresholds: chain.thresholds().to_vec(),
        levels: certs,
        worst_case_miss: worst,
        estimate: None,
        meets_epsilon,
    };
    Ok(BuiltFamily {
        model,
        family,
        certificate,
    })
}

mod decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

mod opt_decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BigUint>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.collect_str(v),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigUint>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .transpose()
    }
}

mod decimal_vec {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(ToString::to_string).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: u64, d: u64) -> Ratio {
        Ratio::new(n, d).unwrap()
    }

    fn p(n: u64, d: u64) -> ExactProb {
        ExactProb::new(n, d).unwrap()
    }

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    /// n = 2, a random pair of 2-bit strings, top level N = 4 with one distinct block.
    fn toy_model() -> FamilyModel {
        let chain = SimpleChain::new(vec![2, 4], vec![BigUint::from(1u32)]).unwrap();
        let levels = BTreeMap::from([
            (2, LevelSpec::Random { pool: Pool::Cube, size: 2 }),
            (4, LevelSpec::Fixed(LevelSet::Simple { chain, depth: 1 })),
        ]);
        FamilyModel::new(r(1, 2), 4, levels).unwrap()
    }

    #[test]
    fn toy_hit_probabilities() {
        let model = toy_model();
        // Simple strings are always hit.
        assert!(hit_probability(&bs("0000"), &model).unwrap().is_one());
        assert!(hit_probability(&bs("0101"), &model).unwrap().is_one());
        // "1001" shows three distinct windows: miss = C(1,2)/C(4,2) = 0.
        assert!(hit_probability(&bs("1001"), &model).unwrap().is_one());
        // "0001" is not simple and shows "00", "01": miss = C(2,2)/C(4,2) = 1/6.
        assert_eq!(hit_probability(&bs("0001"), &model).unwrap(), p(5, 6));
        assert!(hit_probability(&bs("00"), &model).is_err());
    }

    #[test]
    fn one_window_miss_matches_the_pair_example() {
        // A single random level of two 2-bit strings, string "00": d = 1.
        let model = FamilyModel::new(
            r(1, 2),
            2,
            BTreeMap::from([(2, LevelSpec::Random { pool: Pool::Cube, size: 2 })]),
        )
        .unwrap();
        assert_eq!(hit_probability(&bs("00"), &model).unwrap(), p(1, 2));
    }

    #[test]
    fn exact_hit_probability_matches_monte_carlo() {
        let model = toy_model();
        let x = bs("0001");
        let exact = hit_probability(&x, &model).unwrap().to_f64();
        let trials = 100_000u64;
        let hits = (0..trials)
            .filter(|&seed| model.realize(&RandomSource::new(seed)).unwrap().hits(&x))
            .count() as f64;
        let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!((hits / trials as f64 - exact).abs() < 3.0 * sigma, "{hits} vs {exact}");
    }

    #[test]
    fn three_level_toy_counts_and_typing() {
        let params = LayeredParams::new(
            r(1, 2),
            p(1, 2),
            vec![2, 4, 8],
            vec![BigUint::from(1u32), BigUint::from(2u32)],
        )
        .unwrap();
        let built = multi_level_family(&params, &RandomSource::new(3)).unwrap();
        let chain = SimpleChain::new(vec![2, 4, 8], vec![BigUint::from(1u32), BigUint::from(2u32)]).unwrap();
        let brute = (0..256u64).filter(|&v| chain.is_member(&BitString::from_u64(v, 8), 2)).count();
        assert_eq!(built.certificate.levels[2].cardinality, BigUint::from(brute));
        let level4 = built.family.level(4).unwrap().as_explicit().unwrap();
        assert_eq!(level4.len(), 4);
        assert!(level4.iter().all(|b| chain.is_member(b, 1)));
        built.certificate.verify().unwrap();
    }

    #[test]
    fn layered_params_guard_alpha() {
        assert!(LayeredParams::with_default_thresholds(r(1, 3), p(1, 2), vec![2, 4, 8]).is_err());
        let ok = LayeredParams::with_default_thresholds(r(2, 5), p(1, 2), vec![3, 6, 12]).unwrap();
        // 2^ceil(2*3/3), 2^ceil(6/3)
        assert_eq!(ok.thresholds(), &[BigUint::from(4u32), BigUint::from(4u32)]);
        assert!(LayeredParams::with_default_thresholds(r(3, 5), p(1, 2), vec![2, 5]).is_err());
    }

    #[test]
    fn two_level_certificate_verifies_and_bounds_hits() {
        let built = two_level_family(&r(3, 5), &p(1, 4), 1, &RandomSource::new(5)).unwrap();
        let cert = &built.certificate;
        cert.verify().unwrap();
        assert!(cert.meets_epsilon);
        let (n, big_n) = (cert.lengths[0], cert.lengths[1]);
        // Minimality of n and N by direct recomputation.
        for smaller in 1..n {
            let s = floor_pow2(&r(3, 5), smaller as u64).to_u64().unwrap();
            assert!(with_replacement_miss(smaller.div_ceil(2) as u64, s) >= p(1, 4));
        }
        let t = pow2(n.div_ceil(2) as u64);
        for p_blocks in 2..big_n / n {
            let len = (p_blocks * n) as u64;
            assert!(count_simple(len, n as u64, &t).unwrap() > floor_pow2(&r(3, 5), len));
        }
        // Every tested string is hit with probability above 1 - epsilon.
        let mut stream = RandomSource::new(8).stream(0);
        for _ in 0..200 {
            let x = stream.bits(big_n);
            assert!(hit_probability(&x, &built.model).unwrap() > p(3, 4));
        }
        let periodic: BitString = (0..big_n).map(|i| i % 3 == 0).collect();
        assert!(hit_probability(&periodic, &built.model).unwrap() > p(3, 4));
        assert!(built.family.verify().is_ok());
    }

    #[test]
    fn certificate_tamper_is_caught() {
        let built = two_level_family(&r(3, 5), &p(1, 2), 1, &RandomSource::new(1)).unwrap();
        let mut bad = built.certificate.clone();
        bad.levels[1].cardinality += 1u32;
        assert!(bad.verify().is_err());
        let mut bad = built.certificate.clone();
        bad.worst_case_miss = ExactProb::zero();
        assert!(bad.verify().is_err());
        let text = serde_json::to_string(&built.certificate).unwrap();
        let back: FamilyCertificate = serde_json::from_str(&text).unwrap();
        assert_eq!(back, built.certificate);
    }

    #[test]
    fn family_doc_round_trip_and_checks() {
        let built = two_level_family(&r(3, 5), &p(1, 2), 3, &RandomSource::new(4)).unwrap();
        let doc = built.family.to_doc();
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.contains("\"kind\":\"simple\""));
        let back = LevelFamily::from_doc(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, built.family);

        let mut tampered = doc.clone();
        tampered.levels[1].cardinality = "1".into();
        assert!(LevelFamily::from_doc(&tampered).is_err());
    }

    #[test]
    fn oversize_levels_are_rejected() {
        let set: BTreeSet<BitString> = ["00", "01", "10"].iter().map(|s| bs(s)).collect();
        // floor(2^(2/2)) = 2 < 3.
        let err = LevelFamily::explicit(r(1, 2), BTreeMap::from([(2, set)])).unwrap_err();
        assert!(matches!(err, ForbiddenError::SizeBound { .. }));
    }

    #[test]
    fn first_hit_is_leftmost_then_shortest() {
        let levels = BTreeMap::from([
            (2, BTreeSet::from([bs("11")])),
            (3, BTreeSet::from([bs("011"), bs("000")])),
        ]);
        let fam = LevelFamily::explicit(r(1, 1), levels).unwrap();
        assert_eq!(fam.first_hit(&bs("10110")), Some((1, 3)));
        assert_eq!(fam.first_hit(&bs("0110")), Some((0, 3)));
        assert_eq!(fam.first_hit(&bs("0101")), None);
        assert!(fam.hits(&bs("0011")));
    }
}
