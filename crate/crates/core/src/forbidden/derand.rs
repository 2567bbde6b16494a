use std::collections::BTreeMap;

use super::family::{FamilyModel, LevelFamily, LevelSet};
use super::ForbiddenError;
use crate::dist::{DistError, FiniteDistribution};
use crate::ratio::{ExactProb, Ratio};
use crate::rng::RandomSource;

/// Seeds tried before giving up on a derandomization.
const SEED_LIMIT: u64 = 1 << 16;

/// `sum_{x not hit} P(x) + deficit`; missing mass counts as avoiding.
pub fn avoid_probability(p: &FiniteDistribution, family: &LevelFamily) -> ExactProb {
    let missed: Ratio = p
        .iter()
        .filter(|(x, _)| !family.hits(x))
        .map(|(_, m)| m.as_ratio().clone())
        .sum();
    ExactProb::from_ratio(missed + p.deficit().as_ratio().clone()).expect("at most the total mass")
}

/// `sum_x P(x) miss(x) + deficit`: the avoid probability averaged over the model's draws.
pub fn averaged_avoid_probability(p: &FiniteDistribution, model: &FamilyModel) -> Result<ExactProb, ForbiddenError> {
    // Group masses by miss value so the big sum runs over few denominators.
    let mut by_miss: BTreeMap<ExactProb, Ratio> = BTreeMap::new();
    for (x, mass) in p.iter() {
        let miss = model.miss_probability(x)?;
        if miss.is_zero() {
            continue;
        }
        let slot = by_miss.entry(miss).or_insert_with(Ratio::zero);
        *slot = &*slot + mass.as_ratio();
    }
    let total: Ratio = by_miss.into_iter().map(|(miss, mass)| mass * miss.into_ratio()).sum();
    Ok(ExactProb::from_ratio(total + p.deficit().as_ratio().clone())?)
}

/// A concrete family drawn from a model whose avoid probability is below `epsilon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derandomized {
    pub family: LevelFamily,
    pub seed: u64,
    pub avoid_probability: ExactProb,
    pub averaged: ExactProb,
    pub epsilon: ExactProb,
}

/// Tries seeds `0, 1, 2, ...` and returns the first realization of `model` that
/// `P` avoids with probability below `epsilon`.
///
/// The averaged bound is checked first; when it holds some seed must succeed.
pub fn derandomize_family(
    p: &FiniteDistribution,
    model: &FamilyModel,
    epsilon: &ExactProb,
) -> Result<Derandomized, ForbiddenError> {
    if p.length() != model.string_length() {
        return Err(ForbiddenError::LengthMismatch {
            expected: model.string_length(),
            got: p.length(),
        });
    }
    let averaged = averaged_avoid_probability(p, model)?;
    if averaged >= *epsilon {
        return Err(ForbiddenError::AveragedBoundFails {
            averaged: averaged.to_string(),
            epsilon: epsilon.to_string(),
        });
    }
    for seed in 0..SEED_LIMIT {
        let family = model.realize(&RandomSource::new(seed))?;
        let avoid = avoid_probability(p, &family);
        if avoid < *epsilon {
            return Ok(Derandomized {
                family,
                seed,
                avoid_probability: avoid,
                averaged,
                epsilon: epsilon.clone(),
            });
        }
    }
    Err(ForbiddenError::SearchExhausted { tried: SEED_LIMIT })
}

/// One interval `[start, end]` of lengths with its derandomized family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledInterval {
    pub index: u32,
    pub start: usize,
    pub end: usize,
    pub epsilon: ExactProb,
    pub result: Derandomized,
}

/// Builds `count` disjoint, increasing length intervals with targets `2^-i`.
///
/// Interval `i` starts right after interval `i-1` and ends at the first length
/// `N <= max_length` for which uniform random levels at every length in
/// `[start, N]` satisfy the averaged bound against `dist_for(N)`.
pub fn interval_schedule(
    alpha: &Ratio,
    count: u32,
    first_length: usize,
    max_length: usize,
    mut dist_for: impl FnMut(usize) -> Result<FiniteDistribution, DistError>,
) -> Result<Vec<ScheduledInterval>, ForbiddenError> {
    if count == 0 || first_length == 0 {
        return Err(ForbiddenError::InvalidParams("need at least one interval of positive lengths".into()));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut start = first_length;
    for index in 1..=count {
        let epsilon = ExactProb::pow2_neg(u64::from(index));
        let mut last_averaged = None;
        let mut found = None;
        for end in start..=max_length {
            let model = FamilyModel::uniform_levels(alpha.clone(), start..=end, end)?;
            let p = dist_for(end)?;
            match derandomize_family(&p, &model, &epsilon) {
                Ok(result) => {
                    found = Some((end, result));
                    break;
                }
                Err(ForbiddenError::AveragedBoundFails { averaged, .. }) => last_averaged = Some(averaged),
                Err(e) => return Err(e),
            }
        }
        let Some((end, result)) = found else {
            return Err(ForbiddenError::AveragedBoundFails {
                averaged: last_averaged.unwrap_or_else(|| "n/a".into()),
                epsilon: epsilon.to_string(),
            });
        };
        out.push(ScheduledInterval {
            index,
            start,
            end,
            epsilon,
            result,
        });
        start = end + 1;
    }
    Ok(out)
}

/// Union of the schedule's families; lengths never repeat across intervals.
pub fn schedule_union(schedule: &[ScheduledInterval], alpha: &Ratio) -> Result<LevelFamily, ForbiddenError> {
    let mut levels: BTreeMap<usize, LevelSet> = BTreeMap::new();
    for interval in schedule {
        for (&n, set) in interval.result.family.levels() {
            if levels.insert(n, set.clone()).is_some() {
                return Err(ForbiddenError::InvalidParams(format!("length {n} appears in two intervals")));
            }
        }
    }
    LevelFamily::new(alpha.clone(), levels)
}
