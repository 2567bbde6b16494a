use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::OnceLock;

use ecseq::forbidden::{
    avoid_probability, count_simple, derandomize_family, is_simple, miss_probability_pool, multi_level_family,
    two_level_family, BuiltFamily, FamilyModel, LayeredParams, LevelSet, LevelSpec, Pool,
};
use ecseq::{BitString, ExactProb, FiniteDistribution, RandomSource, Ratio};
use num_bigint::{BigInt, BigUint};
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn r(n: u64, d: u64) -> Ratio {
    Ratio::new(n, d).unwrap()
}

fn p(n: u64, d: u64) -> ExactProb {
    ExactProb::new(n, d).unwrap()
}

fn rational(x: &ExactProb) -> BigRational {
    BigRational::new(BigInt::from(x.numer().clone()), BigInt::from(x.denom().clone()))
}

/// Largest `y` with `y^den <= 2^(num n)`, by bisection.
fn floor_pow2_oracle(num: u64, den: u64, n: u64) -> BigUint {
    let target = BigUint::one() << (num * n);
    let (mut lo, mut hi) = (BigUint::zero(), (BigUint::one() << (num * n / den + 1)) + 1u32);
    while &lo + 1u32 < hi {
        let mid = (&lo + &hi) >> 1u32;
        if mid.pow(den as u32) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn two_level_toy() -> &'static BuiltFamily {
    static CELL: OnceLock<BuiltFamily> = OnceLock::new();
    CELL.get_or_init(|| two_level_family(&r(3, 5), &p(1, 4), 1, &RandomSource::new(11)).unwrap())
}

#[test]
fn count_simple_matches_brute_force() {
    for n in [2usize, 4] {
        for big_n in (n..=16).step_by(n) {
            // Histogram of distinct aligned block counts over all strings.
            let mut hist = vec![0u64; big_n / n + 1];
            for v in 0..1u64 << big_n {
                let blocks: HashSet<u64> = (0..big_n / n).map(|b| (v >> (b * n)) & ((1 << n) - 1)).collect();
                hist[blocks.len()] += 1;
            }
            for t in 0..=1u64 << n {
                let brute: u64 = hist.iter().take(t as usize + 1).sum();
                let got = count_simple(big_n as u64, n as u64, &BigUint::from(t)).unwrap();
                assert_eq!(got, BigUint::from(brute), "N={big_n} n={n} t={t}");
            }
        }
    }
}

#[test]
fn miss_probability_matches_binomial_ratio_and_is_monotone() {
    for pool in [8u64, 16, 33, 64] {
        let pool_big = BigUint::from(pool);
        for s in 0..=pool {
            let mut previous: Option<ExactProb> = None;
            for d in 0..=pool {
                let got = miss_probability_pool(d, &pool_big, &BigUint::from(s));
                let oracle = BigRational::new(
                    BigInt::from(binomial(BigUint::from(pool - d), BigUint::from(s))),
                    BigInt::from(binomial(pool_big.clone(), BigUint::from(s))),
                );
                assert_eq!(rational(&got), oracle, "pool={pool} s={s} d={d}");
                if let Some(prev) = &previous {
                    assert!(got <= *prev);
                }
                if s > 0 {
                    assert!(got <= miss_probability_pool(d, &pool_big, &BigUint::from(s - 1)));
                }
                previous = Some(got);
            }
        }
    }
}

#[test]
fn every_built_level_fits_its_size_bound() {
    let mut built = vec![two_level_toy().clone()];
    for (a, b, e) in [(2u64, 3u64, 4u64), (7, 10, 4), (3, 5, 2)] {
        built.push(two_level_family(&r(a, b), &p(1, e), 1, &RandomSource::new(a + b)).unwrap());
    }
    let params = LayeredParams::new(
        r(1, 2),
        p(1, 2),
        vec![2, 4, 8],
        vec![BigUint::from(1u32), BigUint::from(2u32)],
    )
    .unwrap();
    built.push(multi_level_family(&params, &RandomSource::new(2)).unwrap());
    for fam in &built {
        fam.certificate.verify().unwrap();
        let alpha = fam.family.alpha();
        let (num, den) = (alpha.numer().try_into().unwrap(), alpha.denom().try_into().unwrap());
        for (&n, level) in fam.family.levels() {
            let bound = floor_pow2_oracle(num, den, n as u64);
            assert!(level.cardinality() <= bound, "level {n}: {} > {bound}", level.cardinality());
            if let LevelSet::Explicit(set) = level {
                assert!(set.iter().all(|s| s.len() == n));
            }
        }
    }
}

#[test]
fn derandomized_certificate_resums_independently() {
    let alpha = r(1, 2);
    let len = 8;
    let model = FamilyModel::new(
        alpha.clone(),
        len,
        BTreeMap::from([
            (4, LevelSpec::Random { pool: Pool::Cube, size: 4 }),
            (6, LevelSpec::Random { pool: Pool::Cube, size: 8 }),
        ]),
    )
    .unwrap();
    let mut stream = RandomSource::new(21).stream(0);
    let masses: BTreeMap<BitString, ExactProb> = (0..40).map(|_| (stream.bits(len), p(1, 64))).collect();
    let dist = FiniteDistribution::new(len, masses).unwrap();
    let eps = p(3, 4);
    let out = derandomize_family(&dist, &model, &eps).unwrap();
    assert!(out.avoid_probability < eps);

    // Plain substring search over the textual forms of the chosen sets.
    let forbidden: Vec<String> = out
        .family
        .levels()
        .values()
        .flat_map(|l| l.as_explicit().unwrap().iter().map(|s| s.to_string()))
        .collect();
    let mut sum = rational(dist.deficit());
    for (x, mass) in dist.iter() {
        let text = x.to_string();
        if !forbidden.iter().any(|f| text.contains(f.as_str())) {
            sum += rational(mass);
        }
    }
    assert_eq!(rational(&out.avoid_probability), sum);
    assert_eq!(avoid_probability(&dist, &out.family), out.avoid_probability);
}

fn structured(len: usize, stream: &mut ecseq::RandomStream, kind: u64) -> BitString {
    match kind {
        0 => {
            let period = 1 + stream.below(40) as usize;
            let base = stream.bits(period);
            (0..len).map(|i| base.get(i % period).unwrap()).collect()
        }
        1 => {
            // Aligned 4-blocks drawn from a few values.
            let values: Vec<BitString> = (0..1 + stream.below(12)).map(|_| stream.bits(4)).collect();
            let mut x = BitString::new();
            while x.len() < len {
                x.extend_from(&values[stream.below(values.len() as u64) as usize]);
            }
            x
        }
        _ => {
            // A random string with one long constant run.
            let mut x = stream.bits(len);
            let start = stream.below(len as u64 / 2) as usize;
            for i in start..start + len / 2 {
                x.set(i, false);
            }
            x
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn two_level_dichotomy(seed: u64, kind in 0u64..4) {
        let built = two_level_toy();
        let (n, big_n) = (built.certificate.lengths[0], built.certificate.lengths[1]);
        let mut stream = RandomSource::new(seed).stream(0);
        let x = if kind == 3 { stream.bits(big_n) } else { structured(big_n, &mut stream, kind) };
        let hit = built.model.miss_probability(&x).unwrap().complement();
        let t = 1u64 << n.div_ceil(2);
        if is_simple(&x, n, t).unwrap() {
            prop_assert!(hit.is_one());
        }
        prop_assert!(hit > built.certificate.epsilon.complement(), "hit {} for {}", hit, x);
    }

    #[test]
    fn realized_families_respect_the_model(seed: u64) {
        let built = two_level_toy();
        let fam = built.model.realize(&RandomSource::new(seed)).unwrap();
        prop_assert!(fam.verify().is_ok());
        let n = built.certificate.lengths[0];
        let set: &BTreeSet<BitString> = fam.level(n).unwrap().as_explicit().unwrap();
        prop_assert_eq!(BigUint::from(set.len()), built.certificate.levels[0].cardinality.clone());
    }
}
