//! Python bindings for the `ecseq` core library.

use std::collections::{BTreeMap, BTreeSet};

use ecseq::adversary::positional_family_search;
use ecseq::avoider::{build_avoiding_string, AvoidError, AvoidanceInstance};
use ecseq::forbidden::{self, two_level_family, LevelFamily};
use ecseq::spreader::{self, recover_prefix as core_recover, Allocation, AllocationExport, Tau, WeightSeries};
use ecseq::{proxy, BitString, FiniteDistribution, RandomSource, Ratio};
use num_bigint::BigUint;
use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An immutable bit string, written as `'0'`/`'1'` characters.
#[pyclass(name = "BitString", module = "ecseq_py", frozen, eq, hash, from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PyBitString(BitString);

#[pymethods]
impl PyBitString {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        text.parse().map(Self).map_err(value_error)
    }

    #[staticmethod]
    fn from_hex(hex: &str, length: usize) -> PyResult<Self> {
        BitString::from_hex(hex, length).map(Self).map_err(value_error)
    }

    fn to_hex(&self) -> String {
        self.0.to_hex()
    }

    fn window(&self, start: usize, width: usize) -> PyResult<Self> {
        self.0.window(start, width).map(Self).map_err(value_error)
    }

    fn count_ones(&self) -> usize {
        self.0.count_ones()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __getitem__(&self, index: isize) -> PyResult<bool> {
        let len = self.0.len() as isize;
        let i = if index < 0 { index + len } else { index };
        if i < 0 || i >= len {
            return Err(PyIndexError::new_err("bit index out of range"));
        }
        Ok(self.0.get(i as usize).expect("checked"))
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("BitString('{}')", self.0)
    }
}

/// An exact probability in lowest terms.
#[pyclass(name = "ExactProb", module = "ecseq_py", frozen, eq, ord, hash, skip_from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PyExactProb(ecseq::ExactProb);

#[pymethods]
impl PyExactProb {
    /// Parses `"num/den"`.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        text.parse().map(Self).map_err(value_error)
    }

    #[getter]
    fn numerator(&self) -> BigUint {
        self.0.numer().clone()
    }

    #[getter]
    fn denominator(&self) -> BigUint {
        self.0.denom().clone()
    }

    fn __float__(&self) -> f64 {
        self.0.to_f64()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("ExactProb('{}')", self.0)
    }
}

fn weights(preset: &str) -> PyResult<WeightSeries> {
    preset.parse().map_err(value_error)
}

fn ratio(text: &str) -> PyResult<Ratio> {
    text.parse().map_err(value_error)
}

fn exact(text: &str) -> PyResult<ecseq::ExactProb> {
    text.parse().map_err(value_error)
}

/// Smallest level whose budget certificate holds for the preset.
#[pyfunction]
fn choose_m0(preset: &str) -> PyResult<u32> {
    Ok(spreader::choose_m0(&weights(preset)?))
}

#[pyfunction]
fn m0_certificate(preset: &str, m: u32) -> PyResult<String> {
    Ok(spreader::m0_certificate(&weights(preset)?, m).to_string())
}

/// Spreads random source bits; returns the output and the allocation as JSON.
#[pyfunction]
#[pyo3(signature = (preset, length, seed, m0=None, max_level=None))]
fn spread(preset: &str, length: u64, seed: u64, m0: Option<u32>, max_level: Option<u32>) -> PyResult<(PyBitString, String)> {
    let w = weights(preset)?;
    let m0 = m0.unwrap_or_else(|| spreader::choose_m0(&w));
    let alloc = Allocation::plan(&w, m0, max_level.unwrap_or(m0.max(12)), length).map_err(value_error)?;
    let (omega, _) = spreader::spread(&alloc, Tau::Random(RandomSource::new(seed)), length).map_err(value_error)?;
    let export = serde_json::to_string(&alloc.to_export()).map_err(value_error)?;
    Ok((PyBitString(omega), export))
}

/// Reads the source prefix back out of a `2^m` window cut at offset `kmod` modulo `2^m`.
#[pyfunction]
fn recover_prefix(allocation: &str, window: &PyBitString, kmod: u64, m: u32) -> PyResult<PyBitString> {
    let export: AllocationExport = serde_json::from_str(allocation).map_err(value_error)?;
    let alloc = Allocation::from_export(&export).map_err(value_error)?;
    core_recover(&alloc, &window.0, kmod, m).map(PyBitString).map_err(value_error)
}

/// Exact probability that `s` distinct random `n`-bit strings miss `d` given ones.
#[pyfunction]
fn miss_probability(d: u64, n: u64, s: BigUint) -> PyExactProb {
    PyExactProb(forbidden::miss_probability_random_set(d, n, &s))
}

/// Number of `big_n`-bit strings with at most `t` distinct aligned `n`-blocks.
#[pyfunction]
fn count_simple(big_n: u64, n: u64, t: BigUint) -> PyResult<BigUint> {
    forbidden::count_simple(big_n, n, &t).map_err(value_error)
}

/// Builds a two-level family; returns `(lengths, certificate JSON, family JSON)`.
#[pyfunction]
#[pyo3(signature = (alpha, epsilon, seed, n_min=1))]
fn build_two_level_family(alpha: &str, epsilon: &str, seed: u64, n_min: usize) -> PyResult<(Vec<usize>, String, String)> {
    let built = two_level_family(&ratio(alpha)?, &exact(epsilon)?, n_min, &RandomSource::new(seed)).map_err(value_error)?;
    let cert = serde_json::to_string(&built.certificate).map_err(value_error)?;
    let doc = serde_json::to_string(&built.family.to_doc()).map_err(value_error)?;
    Ok((built.certificate.lengths.clone(), cert, doc))
}

/// First positional family avoided with probability below `epsilon`.
///
/// `masses` maps bit strings to `"num/den"`, any shortfall from 1 counting as deficit.
/// Without it the distribution is uniform on `length` bits.
#[pyfunction]
#[pyo3(signature = (n, epsilon, length, masses=None))]
fn adversary_search(
    n: usize,
    epsilon: &str,
    length: usize,
    masses: Option<BTreeMap<String, String>>,
) -> PyResult<(Vec<String>, PyExactProb)> {
    let p = match masses {
        None => FiniteDistribution::uniform(length).map_err(value_error)?,
        Some(m) => {
            let mut parsed = BTreeMap::new();
            for (x, mass) in m {
                parsed.insert(x.parse().map_err(value_error)?, exact(&mass)?);
            }
            FiniteDistribution::new(length, parsed).map_err(value_error)?
        }
    };
    let fam = positional_family_search(&p, n, &exact(epsilon)?).map_err(value_error)?;
    let strings = fam.strings().iter().map(ToString::to_string).collect();
    Ok((strings, PyExactProb(fam.certificate().clone())))
}

/// Resamples until no window of the result lies in the family.
///
/// Raises `RuntimeError` when the budget runs out.
#[pyfunction]
#[pyo3(signature = (levels, length, seed, budget=100_000, alpha="1/1"))]
fn avoid(levels: BTreeMap<usize, Vec<String>>, length: usize, seed: u64, budget: u64, alpha: &str) -> PyResult<PyBitString> {
    let mut sets = BTreeMap::new();
    for (n, strings) in levels {
        let set: BTreeSet<BitString> = strings.iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(value_error)?;
        sets.insert(n, set);
    }
    let family = LevelFamily::explicit(ratio(alpha)?, sets).map_err(value_error)?;
    let inst = AvoidanceInstance::new(family, length, budget, RandomSource::new(seed)).map_err(value_error)?;
    match build_avoiding_string(&inst) {
        Ok(out) => Ok(PyBitString(out.bits)),
        Err(e @ AvoidError::BudgetExhausted { .. }) => Err(PyRuntimeError::new_err(e.to_string())),
        Err(e) => Err(value_error(e)),
    }
}

/// Bits of the LZ78 proxy code, header included.
#[pyfunction]
fn compress_size(bits: &PyBitString) -> u64 {
    proxy::compress_size(&bits.0)
}

/// `(offset, proxy bits)` for windows of length `n` every `stride` positions.
#[pyfunction]
#[pyo3(signature = (bits, n, stride=1))]
fn window_profile(bits: &PyBitString, n: usize, stride: usize) -> PyResult<Vec<(usize, u64)>> {
    let profile = proxy::window_profile(&bits.0, n, stride).map_err(value_error)?;
    Ok(profile.rows.iter().map(|r| (r.offset, r.bits)).collect())
}

#[pymodule]
fn ecseq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBitString>()?;
    m.add_class::<PyExactProb>()?;
    m.add_function(wrap_pyfunction!(choose_m0, m)?)?;
    m.add_function(wrap_pyfunction!(m0_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(spread, m)?)?;
    m.add_function(wrap_pyfunction!(recover_prefix, m)?)?;
    m.add_function(wrap_pyfunction!(miss_probability, m)?)?;
    m.add_function(wrap_pyfunction!(count_simple, m)?)?;
    m.add_function(wrap_pyfunction!(build_two_level_family, m)?)?;
    m.add_function(wrap_pyfunction!(adversary_search, m)?)?;
    m.add_function(wrap_pyfunction!(avoid, m)?)?;
    m.add_function(wrap_pyfunction!(compress_size, m)?)?;
    m.add_function(wrap_pyfunction!(window_profile, m)?)?;
    Ok(())
}
