//! LZ78 dictionary parse as a rough upper-bound proxy for description length.
//!
//! The proxy only bounds complexity from above, loosely. Nothing certified
//! depends on it.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::combin::ceil_log2;

/// Bits spent on the length header.
pub const HEADER_BITS: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProxyError {
    #[error("window length {n} exceeds string length {len}")]
    WindowTooLong { n: usize, len: usize },
    #[error("stride must be positive")]
    ZeroStride,
    #[error("truncated code")]
    Truncated,
    #[error("phrase {phrase} refers to unknown phrase {index}")]
    BadIndex { phrase: usize, index: u64 },
    #[error("code carries {extra} bits past the last phrase")]
    TrailingBits { extra: usize },
}

/// Phrase `i` (from 1) is phrase `index < i` followed by `bit`; phrase 0 is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lz78Code {
    length: u64,
    phrases: Vec<(u64, bool)>,
}

impl Lz78Code {
    pub fn length(&self) -> u64 {
        self.length
    }

    pub fn phrases(&self) -> &[(u64, bool)] {
        &self.phrases
    }

    /// Header, then each phrase as its index in `ceil(log2 i)` bits and one literal bit.
    pub fn to_bits(&self) -> BitString {
        let mut out = BitString::from_u64(self.length, 64);
        for (i, &(index, bit)) in self.phrases.iter().enumerate() {
            let width = ceil_log2(i as u64 + 1) as usize;
            out.extend_from(&BitString::from_u64(index, width));
            out.push(bit);
        }
        out
    }

    pub fn from_bits(code: &BitString) -> Result<Self, ProxyError> {
        if code.len() < HEADER_BITS as usize {
            return Err(ProxyError::Truncated);
        }
        let length = code.window_value(0, 64);
        let mut pos = 64;
        let mut phrases = Vec::new();
        let mut covered = 0u64;
        let mut phrase_lengths = vec![0u64];
        while covered < length {
            let i = phrases.len();
            let width = ceil_log2(i as u64 + 1) as usize;
            if pos + width + 1 > code.len() {
                return Err(ProxyError::Truncated);
            }
            let index = if width == 0 { 0 } else { code.window_value(pos, width) };
            if index > i as u64 {
                return Err(ProxyError::BadIndex { phrase: i + 1, index });
            }
            let bit = code.get(pos + width).expect("in range");
            pos += width + 1;
            let len = phrase_lengths[index as usize] + 1;
            phrase_lengths.push(len);
            covered += len;
            phrases.push((index, bit));
        }
        if pos != code.len() {
            return Err(ProxyError::TrailingBits { extra: code.len() - pos });
        }
        Ok(Self { length, phrases })
    }
}

/// Parses `x` into phrases, each the longest known phrase plus one bit.
///
/// A final phrase cut short by the end of `x` is padded with a 0 bit that the
/// length header strips on decoding.
pub fn encode(x: &BitString) -> Lz78Code {
    let mut children: HashMap<(u64, bool), u64> = HashMap::new();
    let mut phrases = Vec::new();
    let mut current = 0u64;
    for bit in x.iter() {
        match children.get(&(current, bit)) {
            Some(&next) => current = next,
            None => {
                phrases.push((current, bit));
                children.insert((current, bit), phrases.len() as u64);
                current = 0;
            }
        }
    }
    if current != 0 {
        phrases.push((current, false));
    }
    Lz78Code {
        length: x.len() as u64,
        phrases,
    }
}

pub fn decode(code: &Lz78Code) -> Result<BitString, ProxyError> {
    let mut table: Vec<BitString> = vec![BitString::new()];
    let mut out = BitString::with_capacity(code.length as usize);
    for (i, &(index, bit)) in code.phrases.iter().enumerate() {
        let prefix = table.get(index as usize).ok_or(ProxyError::BadIndex { phrase: i + 1, index })?;
        let mut phrase = prefix.clone();
        phrase.push(bit);
        out.extend_from(&phrase);
        table.push(phrase);
    }
    if (out.len() as u64) < code.length {
        return Err(ProxyError::Truncated);
    }
    while out.len() as u64 > code.length {
        out.pop();
    }
    Ok(out)
}

/// Size in bits of [`Lz78Code::to_bits`] for `x`.
pub fn compress_size(x: &BitString) -> u64 {
    let phrases = encode(x).phrases.len() as u64;
    HEADER_BITS + (1..=phrases).map(|i| u64::from(ceil_log2(i)) + 1).sum::<u64>()
}

/// Proxy sizes of the length-`n` windows at offsets `0, stride, 2 stride, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub proxy: String,
    pub window_length: usize,
    pub stride: usize,
    pub rows: Vec<ProfileRow>,
    pub min: u64,
    pub mean: f64,
    pub max: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub offset: usize,
    pub bits: u64,
}

impl ComplexityProfile {
    /// Offset of the first window attaining the minimum.
    pub fn argmin(&self) -> usize {
        self.rows.iter().find(|r| r.bits == self.min).map_or(0, |r| r.offset)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("offset,bits\n");
        for row in &self.rows {
            writeln!(out, "{},{}", row.offset, row.bits).expect("string write");
        }
        out
    }
}

pub fn window_profile(x: &BitString, n: usize, stride: usize) -> Result<ComplexityProfile, ProxyError> {
    if n > x.len() {
        return Err(ProxyError::WindowTooLong { n, len: x.len() });
    }
    if stride == 0 {
        return Err(ProxyError::ZeroStride);
    }
    let rows: Vec<ProfileRow> = (0..=x.len() - n)
        .step_by(stride)
        .map(|offset| ProfileRow {
            offset,
            bits: compress_size(&x.window(offset, n).expect("in range")),
        })
        .collect();
    let min = rows.iter().map(|r| r.bits).min().expect("at least one window");
    let max = rows.iter().map(|r| r.bits).max().expect("at least one window");
    let mean = rows.iter().map(|r| r.bits as f64).sum::<f64>() / rows.len() as f64;
    Ok(ComplexityProfile {
        proxy: "lz78 upper-bound heuristic".into(),
        window_length: n,
        stride,
        rows,
        min,
        mean,
        max,
    })
}
