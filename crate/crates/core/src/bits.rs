//! Packed binary strings and the on-disk bit-file format.
//!
//! Bits are stored least-significant-bit first within each byte, so bit `i`
//! lives in byte `i / 8` at mask `1 << (i % 8)`. Unused high bits of the last
//! byte are always zero, which lets equality and hashing work on the raw
//! payload.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Magic prefix of the packed bit-file format.
pub const PACKED_MAGIC: &[u8; 4] = b"ECS1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitError {
    #[error("bit index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("window [{start}, {start}+{width}) overruns string of length {len}")]
    WindowOutOfRange { start: usize, width: usize, len: usize },
    #[error("invalid character {0:?} in bit string")]
    InvalidChar(char),
    #[error("packed payload too short: need {needed} bytes, have {have}")]
    TruncatedPayload { needed: usize, have: usize },
    #[error("invalid hex payload: {0}")]
    InvalidHex(String),
    #[error("string of length {0} does not fit in a 64-bit value")]
    TooLong(usize),
}

/// A finite binary string, position-indexed from 0.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    len: usize,
    bytes: Vec<u8>,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            bytes: vec![0; len.div_ceil(8)],
        }
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            len: 0,
            bytes: Vec::with_capacity(bits.div_ceil(8)),
        }
    }

    /// Builds a string from packed LSB-first bytes, keeping the first `len` bits.
    pub fn from_packed(bytes: &[u8], len: usize) -> Result<Self, BitError> {
        let needed = len.div_ceil(8);
        if bytes.len() < needed {
            return Err(BitError::TruncatedPayload {
                needed,
                have: bytes.len(),
            });
        }
        let mut out = Self {
            len,
            bytes: bytes[..needed].to_vec(),
        };
        out.clear_tail();
        Ok(out)
    }

    /// The `width`-bit string whose numeric value (bit 0 most significant) is `value`.
    pub fn from_u64(value: u64, width: usize) -> Self {
        assert!(width <= 64, "width {width} exceeds 64 bits");
        let mut out = Self::zeros(width);
        for i in 0..width {
            if (value >> (width - 1 - i)) & 1 == 1 {
                out.set(i, true);
            }
        }
        out
    }

    /// Numeric value with bit 0 as the most significant bit.
    pub fn to_u64(&self) -> Result<u64, BitError> {
        if self.len > 64 {
            return Err(BitError::TooLong(self.len));
        }
        Ok(self.iter().fold(0u64, |acc, b| (acc << 1) | u64::from(b)))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Packed LSB-first payload, `ceil(len / 8)` bytes.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn get(&self, index: usize) -> Option<bool> {
        (index < self.len).then(|| self.bytes[index / 8] >> (index % 8) & 1 == 1)
    }

    pub fn bit(&self, index: usize) -> Result<bool, BitError> {
        self.get(index).ok_or(BitError::IndexOutOfRange {
            index,
            len: self.len,
        })
    }

    /// Sets bit `index`.
    ///
    /// # Panics
    ///
    /// Panics if `index >= len`.
    pub fn set(&mut self, index: usize, value: bool) {
        assert!(index < self.len, "bit index {index} out of range for length {}", self.len);
        let mask = 1u8 << (index % 8);
        if value {
            self.bytes[index / 8] |= mask;
        } else {
            self.bytes[index / 8] &= !mask;
        }
    }

    pub fn flip(&mut self, index: usize) {
        let v = self.bit(index).expect("flip index in range");
        self.set(index, !v);
    }

    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, value);
    }

    /// Removes and returns the last bit, keeping the padding zeroed.
    pub fn pop(&mut self) -> Option<bool> {
        let last = self.len.checked_sub(1)?;
        let value = self.get(last)?;
        self.set(last, false);
        self.len = last;
        if self.len.is_multiple_of(8) {
            self.bytes.pop();
        }
        Some(value)
    }

    pub fn extend_from(&mut self, other: &BitString) {
        for b in other.iter() {
            self.push(b);
        }
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = BitString::with_capacity(self.len + other.len);
        out.extend_from(self);
        out.extend_from(other);
        out
    }

    /// The substring `x([start, start + width))`.
    pub fn window(&self, start: usize, width: usize) -> Result<BitString, BitError> {
        match start.checked_add(width) {
            Some(end) if end <= self.len => {}
            _ => {
                return Err(BitError::WindowOutOfRange {
                    start,
                    width,
                    len: self.len,
                })
            }
        }
        if start.is_multiple_of(8) {
            return BitString::from_packed(&self.bytes[start / 8..], width);
        }
        Ok((start..start + width).map(|i| self.bytes[i / 8] >> (i % 8) & 1 == 1).collect())
    }

    /// Numeric value of the window at `start` of `width <= 64` bits, bit `start` most significant.
    ///
    /// # Panics
    ///
    /// Panics if the window is out of range or wider than 64 bits.
    pub fn window_value(&self, start: usize, width: usize) -> u64 {
        assert!(width <= 64 && start + width <= self.len);
        let mut v = 0u64;
        for i in start..start + width {
            v = (v << 1) | u64::from(self.bytes[i / 8] >> (i % 8) & 1);
        }
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.bytes[i / 8] >> (i % 8) & 1 == 1)
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    pub fn from_hex(text: &str, len: usize) -> Result<Self, BitError> {
        let bytes = hex::decode(text).map_err(|e| BitError::InvalidHex(e.to_string()))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(BitError::InvalidHex(format!(
                "expected {} bytes for {len} bits, got {}",
                len.div_ceil(8),
                bytes.len()
            )));
        }
        let out = Self::from_packed(&bytes, len)?;
        if out.bytes != bytes {
            return Err(BitError::InvalidHex("nonzero padding bits".into()));
        }
        Ok(out)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 8;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= (1u8 << rem) - 1;
            }
        }
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let iter = iter.into_iter();
        let mut out = BitString::with_capacity(iter.size_hint().0);
        for b in iter {
            out.push(b);
        }
        out
    }
}

/// Shorter strings first; equal lengths compare as binary numerals with bit 0 most significant.
impl Ord for BitString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len.cmp(&other.len).then_with(|| {
            self.bytes
                .iter()
                .map(|b| b.reverse_bits())
                .cmp(other.bytes.iter().map(|b| b.reverse_bits()))
        })
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(\"{self}\")")
    }
}

impl FromStr for BitString {
    type Err = BitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitError::InvalidChar(other)),
            })
            .collect()
    }
}

impl serde::Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Bit-file encodings understood by [`read_bit_file`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitFileFormat {
    /// `'0'`/`'1'` characters, newlines ignored.
    Ascii,
    /// `ECS1`, u64 little-endian bit count, LSB-first payload.
    Packed,
}

pub fn encode_bit_file(bits: &BitString, format: BitFileFormat) -> Vec<u8> {
    match format {
        BitFileFormat::Ascii => {
            let mut out = bits.to_string().into_bytes();
            out.push(b'\n');
            out
        }
        BitFileFormat::Packed => {
            let mut out = Vec::with_capacity(12 + bits.as_bytes().len());
            out.extend_from_slice(PACKED_MAGIC);
            out.extend_from_slice(&(bits.len() as u64).to_le_bytes());
            out.extend_from_slice(bits.as_bytes());
            out
        }
    }
}

/// Decodes either bit-file encoding, sniffing the packed magic.
pub fn read_bit_file(data: &[u8]) -> Result<BitString, BitError> {
    if data.starts_with(PACKED_MAGIC) {
        if data.len() < 12 {
            return Err(BitError::TruncatedPayload {
                needed: 12,
                have: data.len(),
            });
        }
        let mut count = [0u8; 8];
        count.copy_from_slice(&data[4..12]);
        let len = u64::from_le_bytes(count) as usize;
        return BitString::from_packed(&data[12..], len);
    }
    data.iter()
        .filter(|&&c| c != b'\n' && c != b'\r')
        .map(|&c| match c {
            b'0' => Ok(false),
            b'1' => Ok(true),
            other => Err(BitError::InvalidChar(other as char)),
        })
        .collect()
}
