//! Fixed-length bit strings used for committed strings, labels and masks.

use std::fmt;
use std::ops::BitXor;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitsError {
    #[error("invalid bit character {0:?} (expected '0' or '1')")]
    InvalidChar(char),
    #[error("invalid pattern character {0:?} (expected '0', '1' or '_')")]
    InvalidPatternChar(char),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// An ordered string of bits, written most-significant first as `"010"`.
///
/// Index 0 is the first bit of the string (b_1 in protocol notation).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    pub fn zeros(len: usize) -> Self {
        BitString(vec![false; len])
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        BitString((0..len).map(|_| rng.random::<bool>()).collect())
    }

    /// All `2^len` strings of length `len` in lexicographic order.
    pub fn enumerate(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len < usize::BITS as usize, "enumeration length too large");
        (0..(1usize << len)).map(move |v| BitString::from_index(v, len))
    }

    /// The string whose binary value (first bit most significant) is `value`.
    pub fn from_index(value: usize, len: usize) -> Self {
        BitString((0..len).map(|i| (value >> (len - 1 - i)) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString, BitsError> {
        if self.len() != other.len() {
            return Err(BitsError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(BitString(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect()))
    }

    /// Picks the bits at `positions` (0-based), in order.
    pub fn select(&self, positions: &[usize]) -> Option<BitString> {
        positions
            .iter()
            .map(|&p| self.get(p))
            .collect::<Option<Vec<_>>>()
            .map(BitString)
    }
}

impl BitXor for &BitString {
    type Output = BitString;

    /// Panics on length mismatch; use [`BitString::xor`] for the checked form.
    fn bitxor(self, rhs: &BitString) -> BitString {
        self.xor(rhs).expect("xor of bit strings with different lengths")
    }
}

impl From<Vec<bool>> for BitString {
    fn from(bits: Vec<bool>) -> Self {
        BitString(bits)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitString(iter.into_iter().collect())
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitsError::InvalidChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A partially specified label such as `"0__"`: `Some(bit)` where a bit is
/// being fixed, `None` where it is left open.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitPattern(Vec<Option<bool>>);

impl BitPattern {
    pub fn new(bits: Vec<Option<bool>>) -> Self {
        BitPattern(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(index, bit)` for every fixed position.
    pub fn fixed(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.0.iter().enumerate().filter_map(|(i, b)| b.map(|b| (i, b)))
    }

    pub fn from_fixed(len: usize, fixed: &[(usize, bool)]) -> Self {
        let mut bits = vec![None; len];
        for &(i, b) in fixed {
            if i < len {
                bits[i] = Some(b);
            }
        }
        BitPattern(bits)
    }
}

impl From<&BitString> for BitPattern {
    fn from(s: &BitString) -> Self {
        BitPattern(s.iter().map(Some).collect())
    }
}

impl fmt::Display for BitPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(match b {
                Some(false) => "0",
                Some(true) => "1",
                None => "_",
            })?;
        }
        Ok(())
    }
}

impl FromStr for BitPattern {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(Some(false)),
                '1' => Ok(Some(true)),
                '_' | '*' => Ok(None),
                other => Err(BitsError::InvalidPatternChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitPattern)
    }
}

impl Serialize for BitPattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitPattern {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
