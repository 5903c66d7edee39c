//! Binary meaning/signal spaces and materialized languages.
//!
//! Meanings and signals share the [`BitVector`] type. Bit 0 of a vector is the
//! most significant bit of its integer index, so the index of `(1, 0, 0)` is 4.

use std::fmt;

use crate::error::{Error, Result};

/// Largest vector length any space may be built for.
pub const MAX_LEN: usize = 24;

/// A length-`n` binary vector, stored as its integer index.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector {
    len: u8,
    index: u32,
}

impl BitVector {
    pub fn from_index(len: usize, index: u32) -> Result<Self> {
        check_len(len)?;
        if (index as u64) >= (1u64 << len) {
            return Err(Error::config(
                "index",
                format!("{index} is outside [0, 2^{len})"),
            ));
        }
        Ok(BitVector {
            len: len as u8,
            index,
        })
    }

    /// Builds a vector from explicit bits; every element must be 0 or 1.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        check_len(bits.len())?;
        let mut index = 0u32;
        for &b in bits {
            if b > 1 {
                return Err(Error::config("bits", format!("element {b} is not binary")));
            }
            index = (index << 1) | b as u32;
        }
        Ok(BitVector {
            len: bits.len() as u8,
            index,
        })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::from_index(len, 0)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn index(&self) -> u32 {
        self.index
    }

    /// Bit at position `i`, counting from the most significant end.
    #[inline]
    pub fn bit(&self, i: usize) -> u8 {
        debug_assert!(i < self.len());
        ((self.index >> (self.len() - 1 - i)) & 1) as u8
    }

    pub fn bits(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len()).map(move |i| self.bit(i))
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.bits().collect()
    }

    /// Embeds the bits as 0.0 / 1.0 network inputs.
    pub fn to_reals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.write_reals(&mut out);
        out
    }

    #[inline]
    pub(crate) fn write_reals(&self, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.bit(i) as f64;
        }
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector(")?;
        for b in self.bits() {
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

fn check_len(len: usize) -> Result<()> {
    if len == 0 || len > MAX_LEN {
        return Err(Error::config(
            "n",
            format!("vector length {len} must lie in [1, {MAX_LEN}]"),
        ));
    }
    Ok(())
}

/// A vector of per-component probabilities, as produced by a network.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::config("probs", format!("{p} is not in [0, 1]")));
        }
        Ok(ProbVector(probs))
    }

    pub(crate) fn new_unchecked(probs: Vec<f64>) -> Self {
        ProbVector(probs)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The decision map: `p <= 0.5` goes to 0, `p > 0.5` to 1.
#[inline]
pub fn decide_component(p: f64) -> u8 {
    (p > 0.5) as u8
}

pub fn decide(p: &ProbVector) -> BitVector {
    decide_slice(p.as_slice())
}

pub(crate) fn decide_slice(p: &[f64]) -> BitVector {
    let index = p
        .iter()
        .fold(0u32, |acc, &x| (acc << 1) | decide_component(x) as u32);
    BitVector {
        len: p.len() as u8,
        index,
    }
}

/// Ascending enumeration of all `2^n` vectors of length `n`.
#[derive(Clone, Debug)]
pub struct Space {
    len: usize,
    next: u64,
    end: u64,
}

impl Iterator for Space {
    type Item = BitVector;

    fn next(&mut self) -> Option<BitVector> {
        if self.next >= self.end {
            return None;
        }
        let v = BitVector {
            len: self.len as u8,
            index: self.next as u32,
        };
        self.next += 1;
        Some(v)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rem = (self.end - self.next) as usize;
        (rem, Some(rem))
    }
}

impl ExactSizeIterator for Space {}

pub fn enumerate_space(n: usize) -> Result<Space> {
    check_len(n)?;
    Ok(Space {
        len: n,
        next: 0,
        end: 1u64 << n,
    })
}

/// Number of elements in the space of length-`n` vectors.
#[inline]
pub fn space_size(n: usize) -> usize {
    1usize << n
}

/// A total map from every meaning to a signal, stored by index.
#[derive(Clone, PartialEq, Eq)]
pub struct LanguageTable {
    n: usize,
    entries: Vec<u32>,
}

impl LanguageTable {
    /// Builds a table from signal indices, one per meaning index.
    pub fn from_indices(n: usize, entries: Vec<u32>) -> Result<Self> {
        check_len(n)?;
        if entries.len() != space_size(n) {
            return Err(Error::Dimension {
                expected: space_size(n),
                actual: entries.len(),
            });
        }
        if let Some(&bad) = entries.iter().find(|&&s| (s as u64) >= (1u64 << n)) {
            return Err(Error::config(
                "entries",
                format!("signal index {bad} is outside [0, 2^{n})"),
            ));
        }
        Ok(LanguageTable { n, entries })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Signal indices in meaning order.
    #[inline]
    pub fn indices(&self) -> &[u32] {
        &self.entries
    }

    #[inline]
    pub fn signal(&self, meaning: BitVector) -> BitVector {
        BitVector {
            len: self.n as u8,
            index: self.entries[meaning.index() as usize],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (BitVector, BitVector)> + '_ {
        self.entries.iter().enumerate().map(move |(m, &s)| {
            (
                BitVector {
                    len: self.n as u8,
                    index: m as u32,
                },
                BitVector {
                    len: self.n as u8,
                    index: s,
                },
            )
        })
    }
}

impl fmt::Debug for LanguageTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LanguageTable")
            .field("n", &self.n)
            .field("size", &self.entries.len())
            .finish()
    }
}

/// Tabulates `encode` over every meaning of length `n`.
pub fn materialize_language<F>(n: usize, mut encode: F) -> Result<LanguageTable>
where
    F: FnMut(BitVector) -> BitVector,
{
    try_materialize_language(n, |m| Ok(encode(m)))
}

pub fn try_materialize_language<F>(n: usize, mut encode: F) -> Result<LanguageTable>
where
    F: FnMut(BitVector) -> Result<BitVector>,
{
    let mut entries = Vec::with_capacity(space_size(n));
    for m in enumerate_space(n)? {
        let s = encode(m)?;
        if s.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: s.len(),
            });
        }
        entries.push(s.index());
    }
    Ok(LanguageTable { n, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(bits: &[u8]) -> BitVector {
        BitVector::from_bits(bits).unwrap()
    }

    #[test]
    fn decide_threshold() {
        let p = ProbVector::new(vec![0.5, 0.7]).unwrap();
        assert_eq!(decide(&p), bv(&[0, 1]));
        let p = ProbVector::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(decide(&p), bv(&[0, 1, 0]));
        let p = ProbVector::new(vec![0.4999, 0.5001]).unwrap();
        assert_eq!(decide(&p), bv(&[0, 1]));
    }

    #[test]
    fn prob_vector_rejects_out_of_range() {
        assert!(ProbVector::new(vec![0.2, 1.01]).is_err());
        assert!(ProbVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn small_spaces() {
        let one: Vec<_> = enumerate_space(1).unwrap().collect();
        assert_eq!(one, vec![bv(&[0]), bv(&[1])]);
        let two: Vec<_> = enumerate_space(2).unwrap().collect();
        assert_eq!(
            two,
            vec![bv(&[0, 0]), bv(&[0, 1]), bv(&[1, 0]), bv(&[1, 1])]
        );
        assert_eq!(enumerate_space(3).unwrap().len(), 8);
    }

    #[test]
    fn space_length_guard() {
        assert!(enumerate_space(0).is_err());
        assert!(enumerate_space(25).is_err());
        assert_eq!(enumerate_space(24).unwrap().len(), 1 << 24);
    }

    #[test]
    fn index_round_trip_exhaustive() {
        for n in 1..=12 {
            for (k, v) in enumerate_space(n).unwrap().enumerate() {
                assert_eq!(v.index() as usize, k);
                assert_eq!(v.len(), n);
                assert_eq!(BitVector::from_bits(&v.to_bits()).unwrap(), v);
                assert!(v.bits().all(|b| b <= 1));
            }
        }
    }

    #[test]
    fn msb_first_order() {
        assert_eq!(bv(&[1, 0, 0]).index(), 4);
        assert_eq!(
            BitVector::from_index(3, 1).unwrap().to_bits(),
            vec![0, 0, 1]
        );
        assert!(BitVector::from_index(3, 8).is_err());
        assert!(BitVector::from_bits(&[0, 2]).is_err());
    }

    #[test]
    fn identity_and_constant_languages() {
        let id = materialize_language(2, |m| m).unwrap();
        for (m, s) in id.iter() {
            assert_eq!(m, s);
        }
        let zero = BitVector::zeros(3).unwrap();
        let c = materialize_language(3, |_| zero).unwrap();
        assert!(c.indices().iter().all(|&s| s == 0));
    }

    #[test]
    fn mixed_negation_language_rows() {
        // s1 = !m3, s2 = m1, s3 = !m2
        let t = materialize_language(3, |m| bv(&[1 - m.bit(2), m.bit(0), 1 - m.bit(1)])).unwrap();
        let expected: [[u8; 3]; 8] = [
            [1, 0, 1],
            [0, 0, 1],
            [1, 0, 0],
            [0, 0, 0],
            [1, 1, 1],
            [0, 1, 1],
            [1, 1, 0],
            [0, 1, 0],
        ];
        for (k, (_, s)) in t.iter().enumerate() {
            assert_eq!(s.to_bits(), expected[k].to_vec());
        }
    }

    #[test]
    fn table_validation() {
        assert!(LanguageTable::from_indices(2, vec![0, 1, 2]).is_err());
        assert!(LanguageTable::from_indices(2, vec![0, 1, 2, 4]).is_err());
        assert!(LanguageTable::from_indices(2, vec![3, 1, 2, 0]).is_ok());
    }
}
