//! Bipolar hypervectors and their algebra.
//!
//! A hypervector is a point of {-1, +1}^dim, stored bit-packed: bit 1 encodes
//! component +1, bit 0 encodes -1. Component j lives at bit (j % 64) of word
//! (j / 64). Bits past `dim` in the last word are always zero, so equality and
//! popcount-based operations work on the raw words.
//!
//! The three primitive operations:
//! * bundling: componentwise signed sum followed by majority sign, with sign
//!   ties broken by a random bit (see [`BundleAccumulator`]);
//! * binding: componentwise product, which on packed bits is XNOR;
//! * normalized Hamming distance: fraction of disagreeing components.
//!
//! Binding is a self-inverse isometry of the Hamming metric, and a bundle
//! stays measurably closer to each constituent than to an unrelated vector.
//! Both facts are what the rest of the crate leans on.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::rng::HdRng;
use rand_chacha::rand_core::RngCore;

const WORD_BITS: usize = 64;

fn words_for(dim: usize) -> usize {
    dim.div_ceil(WORD_BITS)
}

/// Mask selecting the valid bits of the final word.
fn tail_mask(dim: usize) -> u64 {
    let rem = dim % WORD_BITS;
    if rem == 0 {
        !0u64
    } else {
        !0u64 >> (WORD_BITS - rem)
    }
}

/// A point of {-1, +1}^dim, bit-packed (bit 1 means +1).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hypervector {
    dim: usize,
    words: Vec<u64>,
}

impl Hypervector {
    /// Sample a vector with i.i.d. uniform components.
    ///
    /// Consumes exactly one u64 from `rng` per 64 components (the final,
    /// partial word also consumes a full u64).
    pub fn random(rng: &mut HdRng, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension(dim));
        }
        let n = words_for(dim);
        let mut words = Vec::with_capacity(n);
        for _ in 0..n {
            words.push(rng.next_u64());
        }
        words[n - 1] &= tail_mask(dim);
        Ok(Hypervector { dim, words })
    }

    /// Build from explicit components, each of which must be -1 or +1.
    pub fn from_components(components: &[i8]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::ZeroDimension(0));
        }
        let dim = components.len();
        let mut words = vec![0u64; words_for(dim)];
        for (j, &c) in components.iter().enumerate() {
            match c {
                1 => words[j / WORD_BITS] |= 1u64 << (j % WORD_BITS),
                -1 => {}
                other => {
                    return Err(Error::param(
                        "components",
                        format!("component {j} is {other}, expected -1 or +1"),
                    ))
                }
            }
        }
        Ok(Hypervector { dim, words })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Component j as -1 or +1.
    pub fn component(&self, j: usize) -> i8 {
        assert!(j < self.dim, "component {j} out of range for dim {}", self.dim);
        if (self.words[j / WORD_BITS] >> (j % WORD_BITS)) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// Unpack into a dense -1/+1 array.
    pub fn to_components(&self) -> Vec<i8> {
        (0..self.dim).map(|j| self.component(j)).collect()
    }

    pub(crate) fn word_slice(&self) -> &[u64] {
        &self.words
    }

    /// Componentwise product. Packed form: XNOR, then re-zero the tail bits.
    pub fn bind(&self, other: &Hypervector) -> Result<Hypervector> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let n = self.words.len();
        let mut words = Vec::with_capacity(n);
        for i in 0..n {
            words.push(!(self.words[i] ^ other.words[i]));
        }
        words[n - 1] &= tail_mask(self.dim);
        Ok(Hypervector {
            dim: self.dim,
            words,
        })
    }

    /// Componentwise negation.
    pub fn negate(&self) -> Hypervector {
        let n = self.words.len();
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        words[n - 1] &= tail_mask(self.dim);
        Hypervector {
            dim: self.dim,
            words,
        }
    }

    /// Number of disagreeing components.
    pub fn hamming_count(&self, other: &Hypervector) -> Result<u64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let count = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a ^ b).count_ones()))
            .sum();
        Ok(count)
    }

    /// Normalized Hamming distance: disagreeing components / dim, in [0, 1].
    pub fn hamming(&self, other: &Hypervector) -> Result<f64> {
        Ok(self.hamming_count(other)? as f64 / self.dim as f64)
    }

    /// Majority-sign bundle of `vectors`; `rng` breaks component sign ties.
    ///
    /// Shorthand for accumulating all vectors into a [`BundleAccumulator`]
    /// and finalizing it.
    pub fn bundle(vectors: &[Hypervector], rng: &mut HdRng) -> Result<Hypervector> {
        let first = vectors.first().ok_or(Error::EmptyBundle)?;
        let mut acc = BundleAccumulator::new(first.dim())?;
        for v in vectors {
            acc.add(v)?;
        }
        acc.finalize(rng)
    }

    /// Serialize as a little-endian u32 dimension header followed by the
    /// packed words, each little-endian.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for word in &self.words {
            w.write_all(&word.to_le_bytes())?;
        }
        Ok(())
    }

    /// Inverse of [`Hypervector::write_to`]. Rejects zero dimension and
    /// nonzero padding bits, so every readable vector is canonical.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Hypervector> {
        let mut dim_buf = [0u8; 4];
        r.read_exact(&mut dim_buf)
            .map_err(|e| Error::io("reading hypervector dimension", e))?;
        let dim = u32::from_le_bytes(dim_buf) as usize;
        if dim == 0 {
            return Err(Error::MalformedFile {
                what: "hypervector".into(),
                path: "<stream>".into(),
                reason: "dimension is zero".into(),
            });
        }
        let n = words_for(dim);
        let mut words = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf)
                .map_err(|e| Error::io("reading hypervector words", e))?;
            words.push(u64::from_le_bytes(buf));
        }
        if words[n - 1] & !tail_mask(dim) != 0 {
            return Err(Error::MalformedFile {
                what: "hypervector".into(),
                path: "<stream>".into(),
                reason: "nonzero padding bits past the declared dimension".into(),
            });
        }
        Ok(Hypervector { dim, words })
    }
}

/// Running componentwise signed sum for bundling many vectors without
/// materializing intermediate majorities.
///
/// Add vectors one at a time, then [`BundleAccumulator::finalize`] takes the
/// majority sign per component. Components with a zero sum (only possible
/// after an even number of adds) are resolved by one random bit each, drawn
/// in component order.
#[derive(Debug, Clone)]
pub struct BundleAccumulator {
    counts: Vec<i32>,
    added: usize,
}

impl BundleAccumulator {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension(dim));
        }
        Ok(BundleAccumulator {
            counts: vec![0i32; dim],
            added: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    /// Number of vectors accumulated so far.
    pub fn added(&self) -> usize {
        self.added
    }

    pub fn add(&mut self, v: &Hypervector) -> Result<()> {
        if v.dim() != self.counts.len() {
            return Err(Error::DimensionMismatch {
                left: self.counts.len(),
                right: v.dim(),
            });
        }
        for (w, word) in v.word_slice().iter().enumerate() {
            let base = w * WORD_BITS;
            let end = WORD_BITS.min(self.counts.len() - base);
            let counts = &mut self.counts[base..base + end];
            for (b, c) in counts.iter_mut().enumerate() {
                // +1 for a set bit, -1 for a clear bit.
                *c += ((word >> b) & 1) as i32 * 2 - 1;
            }
        }
        self.added += 1;
        Ok(())
    }

    /// Majority sign per component; ties consume one bit of `rng` each, in
    /// ascending component order.
    pub fn finalize(self, rng: &mut HdRng) -> Result<Hypervector> {
        if self.added == 0 {
            return Err(Error::EmptyBundle);
        }
        let dim = self.counts.len();
        let mut words = vec![0u64; words_for(dim)];
        for (j, &c) in self.counts.iter().enumerate() {
            let bit = match c.cmp(&0) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => rng.tie_bit(),
            };
            if bit {
                words[j / WORD_BITS] |= 1u64 << (j % WORD_BITS);
            }
        }
        Ok(Hypervector { dim, words })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hv(components: &[i8]) -> Hypervector {
        Hypervector::from_components(components).unwrap()
    }

    #[test]
    fn components_round_trip() {
        let c = vec![1i8, -1, -1, 1, 1, 1, -1];
        let v = hv(&c);
        assert_eq!(v.dim(), 7);
        assert_eq!(v.to_components(), c);
        assert_eq!(v.component(0), 1);
        assert_eq!(v.component(2), -1);
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(matches!(
            Hypervector::from_components(&[]),
            Err(Error::ZeroDimension(_))
        ));
        let mut rng = HdRng::from_seed(0);
        assert!(Hypervector::random(&mut rng, 0).is_err());
        assert!(BundleAccumulator::new(0).is_err());
    }

    #[test]
    fn bind_matches_componentwise_product() {
        let a = hv(&[1, -1, 1, -1, 1]);
        let b = hv(&[1, 1, -1, -1, 1]);
        let c = a.bind(&b).unwrap();
        assert_eq!(c.to_components(), vec![1, -1, -1, 1, 1]);
    }

    #[test]
    fn bind_is_self_inverse() {
        let mut rng = HdRng::from_seed(11);
        for dim in [1usize, 63, 64, 65, 200] {
            let a = Hypervector::random(&mut rng, dim).unwrap();
            let b = Hypervector::random(&mut rng, dim).unwrap();
            assert_eq!(a.bind(&b).unwrap().bind(&b).unwrap(), a);
        }
    }

    #[test]
    fn bind_preserves_distances() {
        let mut rng = HdRng::from_seed(12);
        for dim in [1usize, 64, 130] {
            let a = Hypervector::random(&mut rng, dim).unwrap();
            let b = Hypervector::random(&mut rng, dim).unwrap();
            let c = Hypervector::random(&mut rng, dim).unwrap();
            assert_eq!(
                a.hamming_count(&b).unwrap(),
                a.bind(&c).unwrap().hamming_count(&b.bind(&c).unwrap()).unwrap()
            );
        }
    }

    #[test]
    fn hamming_basics() {
        let a = hv(&[1, 1, -1, -1]);
        let b = hv(&[1, -1, -1, 1]);
        assert_eq!(a.hamming_count(&b).unwrap(), 2);
        assert_eq!(a.hamming(&b).unwrap(), 0.5);
        assert_eq!(a.hamming(&a).unwrap(), 0.0);
        assert_eq!(a.hamming(&a.negate()).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = hv(&[1, -1]);
        let b = hv(&[1, -1, 1]);
        assert!(a.bind(&b).is_err());
        assert!(a.hamming(&b).is_err());
        let mut acc = BundleAccumulator::new(2).unwrap();
        assert!(acc.add(&b).is_err());
    }

    #[test]
    fn negate_flips_every_component() {
        let mut rng = HdRng::from_seed(5);
        let v = Hypervector::random(&mut rng, 129).unwrap();
        let n = v.negate();
        for j in 0..129 {
            assert_eq!(v.component(j), -n.component(j));
        }
        assert_eq!(n.negate(), v);
    }

    #[test]
    fn odd_bundle_is_exact_majority() {
        let a = hv(&[1, 1, 1, -1, -1]);
        let b = hv(&[1, 1, -1, -1, 1]);
        let c = hv(&[1, -1, -1, -1, 1]);
        let mut rng = HdRng::from_seed(0);
        let m = Hypervector::bundle(&[a, b, c], &mut rng).unwrap();
        assert_eq!(m.to_components(), vec![1, 1, -1, -1, 1]);
    }

    #[test]
    fn bundle_of_one_is_identity() {
        let mut rng = HdRng::from_seed(3);
        let v = Hypervector::random(&mut rng, 97).unwrap();
        let mut tie = HdRng::from_seed(4);
        assert_eq!(
            Hypervector::bundle(std::slice::from_ref(&v), &mut tie).unwrap(),
            v
        );
    }

    #[test]
    fn empty_bundle_is_an_error() {
        let mut rng = HdRng::from_seed(0);
        assert!(matches!(
            Hypervector::bundle(&[], &mut rng),
            Err(Error::EmptyBundle)
        ));
        let acc = BundleAccumulator::new(8).unwrap();
        assert!(matches!(acc.finalize(&mut rng), Err(Error::EmptyBundle)));
    }

    #[test]
    fn even_ties_draw_one_bit_per_tied_component_in_order() {
        // v and its negation tie on every component; the result must equal
        // the tie bits of a fresh stream with the same seed, in order.
        let mut rng = HdRng::from_seed(77);
        let v = Hypervector::random(&mut rng, 100).unwrap();
        let pair = [v.clone(), v.negate()];
        let mut tie = HdRng::from_seed(123);
        let m = Hypervector::bundle(&pair, &mut tie).unwrap();
        let mut expect = HdRng::from_seed(123);
        for j in 0..100 {
            let want = if expect.tie_bit() { 1 } else { -1 };
            assert_eq!(m.component(j), want, "component {j}");
        }
    }

    #[test]
    fn tie_breaks_are_balanced() {
        let mut rng = HdRng::from_seed(500);
        let v = Hypervector::random(&mut rng, 10_000).unwrap();
        let mut tie = HdRng::from_seed(501);
        let m = Hypervector::bundle(&[v.clone(), v.negate()], &mut tie).unwrap();
        let plus = m.to_components().iter().filter(|&&c| c == 1).count();
        let frac = plus as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.05, "tie fraction {frac}");
    }

    #[test]
    fn accumulator_tracks_adds() {
        let mut acc = BundleAccumulator::new(4).unwrap();
        assert_eq!(acc.added(), 0);
        acc.add(&hv(&[1, 1, -1, -1])).unwrap();
        acc.add(&hv(&[1, -1, 1, -1])).unwrap();
        assert_eq!(acc.added(), 2);
        assert_eq!(acc.dim(), 4);
    }

    #[test]
    fn serialization_round_trips() {
        let mut rng = HdRng::from_seed(9);
        for dim in [1usize, 63, 64, 65, 1000] {
            let v = Hypervector::random(&mut rng, dim).unwrap();
            let mut buf = Vec::new();
            v.write_to(&mut buf).unwrap();
            assert_eq!(buf.len(), 4 + 8 * words_for(dim));
            let back = Hypervector::read_from(&mut buf.as_slice()).unwrap();
            assert_eq!(back, v);
        }
    }

    #[test]
    fn deserialization_rejects_garbage() {
        // Zero dimension.
        let mut buf = Vec::new();
        buf.extend_from_slice(&0u32.to_le_bytes());
        assert!(Hypervector::read_from(&mut buf.as_slice()).is_err());

        // Nonzero padding bits.
        let mut buf = Vec::new();
        buf.extend_from_slice(&3u32.to_le_bytes());
        buf.extend_from_slice(&0xFFu64.to_le_bytes());
        assert!(Hypervector::read_from(&mut buf.as_slice()).is_err());

        // Truncated words.
        let mut buf = Vec::new();
        buf.extend_from_slice(&100u32.to_le_bytes());
        buf.extend_from_slice(&0u64.to_le_bytes());
        assert!(Hypervector::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn random_fills_whole_words() {
        // The draw pattern is pinned: one u64 per word including the tail.
        let mut a = HdRng::from_seed(42);
        let v65 = Hypervector::random(&mut a, 65).unwrap();
        let mut b = HdRng::from_seed(42);
        let w0 = b.next_u64();
        let w1 = b.next_u64();
        assert_eq!(v65.word_slice()[0], w0);
        assert_eq!(v65.word_slice()[1], w1 & 1);
    }
}
