use std::fmt;

use rand::RngCore;
use smallvec::SmallVec;

const WORD_BITS: usize = 64;

/// Fixed-length vector over GF(2), packed 64 bits per word.
///
/// Bits beyond `len` in the last word are always zero, so word-wise
/// equality and hashing agree with bit-wise equality.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector {
    len: usize,
    words: SmallVec<[u64; 2]>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: SmallVec::from_elem(0, words_for(len)),
        }
    }

    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(index, true);
        v
    }

    /// Every bit an independent fair coin.
    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = Self::zeros(len);
        for w in v.words.iter_mut() {
            *w = rng.next_u64();
        }
        v.clear_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, index: usize) -> bool {
        assert!(index < self.len, "bit {index} out of range for length {}", self.len);
        self.words[index / WORD_BITS] >> (index % WORD_BITS) & 1 == 1
    }

    pub fn set(&mut self, index: usize, value: bool) {
        assert!(index < self.len, "bit {index} out of range for length {}", self.len);
        let mask = 1u64 << (index % WORD_BITS);
        if value {
            self.words[index / WORD_BITS] |= mask;
        } else {
            self.words[index / WORD_BITS] &= !mask;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Index of the lowest set bit.
    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, &w)| i * WORD_BITS + w.trailing_zeros() as usize)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i * WORD_BITS + bit)
            })
        })
    }

    /// `self ^= other`. Panics on length mismatch.
    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(self.len, other.len, "GF(2) vector length mismatch");
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a ^= b;
        }
    }

    pub fn xor(&self, other: &BitVector) -> BitVector {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector[")?;
        for i in 0..self.len {
            write!(f, "{}", if self.get(i) { '1' } else { '0' })?;
        }
        write!(f, "]")
    }
}

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_respects_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in [1, 63, 64, 65, 100, 130] {
            let v = BitVector::random(len, &mut rng);
            assert_eq!(v.words().len(), len.div_ceil(64));
            assert!(v.ones().all(|i| i < len));
        }
    }

    #[test]
    fn ones_and_first_one() {
        let v = BitVector::from_bools(&[false, true, false, true]);
        assert_eq!(v.ones().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(v.first_one(), Some(1));
        assert_eq!(BitVector::zeros(70).first_one(), None);
        assert_eq!(BitVector::unit(70, 66).first_one(), Some(66));
    }

    #[test]
    fn xor_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = BitVector::random(100, &mut rng);
        let b = BitVector::random(100, &mut rng);
        assert_eq!(a.xor(&b).xor(&b), a);
        assert!(a.xor(&a).is_zero());
    }

    #[test]
    #[should_panic(expected = "length mismatch")]
    fn xor_length_mismatch_panics() {
        BitVector::zeros(3).xor(&BitVector::zeros(4));
    }
}
