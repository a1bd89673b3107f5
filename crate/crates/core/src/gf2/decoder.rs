use super::{BitVector, CodedPacket, Gf2Error, SourceBlock};

/// Incremental Gaussian elimination over GF(2) for one message block.
///
/// Rows are kept in echelon form keyed by pivot: the row stored at slot
/// `p` has its lowest set bit at `p`. Payloads ride along and receive the
/// same row operations, so back-substitution yields the source packets.
#[derive(Clone, Debug)]
pub struct DecoderState {
    k: usize,
    payload_bits: usize,
    rows: Vec<Option<(BitVector, BitVector)>>,
    rank: usize,
    absorbed: usize,
}

impl DecoderState {
    pub fn new(k: usize, payload_bits: usize) -> Self {
        assert!(k >= 1, "block length must be positive");
        Self {
            k,
            payload_bits,
            rows: vec![None; k],
            rank: 0,
            absorbed: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn payload_bits(&self) -> usize {
        self.payload_bits
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Packets offered so far, dependent ones included.
    pub fn absorbed(&self) -> usize {
        self.absorbed
    }

    pub fn is_decodable(&self) -> bool {
        self.rank == self.k
    }

    /// Adds one equation. Returns whether the rank increased.
    pub fn absorb(&mut self, coeffs: &BitVector, payload: &BitVector) -> bool {
        assert_eq!(coeffs.len(), self.k, "coefficient vector must have K bits");
        assert_eq!(payload.len(), self.payload_bits, "payload length mismatch");
        self.absorbed += 1;
        if self.rank == self.k {
            return false;
        }
        let mut c = coeffs.clone();
        let mut p = payload.clone();
        while let Some(pivot) = c.first_one() {
            match &self.rows[pivot] {
                Some((rc, rp)) => {
                    c.xor_assign(rc);
                    p.xor_assign(rp);
                }
                None => {
                    self.rows[pivot] = Some((c, p));
                    self.rank += 1;
                    return true;
                }
            }
        }
        false
    }

    /// Absorbs a pure current-block packet.
    pub fn absorb_packet(&mut self, packet: &CodedPacket) -> Result<bool, Gf2Error> {
        match (&packet.current, &packet.next) {
            (Some(c), None) => Ok(self.absorb(c, &packet.payload)),
            _ => Err(Gf2Error::NotPureCurrent),
        }
    }

    /// Back-substitutes and returns the source packets once rank is full.
    pub fn decode(&self) -> Option<Vec<BitVector>> {
        if !self.is_decodable() {
            return None;
        }
        let mut solved: Vec<BitVector> = vec![BitVector::zeros(self.payload_bits); self.k];
        for pivot in (0..self.k).rev() {
            let (coeffs, payload) = self.rows[pivot].as_ref().expect("full rank has every pivot");
            let mut value = payload.clone();
            for j in coeffs.ones().filter(|&j| j != pivot) {
                value.xor_assign(&solved[j]);
            }
            solved[pivot] = value;
        }
        Some(solved)
    }

    pub fn decode_block(&self, index: u64) -> Option<SourceBlock> {
        self.decode()
            .map(|packets| SourceBlock::new(index, packets).expect("decoded block is well formed"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::{encode, BitVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Plain rank by full elimination on a row list, independent of the
    /// pivot-keyed incremental path.
    fn naive_rank(rows: &[Vec<bool>], cols: usize) -> usize {
        let mut m: Vec<Vec<bool>> = rows.to_vec();
        let mut rank = 0;
        for col in 0..cols {
            let Some(sel) = (rank..m.len()).find(|&r| m[r][col]) else {
                continue;
            };
            m.swap(rank, sel);
            for r in 0..m.len() {
                if r != rank && m[r][col] {
                    let pivot_row = m[rank].clone();
                    for (x, y) in m[r].iter_mut().zip(pivot_row) {
                        *x ^= y;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn zero_vector_does_not_raise_rank() {
        let mut d = DecoderState::new(4, 8);
        assert!(!d.absorb(&BitVector::zeros(4), &BitVector::zeros(8)));
        assert_eq!(d.rank(), 0);
    }

    #[test]
    fn unit_vectors_reach_full_rank() {
        let mut d = DecoderState::new(5, 0);
        for i in 0..5 {
            assert!(d.absorb(&BitVector::unit(5, i), &BitVector::zeros(0)));
        }
        assert!(d.is_decodable());
    }

    #[test]
    fn duplicate_row_is_dependent() {
        let mut d = DecoderState::new(6, 0);
        let v = BitVector::from_bools(&[true, false, true, true, false, false]);
        assert!(d.absorb(&v, &BitVector::zeros(0)));
        assert!(!d.absorb(&v, &BitVector::zeros(0)));
        assert_eq!(d.rank(), 1);
        assert_eq!(d.absorbed(), 2);
    }

    #[test]
    fn not_ready_below_full_rank() {
        let mut d = DecoderState::new(3, 0);
        d.absorb(&BitVector::unit(3, 0), &BitVector::zeros(0));
        assert!(d.decode().is_none());
    }

    #[test]
    fn round_trip_k4() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..200 {
            let block = SourceBlock::random(trial, 4, 256, &mut rng);
            let mut d = DecoderState::new(4, 256);
            while !d.is_decodable() {
                let p = encode(&block, &mut rng);
                d.absorb_packet(&p).unwrap();
            }
            assert_eq!(d.decode_block(trial).unwrap(), block);
        }
    }

    #[test]
    fn rank_matches_naive_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let k = rng.random_range(1..=16);
            let n = rng.random_range(0..=k + 4);
            let mut d = DecoderState::new(k, 0);
            let mut rows = Vec::new();
            let mut last = 0;
            for _ in 0..n {
                // sparse rows make dependence common
                let bits: Vec<bool> = (0..k).map(|_| rng.random_bool(0.3)).collect();
                d.absorb(&BitVector::from_bools(&bits), &BitVector::zeros(0));
                rows.push(bits);
                assert!(d.rank() >= last);
                last = d.rank();
                assert_eq!(d.rank(), naive_rank(&rows, k));
            }
        }
    }

    #[test]
    fn two_packets_decode_k2_fraction() {
        // 6 of the 16 binary 2x2 matrices are invertible
        let mut invertible = 0;
        for bits in 0u32..16 {
            let mut d = DecoderState::new(2, 0);
            for col in 0..2 {
                let v = BitVector::from_bools(&[bits >> (2 * col) & 1 == 1, bits >> (2 * col + 1) & 1 == 1]);
                d.absorb(&v, &BitVector::zeros(0));
            }
            invertible += d.is_decodable() as u32;
        }
        assert_eq!(invertible, 6);
    }
}
