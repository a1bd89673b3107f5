use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BitVector, Gf2Error};

/// One message block: `K` source packets of `m` bits each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceBlock {
    index: u64,
    packets: Vec<BitVector>,
}

impl SourceBlock {
    pub fn new(index: u64, packets: Vec<BitVector>) -> Result<Self, Gf2Error> {
        let Some(first) = packets.first() else {
            return Err(Gf2Error::EmptyBlock);
        };
        let m = first.len();
        if let Some(bad) = packets.iter().find(|p| p.len() != m) {
            return Err(Gf2Error::LengthMismatch {
                expected: m,
                actual: bad.len(),
            });
        }
        Ok(Self { index, packets })
    }

    pub fn random<R: RngCore + ?Sized>(index: u64, k: usize, m: usize, rng: &mut R) -> Self {
        assert!(k >= 1, "block length must be positive");
        let packets = (0..k).map(|_| BitVector::random(m, rng)).collect();
        Self { index, packets }
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn k(&self) -> usize {
        self.packets.len()
    }

    pub fn packet_bits(&self) -> usize {
        self.packets[0].len()
    }

    pub fn packets(&self) -> &[BitVector] {
        &self.packets
    }

    pub fn into_packets(self) -> Vec<BitVector> {
        self.packets
    }

    /// XOR of the packets selected by `coeffs`.
    pub fn combine(&self, coeffs: &BitVector) -> BitVector {
        assert_eq!(coeffs.len(), self.k(), "coefficient vector must have K bits");
        let mut out = BitVector::zeros(self.packet_bits());
        for i in coeffs.ones() {
            out.xor_assign(&self.packets[i]);
        }
        out
    }
}

/// Occupancy of the two header fields: `h1` is written only by the
/// source, `h2` only by a relay.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Header {
    pub source: bool,
    pub relay: bool,
}

impl Header {
    pub const SOURCE: Header = Header {
        source: true,
        relay: false,
    };
    pub const RELAY: Header = Header {
        source: false,
        relay: true,
    };

    fn merge(self, other: Header) -> Header {
        Header {
            source: self.source || other.source,
            relay: self.relay || other.relay,
        }
    }
}

/// A fountain-coded packet as seen on the air.
///
/// `current` holds the coefficients over block `block`, `next` the
/// coefficients over block `block + 1`. A packet with both is
/// network-coded. Coefficient metadata travels outside the payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedPacket {
    pub block: u64,
    pub payload: BitVector,
    pub current: Option<BitVector>,
    pub next: Option<BitVector>,
    pub header: Header,
}

impl CodedPacket {
    /// Pure packet of `block` built from explicit coefficients.
    pub fn from_coefficients(block: &SourceBlock, coeffs: BitVector, header: Header) -> Self {
        let payload = block.combine(&coeffs);
        Self {
            block: block.index(),
            payload,
            current: Some(coeffs),
            next: None,
            header,
        }
    }

    pub fn is_network_coded(&self) -> bool {
        self.current.is_some() && self.next.is_some()
    }

    pub fn is_pure_current(&self) -> bool {
        self.current.is_some() && self.next.is_none()
    }

    pub fn is_pure_next(&self) -> bool {
        self.current.is_none() && self.next.is_some()
    }

    /// View with zero coefficient vectors dropped, for algebraic comparison.
    pub fn normalized(&self) -> CodedPacket {
        let keep = |c: &Option<BitVector>| c.clone().filter(|v| !v.is_zero());
        CodedPacket {
            block: self.block,
            payload: self.payload.clone(),
            current: keep(&self.current),
            next: keep(&self.next),
            header: self.header,
        }
    }

    /// Re-tags a pure next-block packet as a current-block packet of
    /// `block + 1`.
    pub fn advance(self) -> Result<CodedPacket, Gf2Error> {
        if !self.is_pure_next() {
            return Err(Gf2Error::NotPureNext);
        }
        Ok(CodedPacket {
            block: self.block + 1,
            payload: self.payload,
            current: self.next,
            next: None,
            header: self.header,
        })
    }
}

/// Degree distribution of the random linear fountain: `C(K,d) / (2^K - 1)`
/// for `d >= 1` and zero for `d = 0`.
pub fn degree_pmf(k: usize, d: usize) -> Result<f64, Gf2Error> {
    if k == 0 || d > k {
        return Err(Gf2Error::DegreeOutOfRange { k, d });
    }
    if d == 0 {
        return Ok(0.0);
    }
    let ln_choose = ln_gamma_int(k + 1) - ln_gamma_int(d + 1) - ln_gamma_int(k - d + 1);
    // ln(2^K - 1) without overflow
    let ln_denominator = k as f64 * std::f64::consts::LN_2 + (-(0.5f64).powi(k as i32)).ln_1p();
    Ok((ln_choose - ln_denominator).exp())
}

fn ln_gamma_int(n: usize) -> f64 {
    (2..n).map(|i| (i as f64).ln()).sum()
}

/// Encodes one packet with coefficients drawn uniformly from all `2^K`
/// binary vectors (the zero vector included).
pub fn encode<R: RngCore + ?Sized>(block: &SourceBlock, rng: &mut R) -> CodedPacket {
    let coeffs = BitVector::random(block.k(), rng);
    CodedPacket::from_coefficients(block, coeffs, Header::SOURCE)
}

/// Seeded coefficient stream. Two encoders built from the same seed emit
/// identical coefficient sequences, which is how the source and the
/// successful relay agree on the current-block code in phase two.
#[derive(Clone, Debug)]
pub struct Encoder {
    k: usize,
    rng: ChaCha8Rng,
}

impl Encoder {
    pub fn new(k: usize, seed: u64) -> Self {
        assert!(k >= 1, "block length must be positive");
        Self {
            k,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_coefficients(&mut self) -> BitVector {
        BitVector::random(self.k, &mut self.rng)
    }

    pub fn encode(&mut self, block: &SourceBlock, header: Header) -> CodedPacket {
        assert_eq!(block.k(), self.k, "encoder built for a different block length");
        let coeffs = self.next_coefficients();
        CodedPacket::from_coefficients(block, coeffs, header)
    }
}

/// XOR of a current-block packet with a next-block packet. The result is
/// sent by the source and occupies `h1` only.
pub fn network_code(current: &CodedPacket, next: &CodedPacket) -> Result<CodedPacket, Gf2Error> {
    if !current.is_pure_current() {
        return Err(Gf2Error::NotPureCurrent);
    }
    let (Some(next_coeffs), None) = (&next.current, &next.next) else {
        return Err(Gf2Error::NotPureCurrent);
    };
    if next.block != current.block + 1 {
        return Err(Gf2Error::BlockMismatch {
            expected: current.block + 1,
            actual: next.block,
        });
    }
    check_len(current.payload.len(), next.payload.len())?;
    Ok(CodedPacket {
        block: current.block,
        payload: current.payload.xor(&next.payload),
        current: current.current.clone(),
        next: Some(next_coeffs.clone()),
        header: Header::SOURCE,
    })
}

/// Bit-wise XOR of whatever arrived unerased in one slot. Coefficient
/// vectors present on both sides are XOR-ed; a vector that cancels to
/// zero is dropped, so the source's network-coded packet superposed with
/// the relay's identical current-block packet leaves a pure next-block
/// packet.
pub fn superpose(from_source: Option<&CodedPacket>, from_relay: Option<&CodedPacket>) -> Option<CodedPacket> {
    match (from_source, from_relay) {
        (None, None) => None,
        (Some(p), None) | (None, Some(p)) => Some(p.clone()),
        (Some(a), Some(b)) => {
            assert_eq!(a.block, b.block, "superposed packets refer to different blocks");
            Some(CodedPacket {
                block: a.block,
                payload: a.payload.xor(&b.payload),
                current: merge_coeffs(&a.current, &b.current),
                next: merge_coeffs(&a.next, &b.next),
                header: a.header.merge(b.header),
            })
        }
    }
}

fn merge_coeffs(a: &Option<BitVector>, b: &Option<BitVector>) -> Option<BitVector> {
    match (a, b) {
        (None, None) => None,
        (Some(v), None) | (None, Some(v)) => Some(v.clone()),
        (Some(x), Some(y)) => Some(x.xor(y)).filter(|v| !v.is_zero()),
    }
}

/// Removes the contribution of an already-decoded block from a mixed
/// packet, leaving a pure next-block packet.
pub fn strip_known(mixed: &CodedPacket, decoded: &SourceBlock) -> Result<CodedPacket, Gf2Error> {
    if decoded.index() != mixed.block {
        return Err(Gf2Error::BlockMismatch {
            expected: mixed.block,
            actual: decoded.index(),
        });
    }
    let (Some(current), Some(next)) = (&mixed.current, &mixed.next) else {
        return Err(Gf2Error::NotNetworkCoded);
    };
    check_len(mixed.payload.len(), decoded.packet_bits())?;
    let mut payload = mixed.payload.clone();
    payload.xor_assign(&decoded.combine(current));
    Ok(CodedPacket {
        block: mixed.block,
        payload,
        current: None,
        next: Some(next.clone()),
        header: mixed.header,
    })
}

fn check_len(expected: usize, actual: usize) -> Result<(), Gf2Error> {
    if expected != actual {
        return Err(Gf2Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(index: u64, k: usize, m: usize, seed: u64) -> SourceBlock {
        SourceBlock::random(index, k, m, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn degree_pmf_examples() {
        assert_eq!(degree_pmf(1, 0).unwrap(), 0.0);
        assert!((degree_pmf(1, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((degree_pmf(3, 2).unwrap() - 3.0 / 7.0).abs() < 1e-14);
        assert!(degree_pmf(0, 0).is_err());
        assert!(degree_pmf(3, 4).is_err());
    }

    #[test]
    fn degree_pmf_sums_to_one() {
        for k in [1, 2, 5, 17, 100] {
            let total: f64 = (0..=k).map(|d| degree_pmf(k, d).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-12, "K={k}: {total}");
        }
    }

    #[test]
    fn zero_coefficients_give_zero_payload() {
        let b = block(0, 5, 64, 1);
        let p = CodedPacket::from_coefficients(&b, BitVector::zeros(5), Header::SOURCE);
        assert!(p.payload.is_zero());
    }

    #[test]
    fn unit_coefficients_select_one_packet() {
        let b = block(0, 5, 100, 2);
        for k in 0..5 {
            let p = CodedPacket::from_coefficients(&b, BitVector::unit(5, k), Header::SOURCE);
            assert_eq!(&p.payload, &b.packets()[k]);
        }
    }

    #[test]
    fn encoder_is_deterministic_per_seed() {
        let b = block(0, 10, 64, 3);
        let mut e1 = Encoder::new(10, 77);
        let mut e2 = Encoder::new(10, 77);
        for _ in 0..20 {
            assert_eq!(e1.encode(&b, Header::SOURCE), e2.encode(&b, Header::SOURCE));
        }
    }

    #[test]
    fn network_code_with_zero_next_payload_keeps_current() {
        let cur = block(4, 3, 64, 5);
        let nxt_block = SourceBlock::new(5, vec![BitVector::zeros(64); 3]).unwrap();
        let p = CodedPacket::from_coefficients(&cur, BitVector::unit(3, 1), Header::SOURCE);
        let q = CodedPacket::from_coefficients(&nxt_block, BitVector::unit(3, 2), Header::SOURCE);
        let nc = network_code(&p, &q).unwrap();
        assert_eq!(nc.payload, p.payload);
        assert!(nc.is_network_coded());
        assert_eq!(nc.header, Header::SOURCE);
    }

    #[test]
    fn network_code_rejects_mismatches() {
        let cur = block(0, 3, 64, 5);
        let wrong = block(3, 3, 64, 6);
        let short = block(1, 3, 32, 6);
        let p = CodedPacket::from_coefficients(&cur, BitVector::unit(3, 0), Header::SOURCE);
        let q = CodedPacket::from_coefficients(&wrong, BitVector::unit(3, 0), Header::SOURCE);
        let r = CodedPacket::from_coefficients(&short, BitVector::unit(3, 0), Header::SOURCE);
        assert!(matches!(network_code(&p, &q), Err(Gf2Error::BlockMismatch { .. })));
        assert!(matches!(network_code(&p, &r), Err(Gf2Error::LengthMismatch { .. })));
    }

    #[test]
    fn superpose_table_rows() {
        let cur = block(0, 4, 64, 7);
        let nxt = block(1, 4, 64, 8);
        let mut shared = Encoder::new(4, 99);
        let mut relay_enc = Encoder::new(4, 99);
        let from_s = shared.encode(&cur, Header::SOURCE);
        let from_r = relay_enc.encode(&cur, Header::RELAY);
        assert_eq!(from_s.current, from_r.current);
        let next_pkt = CodedPacket::from_coefficients(&nxt, BitVector::unit(4, 3), Header::SOURCE);
        let nc = network_code(&from_s, &next_pkt).unwrap();

        let only_r = superpose(None, Some(&from_r)).unwrap();
        assert_eq!(only_r.header, Header::RELAY);
        assert!(only_r.is_pure_current());

        let only_s = superpose(Some(&nc), None).unwrap();
        assert!(only_s.is_network_coded());
        assert_eq!(only_s.header, Header::SOURCE);

        let both = superpose(Some(&nc), Some(&from_r)).unwrap();
        assert!(both.is_pure_next());
        assert_eq!(both.payload, next_pkt.payload);
        assert_eq!(both.header, Header { source: true, relay: true });

        assert!(superpose(None, None).is_none());
    }

    #[test]
    fn strip_known_recovers_next_packet() {
        let cur = block(2, 6, 128, 10);
        let nxt = block(3, 6, 128, 11);
        let mut enc = Encoder::new(6, 5);
        for _ in 0..50 {
            let p = enc.encode(&cur, Header::SOURCE);
            let q = enc.encode(&nxt, Header::SOURCE);
            let nc = network_code(&p, &q).unwrap();
            let stripped = strip_known(&nc, &cur).unwrap();
            assert_eq!(stripped.payload, q.payload);
            assert_eq!(stripped.next, q.current);
            assert!(stripped.is_pure_next());
            assert_eq!(stripped.advance().unwrap().current, q.current);
        }
    }

    #[test]
    fn strip_known_with_zero_current_leaves_payload() {
        let cur = block(0, 3, 64, 1);
        let nxt = block(1, 3, 64, 2);
        let p = CodedPacket::from_coefficients(&cur, BitVector::zeros(3), Header::SOURCE);
        let q = CodedPacket::from_coefficients(&nxt, BitVector::unit(3, 0), Header::SOURCE);
        let nc = network_code(&p, &q).unwrap();
        assert_eq!(strip_known(&nc, &cur).unwrap().payload, nc.payload);
    }

    #[test]
    fn strip_known_rejects_wrong_block() {
        let cur = block(0, 3, 64, 1);
        let nxt = block(1, 3, 64, 2);
        let p = CodedPacket::from_coefficients(&cur, BitVector::unit(3, 1), Header::SOURCE);
        let q = CodedPacket::from_coefficients(&nxt, BitVector::unit(3, 0), Header::SOURCE);
        let nc = network_code(&p, &q).unwrap();
        assert!(matches!(strip_known(&nc, &nxt), Err(Gf2Error::BlockMismatch { .. })));
        assert!(matches!(strip_known(&p, &cur), Err(Gf2Error::NotNetworkCoded)));
    }
}
