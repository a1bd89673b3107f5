use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    BlockRecord, BufferCounts, BufferTargets, ChannelModel, ErasureChannel, Link, Listener, Scheme, SimConfig,
    SimError, TrialRecord,
};
use crate::analysis::CarryoverState;
use crate::gf2::{network_code, strip_known, superpose, BitVector, CodedPacket, DecoderState, Encoder, Header, SourceBlock};

/// Decoders and Table I buffers of one receiving node.
#[derive(Clone, Debug)]
struct Node {
    current: DecoderState,
    next: DecoderState,
    buffer1: Vec<CodedPacket>,
    buffer2: Vec<CodedPacket>,
    buffer3: Vec<CodedPacket>,
}

impl Node {
    fn fresh(k: usize, bits: usize) -> Self {
        Self::carrying(DecoderState::new(k, bits))
    }

    /// Starts a block already holding the packets collected for it.
    fn carrying(held: DecoderState) -> Self {
        let next = DecoderState::new(held.k(), held.payload_bits());
        Self {
            current: held,
            next,
            buffer1: Vec::new(),
            buffer2: Vec::new(),
            buffer3: Vec::new(),
        }
    }

    fn store(&mut self, t: BufferTargets, from_source: &CodedPacket, from_relay: &CodedPacket) -> Result<(), SimError> {
        if t.current {
            self.current.absorb_packet(from_relay)?;
            self.buffer1.push(from_relay.clone());
        }
        if t.mixed {
            self.buffer2.push(from_source.clone());
        }
        if t.next {
            let p = superpose(Some(from_source), Some(from_relay)).expect("both constituents present");
            let coeffs = p.next.as_ref().expect("superposition keeps the next-block code");
            self.next.absorb(coeffs, &p.payload);
            self.buffer3.push(p);
        }
        Ok(())
    }

    /// Strips the decoded block out of every mixed packet and hands the
    /// results to the next-block decoder.
    fn unlock_mixed(&mut self, decoded: &SourceBlock) -> Result<(), SimError> {
        for mixed in self.buffer2.drain(..) {
            let pure = strip_known(&mixed, decoded)?;
            self.next.absorb(pure.next.as_ref().expect("stripped packet is pure next"), &pure.payload);
        }
        Ok(())
    }
}

struct Trial<'a, C: ChannelModel> {
    cfg: &'a SimConfig,
    channel: &'a mut C,
    rng: ChaCha8Rng,
    data_rng: ChaCha8Rng,
    bits: usize,
    trial: u64,
}

enum Phase1 {
    Destination(usize),
    Relay { j: usize, winner: usize },
}

impl<'a, C: ChannelModel> Trial<'a, C> {
    fn new(cfg: &'a SimConfig, channel: &'a mut C, seed: u64) -> Self {
        let mut data_rng = ChaCha8Rng::seed_from_u64(seed);
        data_rng.set_stream(1);
        Self {
            cfg,
            channel,
            rng: ChaCha8Rng::seed_from_u64(seed),
            data_rng,
            bits: if cfg.verify_payloads { cfg.payload_bits } else { 0 },
            trial: seed,
        }
    }

    fn k(&self) -> usize {
        self.cfg.params.k
    }

    fn source_block(&mut self, index: usize) -> SourceBlock {
        if self.bits == 0 {
            SourceBlock::new(index as u64, vec![BitVector::zeros(0); self.k()]).expect("K >= 1")
        } else {
            SourceBlock::random(index as u64, self.k(), self.bits, &mut self.data_rng)
        }
    }

    fn tick(&self, slots: &mut usize, block: usize) -> Result<(), SimError> {
        *slots += 1;
        if *slots > self.cfg.runaway_cap() {
            return Err(SimError::Runaway {
                trial: Some(self.trial),
                block,
                slots: *slots - 1,
            });
        }
        Ok(())
    }

    fn verify(&self, decoder: &DecoderState, block: &SourceBlock, index: usize) -> Result<SourceBlock, SimError> {
        let decoded = decoder
            .decode_block(block.index())
            .ok_or(SimError::DecodeMismatch { block: index })?;
        if self.bits > 0 && decoded != *block {
            return Err(SimError::DecodeMismatch { block: index });
        }
        Ok(decoded)
    }

    fn direct_block(&mut self, index: usize) -> Result<BlockRecord, SimError> {
        let block = self.source_block(index);
        let mut d = DecoderState::new(self.k(), self.bits);
        let mut enc = Encoder::new(self.k(), self.rng.random());
        let mut slots = 0;
        while !d.is_decodable() {
            self.tick(&mut slots, index)?;
            let p = enc.encode(&block, Header::SOURCE);
            if self.channel.delivered(Link::SourceDestination, &mut self.rng) {
                d.absorb_packet(&p)?;
            }
        }
        self.verify(&d, &block, index)?;
        Ok(plain_record(slots, None))
    }

    /// Source broadcast until D or some relay can decode. A simultaneous
    /// relay decode goes to the highest label; D decoding in the same slot
    /// as a relay ends the block.
    fn phase_one(
        &mut self,
        block: &SourceBlock,
        index: usize,
        d: &mut DecoderState,
        relays: &mut [&mut DecoderState],
    ) -> Result<Phase1, SimError> {
        let mut slots = 0;
        let mut enc = Encoder::new(self.k(), self.rng.random());
        loop {
            if d.is_decodable() {
                return Ok(Phase1::Destination(slots));
            }
            if let Some(winner) = relays.iter().rposition(|r| r.is_decodable()) {
                return Ok(Phase1::Relay { j: slots, winner });
            }
            self.tick(&mut slots, index)?;
            let p = enc.encode(block, Header::SOURCE);
            for r in relays.iter_mut() {
                if self.channel.delivered(Link::SourceRelay, &mut self.rng) {
                    r.absorb_packet(&p)?;
                }
            }
            if self.channel.delivered(Link::SourceDestination, &mut self.rng) {
                d.absorb_packet(&p)?;
            }
        }
    }

    fn naive_block(&mut self, index: usize) -> Result<BlockRecord, SimError> {
        let block = self.source_block(index);
        let (k, bits) = (self.k(), self.bits);
        let mut d = DecoderState::new(k, bits);
        let mut relays: Vec<DecoderState> = (0..self.cfg.params.relays).map(|_| DecoderState::new(k, bits)).collect();
        let mut refs: Vec<&mut DecoderState> = relays.iter_mut().collect();
        let (mut slots, phase_one, relay) = match self.phase_one(&block, index, &mut d, &mut refs)? {
            Phase1::Destination(m) => (m, None, None),
            Phase1::Relay { j, winner } => (j, Some(j), Some(winner)),
        };
        if relay.is_some() {
            let mut enc = Encoder::new(k, self.rng.random());
            while !d.is_decodable() {
                self.tick(&mut slots, index)?;
                let p = enc.encode(&block, Header::RELAY);
                if self.channel.delivered(Link::RelayDestination, &mut self.rng) {
                    d.absorb_packet(&p)?;
                }
            }
        }
        self.verify(&d, &block, index)?;
        let mut rec = plain_record(slots, phase_one);
        rec.relay = relay;
        Ok(rec)
    }

    fn netcoded(&mut self) -> Result<Vec<BlockRecord>, SimError> {
        let (k, bits) = (self.k(), self.bits);
        let mut d = Node::fresh(k, bits);
        let mut relays = [Node::fresh(k, bits), Node::fresh(k, bits)];
        let mut out = Vec::with_capacity(self.cfg.n_blocks);
        let mut block = self.source_block(0);
        for index in 0..self.cfg.n_blocks {
            let next_block = self.source_block(index + 1);
            let carryover = CarryoverState::new(
                relays[0].current.absorbed(),
                relays[1].current.absorbed(),
                d.current.absorbed(),
            );
            let carryover_rank =
                CarryoverState::new(relays[0].current.rank(), relays[1].current.rank(), d.current.rank());
            let [r1, r2] = &mut relays;
            let first = self.phase_one(&block, index, &mut d.current, &mut [&mut r1.current, &mut r2.current])?;
            let mut rec = BlockRecord {
                carryover,
                carryover_rank,
                ..plain_record(0, None)
            };
            match first {
                Phase1::Destination(m) => {
                    self.verify(&d.current, &block, index)?;
                    rec.transmissions = m;
                    d = Node::fresh(k, bits);
                    relays = [Node::fresh(k, bits), Node::fresh(k, bits)];
                }
                Phase1::Relay { j, winner } => {
                    let idle = 1 - winner;
                    let mut slots = j;
                    let shared = self.rng.random();
                    let mut enc_source = Encoder::new(k, shared);
                    let mut enc_relay = Encoder::new(k, shared);
                    let mut enc_next = Encoder::new(k, self.rng.random());
                    let mut counts = BufferCounts::default();
                    while !d.current.is_decodable() {
                        self.tick(&mut slots, index)?;
                        let from_relay = enc_relay.encode(&block, Header::RELAY);
                        let current = enc_source.encode(&block, Header::SOURCE);
                        let next = enc_next.encode(&next_block, Header::SOURCE);
                        let from_source = network_code(&current, &next)?;
                        let td = self.channel.phase_two(Listener::Destination, &mut self.rng);
                        counts.record(td);
                        d.store(td, &from_source, &from_relay)?;
                        let ti = self.channel.phase_two(Listener::IdleRelay, &mut self.rng);
                        relays[idle].store(ti, &from_source, &from_relay)?;
                    }
                    let decoded = self.verify(&d.current, &block, index)?;
                    d.unlock_mixed(&decoded)?;
                    let idle_decoded = relays[idle].current.is_decodable();
                    if idle_decoded {
                        let decoded = self.verify(&relays[idle].current, &block, index)?;
                        relays[idle].unlock_mixed(&decoded)?;
                    }
                    rec.transmissions = slots;
                    rec.phase_one = Some(j);
                    rec.relay = Some(winner);
                    rec.idle_decoded = Some(idle_decoded);
                    rec.destination_buffers = counts;
                    // the winner carries nothing and becomes R1
                    let idle_node = std::mem::replace(&mut relays[idle], Node::fresh(k, bits));
                    d = Node::carrying(std::mem::replace(&mut d.next, DecoderState::new(k, bits)));
                    relays = [Node::fresh(k, bits), Node::carrying(idle_node.next)];
                }
            }
            out.push(rec);
            block = next_block;
        }
        Ok(out)
    }
}

fn plain_record(transmissions: usize, phase_one: Option<usize>) -> BlockRecord {
    BlockRecord {
        transmissions,
        phase_one,
        relay: None,
        idle_decoded: None,
        carryover: CarryoverState::ZERO,
        carryover_rank: CarryoverState::ZERO,
        destination_buffers: BufferCounts::default(),
    }
}

/// Runs one trial of `cfg.n_blocks` blocks over an arbitrary channel.
pub fn run_trial_with<C: ChannelModel>(
    scheme: Scheme,
    cfg: &SimConfig,
    channel: &mut C,
    seed: u64,
) -> Result<TrialRecord, SimError> {
    cfg.validate()?;
    if scheme == Scheme::Netcoded && cfg.params.relays != 2 {
        return Err(SimError::Config(format!(
            "the network-coded scheme needs exactly two relays, got {}",
            cfg.params.relays
        )));
    }
    let mut t = Trial::new(cfg, channel, seed);
    let blocks = match scheme {
        Scheme::Direct => (0..cfg.n_blocks).map(|i| t.direct_block(i)).collect::<Result<_, _>>()?,
        Scheme::Naive => (0..cfg.n_blocks).map(|i| t.naive_block(i)).collect::<Result<_, _>>()?,
        Scheme::Netcoded => t.netcoded()?,
    };
    Ok(TrialRecord { seed, blocks })
}

/// One trial over erasure links.
pub fn run_trial(scheme: Scheme, cfg: &SimConfig, seed: u64) -> Result<TrialRecord, SimError> {
    run_trial_with(scheme, cfg, &mut ErasureChannel::new(cfg.params), seed)
}

/// Slots for D to decode one block sent straight from the source.
pub fn simulate_direct(cfg: &SimConfig, seed: u64) -> Result<usize, SimError> {
    let one = SimConfig {
        n_blocks: 1,
        burn_in: 0,
        ..*cfg
    };
    Ok(run_trial(Scheme::Direct, &one, seed)?.blocks[0].transmissions)
}

pub fn simulate_naive(cfg: &SimConfig, seed: u64) -> Result<TrialRecord, SimError> {
    run_trial(Scheme::Naive, cfg, seed)
}

pub fn simulate_netcoded(cfg: &SimConfig, seed: u64) -> Result<TrialRecord, SimError> {
    run_trial(Scheme::Netcoded, cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::ErasureNetworkParams;

    fn cfg(params: ErasureNetworkParams) -> SimConfig {
        SimConfig {
            params,
            ..Default::default()
        }
    }

    #[test]
    fn direct_k1_is_geometric() {
        let c = cfg(ErasureNetworkParams {
            k: 1,
            pe_sd: 0.0,
            ..Default::default()
        });
        let n = 40_000;
        let ones = (0..n).filter(|s| simulate_direct(&c, *s).unwrap() == 1).count() as f64 / n as f64;
        assert!((ones - 0.5).abs() < 0.01, "{ones}");
    }

    #[test]
    fn direct_runaway() {
        let c = cfg(ErasureNetworkParams {
            k: 10,
            pe_sd: 1.0,
            ..Default::default()
        });
        assert_eq!(
            simulate_direct(&c, 3),
            Err(SimError::Runaway {
                trial: Some(3),
                block: 0,
                slots: 1000
            })
        );
    }

    #[test]
    fn payload_verification_does_not_change_statistics() {
        let mut c = SimConfig {
            params: ErasureNetworkParams {
                k: 20,
                ..Default::default()
            },
            n_blocks: 6,
            ..Default::default()
        };
        for scheme in Scheme::ALL {
            let a = run_trial(scheme, &c, 11).unwrap();
            c.verify_payloads = true;
            let b = run_trial(scheme, &c, 11).unwrap();
            c.verify_payloads = false;
            assert_eq!(a, b, "{scheme:?}");
        }
    }

    #[test]
    fn netcoded_records_are_consistent() {
        let c = SimConfig {
            params: ErasureNetworkParams {
                k: 30,
                ..Default::default()
            },
            n_blocks: 40,
            verify_payloads: true,
            payload_bits: 64,
            ..Default::default()
        };
        let rec = simulate_netcoded(&c, 5).unwrap();
        assert_eq!(rec.blocks[0].carryover, CarryoverState::ZERO);
        for (b, next) in rec.blocks.iter().zip(rec.blocks.iter().skip(1)) {
            assert_eq!(next.carryover.n1, 0);
            let c = next.carryover;
            assert!(next.carryover_rank.n2 <= c.n2 && next.carryover_rank.n3 <= c.n3);
            match b.phase_one {
                Some(j) => {
                    assert!(j <= b.transmissions);
                    let slots = b.transmissions - j;
                    let bc = b.destination_buffers;
                    assert_eq!(bc.buffer1 + bc.buffer2 + bc.buffer3 + bc.discarded, slots);
                    // D ends with buffer 3 plus the unlocked buffer 2
                    assert_eq!(c.n3, bc.buffer2 + bc.buffer3);
                    assert!(c.n2 <= slots);
                }
                None => assert_eq!(c, CarryoverState::ZERO),
            }
        }
    }

    #[test]
    fn netcoded_needs_two_relays() {
        let c = cfg(ErasureNetworkParams {
            relays: 3,
            ..Default::default()
        });
        assert!(matches!(simulate_netcoded(&c, 0), Err(SimError::Config(_))));
        assert!(simulate_naive(&c, 0).is_ok());
    }

    #[test]
    fn naive_relay_only_path() {
        // everything flows through the relay
        let c = cfg(ErasureNetworkParams {
            k: 40,
            pe_sd: 1.0,
            pe_sr: 0.0,
            pe_rd: 0.0,
            ..Default::default()
        });
        let rec = simulate_naive(&c, 9).unwrap();
        let b = &rec.blocks[0];
        let j = b.phase_one.unwrap();
        assert!(j >= 40 && b.transmissions >= j + 40);
        // both relays hear everything, so the tie goes to R2
        assert_eq!(b.relay, Some(1));
    }

    #[test]
    fn deterministic() {
        let c = SimConfig {
            n_blocks: 5,
            ..Default::default()
        };
        for scheme in Scheme::ALL {
            assert_eq!(run_trial(scheme, &c, 77).unwrap(), run_trial(scheme, &c, 77).unwrap());
        }
    }
}
