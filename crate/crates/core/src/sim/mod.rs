//! Packet-level Monte Carlo simulation of direct transmission, naive
//! relaying and network-coded relaying.
//!
//! Every node runs a real GF(2) decoder. Link behaviour is pluggable
//! through [`ChannelModel`]: [`ErasureChannel`] draws independent erasures
//! per link, and the wireless module supplies a fading model.

mod batch;
mod protocol;

pub use batch::{run_batch, run_batch_with, BatchResult, STEADY_STATE_BATCHES};
pub use protocol::{run_trial, run_trial_with, simulate_direct, simulate_naive, simulate_netcoded};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalysisError, CarryoverState, ErasureNetworkParams};
use crate::gf2::Gf2Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("block {block} still undecoded after {slots} slots (trial {trial:?})")]
    Runaway { trial: Option<u64>, block: usize, slots: usize },
    #[error("block {block} decoded to the wrong data")]
    DecodeMismatch { block: usize },
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

impl From<AnalysisError> for SimError {
    fn from(e: AnalysisError) -> Self {
        SimError::Config(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Direct,
    Naive,
    Netcoded,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Direct, Scheme::Naive, Scheme::Netcoded];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Direct => "direct",
            Scheme::Naive => "naive",
            Scheme::Netcoded => "netcoded",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Scheme::Direct),
            "naive" => Ok(Scheme::Naive),
            "netcoded" => Ok(Scheme::Netcoded),
            other => Err(format!("unknown scheme '{other}' (direct, naive, netcoded)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ErasureNetworkParams,
    /// Payload size m in bits.
    pub payload_bits: usize,
    /// Size of each header field in bits.
    pub header_bits: usize,
    pub n_blocks: usize,
    /// Leading blocks of each trial left out of batch statistics.
    pub burn_in: usize,
    pub seed: u64,
    /// Carry real payloads and check every decoded block bit for bit.
    /// When off, packets carry coefficients only; the channel and coding
    /// randomness is the same either way.
    pub verify_payloads: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            params: ErasureNetworkParams::default(),
            payload_bits: 1024,
            header_bits: 16,
            n_blocks: 1,
            burn_in: 0,
            seed: 0,
            verify_payloads: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.params.validate()?;
        if self.n_blocks == 0 {
            return Err(SimError::Config("n_blocks must be at least 1".into()));
        }
        if self.burn_in >= self.n_blocks {
            return Err(SimError::Config(format!(
                "burn-in of {} leaves none of the {} blocks",
                self.burn_in, self.n_blocks
            )));
        }
        Ok(())
    }

    /// Hard limit on slots per block.
    pub fn runaway_cap(&self) -> usize {
        100 * self.params.k
    }
}

/// Point-to-point links of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Link {
    SourceDestination,
    SourceRelay,
    RelayDestination,
    RelayRelay,
}

/// A node listening to the source and the successful relay at once in
/// phase two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Listener {
    Destination,
    IdleRelay,
}

impl Listener {
    /// Links from the source and from the transmitting relay.
    pub fn links(&self) -> (Link, Link) {
        match self {
            Listener::Destination => (Link::SourceDestination, Link::RelayDestination),
            Listener::IdleRelay => (Link::SourceRelay, Link::RelayRelay),
        }
    }
}

/// Which buffers one phase-two slot feeds at a listener.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BufferTargets {
    /// Pure current-block packet (the relay's).
    pub current: bool,
    /// Network-coded packet (the source's).
    pub mixed: bool,
    /// Pure next-block packet.
    pub next: bool,
}

impl BufferTargets {
    pub const DISCARD: BufferTargets = BufferTargets {
        current: false,
        mixed: false,
        next: false,
    };

    pub fn is_discard(&self) -> bool {
        !(self.current || self.mixed || self.next)
    }
}

/// Buffer assignment for one phase-two slot over erasure links. When both
/// packets survive they arrive superposed and the shared current-block
/// code cancels, leaving a pure next-block packet.
pub fn classify_phase2(source_erased: bool, relay_erased: bool) -> BufferTargets {
    match (source_erased, relay_erased) {
        (true, false) => BufferTargets {
            current: true,
            ..BufferTargets::DISCARD
        },
        (false, true) => BufferTargets {
            mixed: true,
            ..BufferTargets::DISCARD
        },
        (false, false) => BufferTargets {
            next: true,
            ..BufferTargets::DISCARD
        },
        (true, true) => BufferTargets::DISCARD,
    }
}

/// Per-slot link behaviour.
pub trait ChannelModel {
    /// Whether a lone transmission on `link` gets through this slot.
    fn delivered(&mut self, link: Link, rng: &mut ChaCha8Rng) -> bool;

    /// What `listener` can store when the source and the successful relay
    /// transmit simultaneously.
    fn phase_two(&mut self, listener: Listener, rng: &mut ChaCha8Rng) -> BufferTargets;
}

/// Independent erasures with the probabilities of [`ErasureNetworkParams`].
#[derive(Clone, Copy, Debug)]
pub struct ErasureChannel {
    params: ErasureNetworkParams,
}

impl ErasureChannel {
    pub fn new(params: ErasureNetworkParams) -> Self {
        Self { params }
    }

    fn erasure(&self, link: Link) -> f64 {
        match link {
            Link::SourceDestination => self.params.pe_sd,
            Link::SourceRelay => self.params.pe_sr,
            Link::RelayDestination => self.params.pe_rd,
            Link::RelayRelay => self.params.pe_rr,
        }
    }
}

impl ChannelModel for ErasureChannel {
    fn delivered(&mut self, link: Link, rng: &mut ChaCha8Rng) -> bool {
        rng.random::<f64>() >= self.erasure(link)
    }

    fn phase_two(&mut self, listener: Listener, rng: &mut ChaCha8Rng) -> BufferTargets {
        let (s, r) = listener.links();
        let s_ok = self.delivered(s, rng);
        let r_ok = self.delivered(r, rng);
        classify_phase2(!s_ok, !r_ok)
    }
}

/// Phase-two slot counts at the destination, by buffer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferCounts {
    pub buffer1: usize,
    pub buffer2: usize,
    pub buffer3: usize,
    pub discarded: usize,
}

impl BufferCounts {
    fn record(&mut self, t: BufferTargets) {
        self.buffer1 += t.current as usize;
        self.buffer2 += t.mixed as usize;
        self.buffer3 += t.next as usize;
        self.discarded += t.is_discard() as usize;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    /// Transmissions until D decoded the block.
    pub transmissions: usize,
    /// Phase-one length; `None` when D decoded before any relay.
    pub phase_one: Option<usize>,
    /// Label of the relay that ended phase one (0 for R1, 1 for R2), before
    /// the winner is relabelled R1 for the next block.
    pub relay: Option<usize>,
    /// Whether the idle relay could decode the block when it ended.
    pub idle_decoded: Option<bool>,
    /// Next-block packets held by R1, R2 and D when this block started.
    pub carryover: CarryoverState,
    /// Ranks of the same packets.
    pub carryover_rank: CarryoverState,
    pub destination_buffers: BufferCounts,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub blocks: Vec<BlockRecord>,
}

impl TrialRecord {
    pub fn transmissions(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().map(|b| b.transmissions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn table_one() {
        assert_eq!(
            classify_phase2(true, false),
            BufferTargets {
                current: true,
                ..Default::default()
            }
        );
        assert_eq!(
            classify_phase2(false, true),
            BufferTargets {
                mixed: true,
                ..Default::default()
            }
        );
        assert_eq!(
            classify_phase2(false, false),
            BufferTargets {
                next: true,
                ..Default::default()
            }
        );
        assert!(classify_phase2(true, true).is_discard());
    }

    #[test]
    fn erasure_channel_frequencies() {
        let mut ch = ErasureChannel::new(ErasureNetworkParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| ch.delivered(Link::SourceDestination, &mut rng))
            .count() as f64;
        let p = hits / n as f64;
        let sd = (0.24f64 / n as f64).sqrt();
        assert!((p - 0.6).abs() < 4.0 * sd, "{p}");
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        let c = SimConfig {
            n_blocks: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = SimConfig {
            n_blocks: 5,
            burn_in: 5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn scheme_parse() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("relay".parse::<Scheme>().is_err());
    }
}
