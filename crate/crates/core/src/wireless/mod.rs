//! Rayleigh-fading links. Approach 1 turns each packet transmission into
//! an outage event and reuses the erasure simulators; approach 2
//! ([`flow`]) tracks delivered bits under Shannon capacity with analogue
//! network coding in phase two.

mod flow;

pub use flow::{
    capacity, mac_corner_rates, simulate_approach2, solve_alpha_for_rate, solve_alpha_operating_point,
    Approach2Block, Approach2Config, AlphaPolicy, ConstantGains, GainSource, MacRates, RayleighGains,
};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::ErasureNetworkParams;
use crate::sim::{BufferTargets, ChannelModel, Link, Listener};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WirelessError {
    #[error("invalid wireless parameters: {0}")]
    Domain(String),
    #[error("current-block rate {target} unreachable; at most {max} at alpha = 1")]
    Infeasible { target: f64, max: f64 },
    #[error("block {block} still undecoded after {slots} slots")]
    Runaway { block: usize, slots: usize },
}

/// Node distances and the path-loss exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Topology {
    pub d_sd: f64,
    pub d_sr: f64,
    pub d_rd: f64,
    pub d_rr: f64,
    pub path_loss_exponent: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            d_sd: 20.0,
            d_sr: 10.3,
            d_rd: 10.3,
            d_rr: 5.0,
            path_loss_exponent: 3.0,
        }
    }
}

impl Topology {
    pub fn validate(&self) -> Result<(), WirelessError> {
        for (name, d) in [("d_SD", self.d_sd), ("d_SR", self.d_sr), ("d_RD", self.d_rd), ("d_RR", self.d_rr)] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(WirelessError::Domain(format!("{name} = {d} must be positive")));
            }
        }
        Ok(())
    }

    /// Path-loss rate `d^exponent` (proportionality constant 1).
    pub fn lambda(&self, link: Link) -> f64 {
        let d = match link {
            Link::SourceDestination => self.d_sd,
            Link::SourceRelay => self.d_sr,
            Link::RelayDestination => self.d_rd,
            Link::RelayRelay => self.d_rr,
        };
        d.powf(self.path_loss_exponent)
    }
}

/// Wireless link parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WirelessParams {
    pub lambda_sd: f64,
    pub lambda_sr: f64,
    pub lambda_rd: f64,
    pub lambda_rr: f64,
    /// Transmit-to-noise power ratio, linear.
    pub snr: f64,
    pub payload_bits: usize,
    pub header_bits: usize,
    /// Channel uses per packet.
    pub channel_uses: usize,
    /// SNR gap as a linear factor in (0, 1].
    pub gamma_gap: f64,
}

impl Default for WirelessParams {
    fn default() -> Self {
        Self::from_topology(&Topology::default(), db_to_linear(45.0))
    }
}

impl WirelessParams {
    /// Paper geometry with `m = 1024`, `mu = 16` and `n = 2080`, so that
    /// `chi = 1`.
    pub fn from_topology(t: &Topology, snr: f64) -> Self {
        Self {
            lambda_sd: t.lambda(Link::SourceDestination),
            lambda_sr: t.lambda(Link::SourceRelay),
            lambda_rd: t.lambda(Link::RelayDestination),
            lambda_rr: t.lambda(Link::RelayRelay),
            snr,
            payload_bits: 1024,
            header_bits: 16,
            channel_uses: 2080,
            gamma_gap: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), WirelessError> {
        for (name, v) in [
            ("lambda_SD", self.lambda_sd),
            ("lambda_SR", self.lambda_sr),
            ("lambda_RD", self.lambda_rd),
            ("lambda_RR", self.lambda_rr),
            ("snr", self.snr),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(WirelessError::Domain(format!("{name} = {v} must be positive")));
            }
        }
        if self.channel_uses == 0 {
            return Err(WirelessError::Domain("codeword length n must be at least 1".into()));
        }
        if !(self.gamma_gap > 0.0 && self.gamma_gap <= 1.0) {
            return Err(WirelessError::Domain(format!(
                "SNR gap {} must lie in (0, 1]",
                self.gamma_gap
            )));
        }
        Ok(())
    }

    pub fn lambda(&self, link: Link) -> f64 {
        match link {
            Link::SourceDestination => self.lambda_sd,
            Link::SourceRelay => self.lambda_sr,
            Link::RelayDestination => self.lambda_rd,
            Link::RelayRelay => self.lambda_rr,
        }
    }

    /// `chi = 2^(2(m + mu)/n) - 1`: the SNR a packet needs to get through.
    pub fn chi(&self) -> f64 {
        chi(self.payload_bits, self.header_bits, self.channel_uses)
    }

    /// Equivalent erasure network for the point-to-point links.
    pub fn erasure_params(&self, k: usize) -> ErasureNetworkParams {
        let pe = |l| link_erasure_prob(self.lambda(l), self.snr, self.chi());
        ErasureNetworkParams {
            k,
            pe_sd: pe(Link::SourceDestination),
            pe_sr: pe(Link::SourceRelay),
            pe_rd: pe(Link::RelayDestination),
            pe_rr: pe(Link::RelayRelay),
            relays: 2,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn chi(payload_bits: usize, header_bits: usize, channel_uses: usize) -> f64 {
    (2.0 * (payload_bits + header_bits) as f64 / channel_uses as f64).exp2() - 1.0
}

/// `|h|^2` for a Rayleigh link with path-loss rate `lambda`.
pub fn sample_gain<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    Exp::new(lambda).expect("positive path-loss rate").sample(rng)
}

/// Outage probability `1 - exp(-lambda chi / snr)`.
pub fn link_erasure_prob(lambda: f64, snr: f64, chi: f64) -> f64 {
    -(-lambda * chi / snr).exp_m1()
}

/// The four successive-decoding erasure probabilities. In order (a) the
/// relay's packet is decoded first against the source's as noise; in
/// order (b) the source's is.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SicErasures {
    pub relay_first_relay: f64,
    pub relay_first_source: f64,
    pub source_first_source: f64,
    pub source_first_relay: f64,
    /// Probability that the relay link is the stronger one.
    pub relay_first: f64,
}

pub fn sic_erasures(lambda_source: f64, lambda_relay: f64, snr: f64, chi: f64) -> SicErasures {
    let interfered = |own: f64, other: f64| {
        let r = other / chi;
        1.0 - r / (own + r) * (-own * chi / snr).exp()
    };
    SicErasures {
        relay_first_relay: interfered(lambda_relay, lambda_source),
        relay_first_source: link_erasure_prob(lambda_source, snr, chi),
        source_first_source: interfered(lambda_source, lambda_relay),
        source_first_relay: link_erasure_prob(lambda_relay, snr, chi),
        relay_first: lambda_source / (lambda_source + lambda_relay),
    }
}

/// What a listener recovers from one simultaneous transmission.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub relay_first: bool,
    pub decoded_from_relay: bool,
    pub decoded_from_source: bool,
}

/// Successive decoding of one slot: the stronger packet is decoded with
/// the other as noise; the weaker one only after the stronger one was
/// recovered and cancelled.
pub fn sic_phase2_outcome<R: Rng + ?Sized>(
    lambda_source: f64,
    lambda_relay: f64,
    snr: f64,
    chi: f64,
    rng: &mut R,
) -> SlotOutcome {
    let gs = sample_gain(lambda_source, rng);
    let gr = sample_gain(lambda_relay, rng);
    sic_decode(gs, gr, snr, chi)
}

/// [`sic_phase2_outcome`] for given gains.
pub fn sic_decode(gain_source: f64, gain_relay: f64, snr: f64, chi: f64) -> SlotOutcome {
    let sinr = |own: f64, other: f64| own * snr / (other * snr + 1.0);
    if gain_relay >= gain_source {
        let r = sinr(gain_relay, gain_source) > chi;
        SlotOutcome {
            relay_first: true,
            decoded_from_relay: r,
            decoded_from_source: r && gain_source * snr > chi,
        }
    } else {
        let s = sinr(gain_source, gain_relay) > chi;
        SlotOutcome {
            relay_first: false,
            decoded_from_relay: s && gain_relay * snr > chi,
            decoded_from_source: s,
        }
    }
}

/// Table II: the relay's packet alone goes to buffer 1, the source's alone
/// to buffer 2; with both, D keeps the current-block packet and the
/// next-block packet left after cancelling it.
pub fn classify_phase2_wireless(outcome: SlotOutcome) -> BufferTargets {
    match (outcome.decoded_from_source, outcome.decoded_from_relay) {
        (false, true) => BufferTargets {
            current: true,
            ..BufferTargets::DISCARD
        },
        (true, false) => BufferTargets {
            mixed: true,
            ..BufferTargets::DISCARD
        },
        (true, true) => BufferTargets {
            current: true,
            next: true,
            mixed: false,
        },
        (false, false) => BufferTargets::DISCARD,
    }
}

/// Approach 1 as a [`ChannelModel`]: outage decides each packet, and
/// simultaneous phase-two transmissions go through successive decoding.
#[derive(Clone, Copy, Debug)]
pub struct FadingChannel {
    params: WirelessParams,
    chi: f64,
}

impl FadingChannel {
    pub fn new(params: WirelessParams) -> Result<Self, WirelessError> {
        params.validate()?;
        Ok(Self {
            params,
            chi: params.chi(),
        })
    }
}

impl ChannelModel for FadingChannel {
    fn delivered(&mut self, link: Link, rng: &mut ChaCha8Rng) -> bool {
        sample_gain(self.params.lambda(link), rng) * self.params.snr > self.chi
    }

    fn phase_two(&mut self, listener: Listener, rng: &mut ChaCha8Rng) -> BufferTargets {
        let (s, r) = listener.links();
        let o = sic_phase2_outcome(self.params.lambda(s), self.params.lambda(r), self.params.snr, self.chi, rng);
        classify_phase2_wireless(o)
    }
}
