//! Approach 2: fountain codes assumed to run at capacity, so a block needs
//! `K m` delivered bits. One slot is one packet duration of `n` channel
//! uses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sample_gain, WirelessError, WirelessParams};
use crate::sim::Link;

/// `0.5 log2(1 + gap * snr_eff)` bits per channel use.
pub fn capacity(gain_sq_snr: f64, gamma_gap: f64) -> f64 {
    0.5 * (gamma_gap * gain_sq_snr).ln_1p() / std::f64::consts::LN_2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacRates {
    pub current: f64,
    pub next: f64,
}

/// Corner of the phase-two multiple-access region where the next-block
/// stream is decoded first, with the current-block stream as noise, and
/// then cancelled. Gains are magnitudes and the source is assumed to
/// co-phase, so the current-block amplitude is `alpha |h_SD| + |h_RD|`.
pub fn mac_corner_rates(alpha: f64, h_sd: f64, h_rd: f64, snr: f64, gamma_gap: f64) -> MacRates {
    let beta_sq = (1.0 - alpha * alpha).max(0.0);
    let g = alpha * h_sd + h_rd;
    let cur = g * g * snr;
    MacRates {
        current: capacity(cur, gamma_gap),
        next: capacity(beta_sq * h_sd * h_sd * snr / (cur + 1.0), gamma_gap),
    }
}

/// Smallest `alpha` whose corner current-block rate reaches `target`.
pub fn solve_alpha_for_rate(target: f64, h_sd: f64, h_rd: f64, snr: f64, gamma_gap: f64) -> Result<f64, WirelessError> {
    let rate = |a: f64| mac_corner_rates(a, h_sd, h_rd, snr, gamma_gap).current;
    if rate(0.0) >= target {
        return Ok(0.0);
    }
    let max = rate(1.0);
    if max < target * (1.0 - 1e-12) {
        return Err(WirelessError::Infeasible { target, max });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Keeps the current-block rate at what the relay alone would achieve.
/// The current-block amplitude grows with `alpha`, so this is `alpha = 0`
/// whenever the gains are co-phased.
pub fn solve_alpha_operating_point(h_sd: f64, h_rd: f64, snr: f64, gamma_gap: f64) -> Result<f64, WirelessError> {
    solve_alpha_for_rate(capacity(h_rd * h_rd * snr, gamma_gap), h_sd, h_rd, snr, gamma_gap)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "policy", content = "value")]
pub enum AlphaPolicy {
    Fixed(f64),
    /// Per-slot [`solve_alpha_operating_point`].
    Auto,
}

/// Source of `|h|^2` per link and slot.
pub trait GainSource {
    fn gain(&mut self, link: Link, rng: &mut ChaCha8Rng) -> f64;
}

/// Independent Rayleigh fading per slot.
#[derive(Clone, Copy, Debug)]
pub struct RayleighGains(pub WirelessParams);

impl GainSource for RayleighGains {
    fn gain(&mut self, link: Link, rng: &mut ChaCha8Rng) -> f64 {
        sample_gain(self.0.lambda(link), rng)
    }
}

/// Fixed `|h|^2` per link, for checking the bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantGains {
    pub sd: f64,
    pub sr: f64,
    pub rd: f64,
    pub rr: f64,
}

impl ConstantGains {
    pub fn uniform(g: f64) -> Self {
        Self {
            sd: g,
            sr: g,
            rd: g,
            rr: g,
        }
    }
}

impl GainSource for ConstantGains {
    fn gain(&mut self, link: Link, _rng: &mut ChaCha8Rng) -> f64 {
        match link {
            Link::SourceDestination => self.sd,
            Link::SourceRelay => self.sr,
            Link::RelayDestination => self.rd,
            Link::RelayRelay => self.rr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Approach2Config {
    pub wireless: WirelessParams,
    pub k: usize,
    pub n_blocks: usize,
    pub alpha: AlphaPolicy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Approach2Block {
    pub slots: usize,
    /// `None` when D collected the block before either relay.
    pub phase_one: Option<usize>,
    /// Next-block bits held by D and by the relay that was idle, when the
    /// block started.
    pub carried_destination_bits: f64,
    pub carried_relay_bits: f64,
}

/// Flow-level run of the network-coded scheme. Phase one credits each
/// receiver with its point-to-point capacity; phase two credits D with
/// the corner current-block rate and both D and the idle relay with the
/// next-block rate of their own multiple-access channel. Next-block
/// credit is capped at `K m` and carried into the next block; the relay
/// that forwarded carries nothing.
pub fn simulate_approach2<G: GainSource>(
    cfg: &Approach2Config,
    gains: &mut G,
    seed: u64,
) -> Result<Vec<Approach2Block>, WirelessError> {
    let w = &cfg.wireless;
    w.validate()?;
    if cfg.k == 0 || cfg.n_blocks == 0 {
        return Err(WirelessError::Domain("K and the block count must be at least 1".into()));
    }
    if let AlphaPolicy::Fixed(a) = cfg.alpha {
        if !(0.0..=1.0).contains(&a) {
            return Err(WirelessError::Domain(format!("alpha = {a} outside [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let need = (cfg.k * w.payload_bits) as f64;
    let n = w.channel_uses as f64;
    let cap = 100 * cfg.k;
    let bits = |g: f64| capacity(g * w.snr, w.gamma_gap) * n;

    let mut d_held = 0.0;
    let mut relay_held = [0.0, 0.0];
    let mut out = Vec::with_capacity(cfg.n_blocks);
    for block in 0..cfg.n_blocks {
        let mut rec = Approach2Block {
            slots: 0,
            phase_one: None,
            carried_destination_bits: d_held,
            carried_relay_bits: relay_held[1],
        };
        let mut d = d_held;
        let mut relays = relay_held;
        let mut slots = 0;
        let mut winner = None;
        loop {
            if d >= need {
                break;
            }
            if let Some(r) = relays.iter().rposition(|b| *b >= need) {
                winner = Some(r);
                break;
            }
            slots += 1;
            if slots > cap {
                return Err(WirelessError::Runaway { block, slots: cap });
            }
            for r in relays.iter_mut() {
                *r += bits(gains.gain(Link::SourceRelay, &mut rng));
            }
            d += bits(gains.gain(Link::SourceDestination, &mut rng));
        }
        d_held = 0.0;
        relay_held = [0.0, 0.0];
        if winner.is_some() {
            rec.phase_one = Some(slots);
            let mut d_next = 0.0;
            let mut idle_next = 0.0;
            while d < need {
                slots += 1;
                if slots > cap {
                    return Err(WirelessError::Runaway { block, slots: cap });
                }
                let h_sd = gains.gain(Link::SourceDestination, &mut rng).sqrt();
                let h_rd = gains.gain(Link::RelayDestination, &mut rng).sqrt();
                let h_sr = gains.gain(Link::SourceRelay, &mut rng).sqrt();
                let h_rr = gains.gain(Link::RelayRelay, &mut rng).sqrt();
                let alpha = match cfg.alpha {
                    AlphaPolicy::Fixed(a) => a,
                    AlphaPolicy::Auto => solve_alpha_operating_point(h_sd, h_rd, w.snr, w.gamma_gap)?,
                };
                let at_d = mac_corner_rates(alpha, h_sd, h_rd, w.snr, w.gamma_gap);
                let at_idle = mac_corner_rates(alpha, h_sr, h_rr, w.snr, w.gamma_gap);
                d += at_d.current * n;
                d_next += at_d.next * n;
                idle_next += at_idle.next * n;
            }
            d_held = d_next.min(need);
            // the forwarding relay becomes R1 and holds nothing
            relay_held = [0.0, idle_next.min(need)];
        }
        rec.slots = slots;
        out.push(rec);
    }
    Ok(out)
}
