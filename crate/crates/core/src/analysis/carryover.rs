use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::special::{binomial_vec, RankTable};
use super::{
    netcoded_joint, AnalysisError, CarryoverState, ErasureNetworkParams, NetcodedJoint, TransmissionPdf, Truncation,
};

/// Law of the count of successes over two stretches of Bernoulli trials.
fn two_stage_counts(first: usize, p_first: f64, second: usize, p_second: f64) -> Vec<f64> {
    let a = binomial_vec(first, p_first);
    let b = binomial_vec(second, p_second);
    let mut out = vec![0.0; first + second + 1];
    for (s, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (t, y) in b.iter().enumerate() {
            out[s + t] += x * y;
        }
    }
    out
}

/// Probability that the idle relay, holding `held` next-block packets when
/// the block started, can decode the current block by the time D does at
/// slot `m`, given phase one ended at `j`. It hears the source for `j`
/// slots and then collects pure current-block packets at the rate
/// `1 - Pe_eq2` for `m - j` slots.
pub fn gamma_prob(j: usize, m: usize, held: usize, params: &ErasureNetworkParams) -> f64 {
    let eq = params.equivalent_erasures();
    gamma_with_erasures(params.k, j, m, held, params.pe_sr, eq.relay_current)
}

/// [`gamma_prob`] with the two per-slot erasure probabilities given
/// directly.
pub fn gamma_with_erasures(k: usize, j: usize, m: usize, held: usize, pe_phase_one: f64, pe_phase_two: f64) -> f64 {
    assert!(m >= j, "D cannot decode before phase one ends");
    let counts = two_stage_counts(j, 1.0 - pe_phase_one, m - j, 1.0 - pe_phase_two);
    let rank = RankTable::new(k, m + held + 1);
    let g: f64 = counts.iter().enumerate().map(|(n, c)| c * rank.cdf(n + held)).sum();
    g.clamp(0.0, 1.0)
}

/// The same double sum weighted by the decode-time pmf `f_held(s + t)`
/// instead of the cumulative full-rank probability. Kept for comparison;
/// the chain sampler uses [`gamma_prob`].
pub fn gamma_prob_literal(j: usize, m: usize, held: usize, params: &ErasureNetworkParams) -> f64 {
    assert!(m >= j, "D cannot decode before phase one ends");
    let eq = params.equivalent_erasures();
    let counts = two_stage_counts(j, 1.0 - params.pe_sr, m - j, 1.0 - eq.relay_current);
    let g: f64 = counts
        .iter()
        .enumerate()
        .map(|(n, c)| c * super::aux_fnp(params.k, held, n))
        .sum();
    g.clamp(0.0, 1.0)
}

/// Distributions of the next-block packet counts carried into the next
/// block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarryoverPmfs {
    /// The successful relay was transmitting the whole of phase two.
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
    pub n3: Vec<f64>,
}

/// Over the `m - j` phase-two slots D keeps every slot where the source's
/// packet got through; the idle relay keeps the same if it decoded the
/// current block, otherwise only slots where both constituents arrived.
pub fn carryover_pmfs(j: usize, m: usize, idle_decoded: bool, params: &ErasureNetworkParams) -> CarryoverPmfs {
    assert!(m >= j, "D cannot decode before phase one ends");
    let slots = m - j;
    let eq = params.equivalent_erasures();
    let idle_success = if idle_decoded {
        1.0 - params.pe_sr
    } else {
        1.0 - eq.relay_next
    };
    CarryoverPmfs {
        n1: vec![1.0],
        n2: binomial_vec(slots, idle_success),
        n3: binomial_vec(slots, 1.0 - params.pe_sd),
    }
}

/// One block of a sampled chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainBlock {
    pub carryover: CarryoverState,
    pub transmissions: usize,
    /// `None` when D decoded before either relay.
    pub phase_one: Option<usize>,
    pub idle_decoded: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockChain {
    pub blocks: Vec<ChainBlock>,
    pub burn_in: usize,
    /// Mixture of the per-block pdfs after burn-in.
    pub steady_pdf: TransmissionPdf,
}

impl BlockChain {
    pub fn steady_blocks(&self) -> &[ChainBlock] {
        &self.blocks[self.burn_in.min(self.blocks.len())..]
    }
}

enum Event {
    DestinationFirst(usize),
    PhaseTwo { j: usize, relay1_won: bool, m: usize },
}

fn sample_event(joint: &NetcodedJoint, rng: &mut ChaCha8Rng) -> Event {
    let total: f64 = joint.destination_first.iter().sum::<f64>()
        + joint
            .branches
            .iter()
            .map(|b| (b.relay1_weight + b.relay2_weight) * b.decode_at.iter().sum::<f64>())
            .sum::<f64>();
    let mut u = rng.random::<f64>() * total;
    for (m, p) in joint.destination_first.iter().enumerate() {
        if u < *p {
            return Event::DestinationFirst(m);
        }
        u -= p;
    }
    let mut last = None;
    for b in &joint.branches {
        for (relay1_won, w) in [(true, b.relay1_weight), (false, b.relay2_weight)] {
            for (i, h) in b.decode_at.iter().enumerate() {
                let p = w * h;
                if p > 0.0 {
                    last = Some((b.j, relay1_won, b.j + 1 + i));
                }
                if u < p {
                    return Event::PhaseTwo {
                        j: b.j,
                        relay1_won,
                        m: b.j + 1 + i,
                    };
                }
                u -= p;
            }
        }
    }
    // rounding left a sliver of mass past the last event
    match last {
        Some((j, relay1_won, m)) => Event::PhaseTwo { j, relay1_won, m },
        None => Event::DestinationFirst(joint.destination_first.len() - 1),
    }
}

fn draw_binomial(rng: &mut ChaCha8Rng, n: usize, p: f64) -> usize {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n as u64, p).expect("valid binomial").sample(rng) as usize
}

/// Runs the block chain of the network-coded scheme: each block's
/// `(winner, j, M)` comes from the closed-form joint law for its
/// carryover, the idle relay's decode status from [`gamma_prob`], and the
/// next carryover from [`carryover_pmfs`]. The winner always carries
/// nothing and is relabelled R1.
pub fn sample_block_chain(
    params: &ErasureNetworkParams,
    blocks: usize,
    burn_in: usize,
    seed: u64,
    trunc: &Truncation,
) -> Result<BlockChain, AnalysisError> {
    params.validate()?;
    if blocks <= burn_in {
        return Err(AnalysisError::Domain(format!(
            "{blocks} blocks leave nothing after a burn-in of {burn_in}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache: HashMap<CarryoverState, NetcodedJoint> = HashMap::new();
    let mut carry = CarryoverState::ZERO;
    let mut out = Vec::with_capacity(blocks);
    let mut steady = Vec::new();
    let eq = params.equivalent_erasures();
    for b in 0..blocks {
        if !cache.contains_key(&carry) {
            cache.insert(carry, netcoded_joint(params, carry, trunc)?);
        }
        let joint = &cache[&carry];
        if b >= burn_in {
            steady.push(joint.pdf.clone());
        }
        let block = match sample_event(joint, &mut rng) {
            Event::DestinationFirst(m) => {
                let block = ChainBlock {
                    carryover: carry,
                    transmissions: m,
                    phase_one: None,
                    idle_decoded: None,
                };
                carry = CarryoverState::ZERO;
                block
            }
            Event::PhaseTwo { j, relay1_won, m } => {
                let idle_held = if relay1_won { carry.n2 } else { carry.n1 };
                let gamma = gamma_prob(j, m, idle_held, params);
                let idle_decoded = rng.random::<f64>() < gamma;
                let idle_success = if idle_decoded {
                    1.0 - params.pe_sr
                } else {
                    1.0 - eq.relay_next
                };
                let block = ChainBlock {
                    carryover: carry,
                    transmissions: m,
                    phase_one: Some(j),
                    idle_decoded: Some(idle_decoded),
                };
                carry = CarryoverState {
                    n1: 0,
                    n2: draw_binomial(&mut rng, m - j, idle_success),
                    n3: draw_binomial(&mut rng, m - j, 1.0 - params.pe_sd),
                };
                block
            }
        };
        out.push(block);
    }
    let steady_pdf = TransmissionPdf::mixture(&steady).expect("at least one steady block");
    Ok(BlockChain {
        blocks: out,
        burn_in,
        steady_pdf,
    })
}
