//! Closed-form transmission-count distributions for direct transmission,
//! naive two-phase relaying and the network-coded relay scheme over
//! erasure channels.

mod carryover;
mod pdf;
mod special;

pub use carryover::{
    carryover_pmfs, gamma_prob, gamma_prob_literal, gamma_with_erasures, sample_block_chain, BlockChain, CarryoverPmfs, ChainBlock,
};
pub use pdf::{
    aux_g, decode_time_pdf, direct_pdf, naive_pdf, netcoded_joint, netcoded_pdf, relay_any_decode_pmf, tilde_q,
    NetcodedJoint, PhaseTwoBranch,
};
pub use special::{aux_fnp, binomial_pmf, decode_pmf, full_rank_cdf};


use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("tail mass {achieved:e} still above tolerance {tol:e} at support limit {support}")]
    Truncation { achieved: f64, tol: f64, support: usize },
    #[error("network-coded analysis is defined for exactly two relays, got {0}")]
    RelayCount(usize),
}

/// Link erasure probabilities and block geometry of the two-relay network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErasureNetworkParams {
    pub k: usize,
    pub pe_sd: f64,
    pub pe_sr: f64,
    pub pe_rd: f64,
    pub pe_rr: f64,
    pub relays: usize,
}

impl Default for ErasureNetworkParams {
    fn default() -> Self {
        Self {
            k: 100,
            pe_sd: 0.4,
            pe_sr: 0.2,
            pe_rd: 0.2,
            pe_rr: 0.2,
            relays: 2,
        }
    }
}

impl ErasureNetworkParams {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.k == 0 {
            return Err(AnalysisError::Domain("block length K must be at least 1".into()));
        }
        if self.relays == 0 {
            return Err(AnalysisError::Domain("relay count must be at least 1".into()));
        }
        for (name, p) in [
            ("Pe_SD", self.pe_sd),
            ("Pe_SR", self.pe_sr),
            ("Pe_RD", self.pe_rd),
            ("Pe_RR", self.pe_rr),
        ] {
            special::check_probability(name, p)?;
        }
        Ok(())
    }

    pub fn equivalent_erasures(&self) -> EquivalentErasures {
        equivalent_erasures(self)
    }
}

/// Phase-two equivalent erasure probabilities of the network-coded scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalentErasures {
    /// Current-block packets at D: only the relay's packet survives.
    pub destination_current: f64,
    /// Current-block packets at the idle relay.
    pub relay_current: f64,
    /// Pure next-block packets at the idle relay (both constituents survive).
    pub relay_next: f64,
}

pub fn equivalent_erasures(p: &ErasureNetworkParams) -> EquivalentErasures {
    EquivalentErasures {
        destination_current: 1.0 - p.pe_sd * (1.0 - p.pe_rd),
        relay_current: 1.0 - p.pe_sr * (1.0 - p.pe_rr),
        relay_next: 1.0 - (1.0 - p.pe_sr) * (1.0 - p.pe_rr),
    }
}

/// Fraction of phase-two slots that leave D with something useful.
pub fn useful_phase_two_fraction(p: &ErasureNetworkParams) -> f64 {
    (1.0 - p.pe_rd) + (1.0 - p.pe_sd) * p.pe_rd
}

/// Next-block packets already held by R1, R2 and D when a block starts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CarryoverState {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl CarryoverState {
    pub const ZERO: CarryoverState = CarryoverState { n1: 0, n2: 0, n3: 0 };

    pub fn new(n1: usize, n2: usize, n3: usize) -> Self {
        Self { n1, n2, n3 }
    }

    /// Counts beyond K add nothing to decodability.
    pub fn capped(&self, k: usize) -> CarryoverState {
        CarryoverState {
            n1: self.n1.min(k),
            n2: self.n2.min(k),
            n3: self.n3.min(k),
        }
    }
}

/// Summation limits for the infinite sums over the transmission count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Truncation {
    pub tol: f64,
    /// Hard limit on the support; `None` means `100 K`.
    pub max_support: Option<usize>,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_support: None,
        }
    }
}

impl Truncation {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub(crate) fn limit(&self, k: usize) -> usize {
        self.max_support.unwrap_or(100 * k).max(1)
    }
}

/// Truncated distribution of the number of transmissions M.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmissionPdf {
    /// `values[M]` for `M = 0..=M_max`, already divided by `normalizer`.
    pub values: Vec<f64>,
    /// Probability beyond `M_max`.
    pub tail_mass: f64,
    /// Sum of the raw values plus the analytic tail before normalising.
    pub normalizer: f64,
}

impl TransmissionPdf {
    pub fn prob(&self, m: usize) -> f64 {
        self.values.get(m).copied().unwrap_or(0.0)
    }

    pub fn max_support(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    /// `P(M > m)` including the tail mass.
    pub fn survival(&self, m: usize) -> f64 {
        let inside: f64 = self.values.iter().skip(m + 1).sum();
        inside + self.tail_mass
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() + self.tail_mass
    }

    pub fn stats(&self) -> PdfStats {
        pdf_stats(self)
    }

    /// A point mass, mostly for tests.
    pub fn point_mass(m: usize) -> Self {
        let mut values = vec![0.0; m + 1];
        values[m] = 1.0;
        Self {
            values,
            tail_mass: 0.0,
            normalizer: 1.0,
        }
    }

    /// Equal-weight mixture of several pdfs.
    pub fn mixture(pdfs: &[TransmissionPdf]) -> Option<Self> {
        let len = pdfs.iter().map(|p| p.values.len()).max()?;
        let w = 1.0 / pdfs.len() as f64;
        let mut values = vec![0.0; len];
        let mut tail = 0.0;
        for p in pdfs {
            for (v, x) in values.iter_mut().zip(&p.values) {
                *v += w * x;
            }
            tail += w * p.tail_mass;
        }
        Some(Self {
            values,
            tail_mass: tail,
            normalizer: 1.0,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdfStats {
    pub mean: f64,
    pub variance: f64,
    pub tail_mass: f64,
}

/// Mean and variance over the truncated support.
pub fn pdf_stats(pdf: &TransmissionPdf) -> PdfStats {
    let mass: f64 = pdf.values.iter().sum();
    let mean = pdf.values.iter().enumerate().map(|(m, p)| m as f64 * p).sum::<f64>() / mass;
    let variance = pdf
        .values
        .iter()
        .enumerate()
        .map(|(m, p)| (m as f64 - mean).powi(2) * p)
        .sum::<f64>()
        / mass;
    PdfStats {
        mean,
        variance,
        tail_mass: pdf.tail_mass,
    }
}
