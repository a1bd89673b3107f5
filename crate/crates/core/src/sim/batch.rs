use serde::{Deserialize, Serialize};

use super::protocol::run_trial_with;
use super::{ChannelModel, ErasureChannel, Scheme, SimConfig, SimError, TrialRecord};
use crate::stats::{batch_means, mean_ci, Histogram, Interval, Summary};

/// Batches used for standard errors of multi-block runs.
pub const STEADY_STATE_BATCHES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub scheme: Scheme,
    /// Transmissions per block over every trial, burn-in blocks excluded.
    pub histogram: Histogram,
    pub summary: Summary,
    /// Mean transmissions at each block index across trials.
    pub block_means: Vec<f64>,
    pub trials: Vec<TrialRecord>,
}

impl BatchResult {
    /// Post-burn-in transmissions, trial by trial.
    pub fn series(&self, burn_in: usize) -> Vec<f64> {
        self.trials
            .iter()
            .flat_map(|t| t.transmissions().skip(burn_in).map(|m| m as f64))
            .collect()
    }

    /// Samples treated as i.i.d. for interval estimates: per-block counts
    /// for single-block trials, batch means otherwise (blocks within a
    /// trial are correlated through carryover).
    fn estimate_sample(&self, burn_in: usize) -> Vec<f64> {
        let per_trial = self.trials.first().map_or(0, |t| t.blocks.len().saturating_sub(burn_in));
        let series = self.series(burn_in);
        if per_trial > 1 {
            batch_means(&series, STEADY_STATE_BATCHES).unwrap_or(series)
        } else {
            series
        }
    }

    pub fn mean_ci(&self, burn_in: usize, level: f64) -> Option<Interval> {
        mean_ci(&self.estimate_sample(burn_in), level)
    }

    pub fn std_error(&self, burn_in: usize) -> f64 {
        Summary::of(&self.estimate_sample(burn_in)).map_or(f64::NAN, |s| s.std_error())
    }
}

/// Runs `trials` independent trials over erasure links; trial `t` is
/// seeded with `base_seed + t`.
pub fn run_batch(scheme: Scheme, cfg: &SimConfig, trials: u64, base_seed: u64) -> Result<BatchResult, SimError> {
    run_batch_with(scheme, cfg, trials, base_seed, &mut ErasureChannel::new(cfg.params))
}

pub fn run_batch_with<C: ChannelModel>(
    scheme: Scheme,
    cfg: &SimConfig,
    trials: u64,
    base_seed: u64,
    channel: &mut C,
) -> Result<BatchResult, SimError> {
    if trials == 0 {
        return Err(SimError::Config("at least one trial is required".into()));
    }
    cfg.validate()?;
    let mut histogram = Histogram::new();
    let mut block_sums = vec![0.0; cfg.n_blocks];
    let mut records = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        let rec = run_trial_with(scheme, cfg, channel, base_seed.wrapping_add(t))?;
        for (i, m) in rec.transmissions().enumerate() {
            block_sums[i] += m as f64;
            if i >= cfg.burn_in {
                histogram.add(m);
            }
        }
        records.push(rec);
    }
    let summary = histogram.summary().expect("at least one block");
    Ok(BatchResult {
        scheme,
        histogram,
        summary,
        block_means: block_sums.into_iter().map(|s| s / trials as f64).collect(),
        trials: records,
    })
}
