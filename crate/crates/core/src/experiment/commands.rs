use super::{
    AnalyticEntry, ChannelKind, ExperimentConfig, ExperimentError, ResultBundle, SimulationEntry, SweepPoint, SweepRow,
};
use crate::analysis::{
    direct_pdf, naive_pdf, netcoded_pdf, sample_block_chain, CarryoverState, ErasureNetworkParams, Truncation,
};
use crate::sim::{run_batch_with, ChannelModel, ErasureChannel, Scheme, STEADY_STATE_BATCHES};
use crate::stats::{batch_means, mean_ci, Histogram, Summary};
use crate::wireless::{simulate_approach2, Approach2Config, FadingChannel, RayleighGains};

const CI_LEVEL: f64 = 0.99;

fn truncation(cfg: &ExperimentConfig) -> Truncation {
    Truncation {
        tol: cfg.analysis.tol,
        max_support: cfg.analysis.max_support,
    }
}

/// Erasure probabilities the analysis runs on: the configured ones, or the
/// outage probabilities of the fading links.
fn analytic_params(cfg: &ExperimentConfig) -> Result<ErasureNetworkParams, ExperimentError> {
    match cfg.channel {
        ChannelKind::Erasure => Ok(cfg.erasure),
        ChannelKind::WirelessApproach1 => Ok(cfg.wireless_params(cfg.wireless.snr_db)?.erasure_params(cfg.erasure.k)),
        ChannelKind::WirelessApproach2 => Err(ExperimentError::Config(
            "no packet-level analysis for the flow model (wireless_approach2); use simulate".into(),
        )),
    }
}

fn analytic_entry(
    cfg: &ExperimentConfig,
    params: &ErasureNetworkParams,
    scheme: Scheme,
    carryover: Option<CarryoverState>,
) -> Result<AnalyticEntry, ExperimentError> {
    let trunc = truncation(cfg);
    let (pdf, steady_state) = match scheme {
        Scheme::Direct => (direct_pdf(params.k, params.pe_sd, &trunc)?, false),
        Scheme::Naive => (naive_pdf(params, &trunc)?, false),
        Scheme::Netcoded => match carryover {
            Some(c) => (netcoded_pdf(params, c, &trunc)?, false),
            None => {
                let chain = sample_block_chain(
                    params,
                    cfg.analysis.chain_blocks,
                    cfg.analysis.chain_burn_in,
                    cfg.seed,
                    &trunc,
                )?;
                (chain.steady_pdf, true)
            }
        },
    };
    Ok(AnalyticEntry {
        scheme,
        carryover: if scheme == Scheme::Netcoded { carryover } else { None },
        steady_state,
        stats: pdf.stats(),
        pdf,
    })
}

/// Analytic pdfs, mean and variance for the selected schemes.
pub fn cmd_analyze(cfg: &ExperimentConfig) -> Result<ResultBundle, ExperimentError> {
    cfg.validate()?;
    let params = analytic_params(cfg)?;
    let mut bundle = ResultBundle::new("analyze", cfg);
    for scheme in cfg.scheme.schemes() {
        bundle
            .analytic
            .push(analytic_entry(cfg, &params, scheme, cfg.analysis.carryover)?);
    }
    Ok(bundle)
}

/// Transmissions per block, trial by trial.
type Runs = Vec<Vec<usize>>;

fn packet_runs<C: ChannelModel>(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    channel: &mut C,
) -> Result<Runs, ExperimentError> {
    let sim = cfg.sim_config(cfg.erasure);
    let batch = run_batch_with(scheme, &sim, cfg.trials, cfg.seed, channel)?;
    Ok(batch.trials.iter().map(|t| t.transmissions().collect()).collect())
}

fn flow_runs(cfg: &ExperimentConfig, snr_db: f64) -> Result<Runs, ExperimentError> {
    let w = cfg.wireless_params(snr_db)?;
    let a2 = Approach2Config {
        wireless: w,
        k: cfg.erasure.k,
        n_blocks: cfg.blocks,
        alpha: cfg.wireless.alpha,
    };
    let mut gains = RayleighGains(w);
    (0..cfg.trials)
        .map(|t| {
            let blocks = simulate_approach2(&a2, &mut gains, cfg.seed.wrapping_add(t))?;
            Ok(blocks.iter().map(|b| b.slots).collect())
        })
        .collect()
}

/// Runs one scheme on the configured channel at `snr_db` (ignored for
/// erasure links). The flow model only covers the network-coded scheme;
/// the other two fall back to the outage model there.
fn runs(cfg: &ExperimentConfig, scheme: Scheme, snr_db: f64) -> Result<Runs, ExperimentError> {
    match cfg.channel {
        ChannelKind::Erasure => packet_runs(cfg, scheme, &mut ErasureChannel::new(cfg.erasure)),
        ChannelKind::WirelessApproach2 if scheme == Scheme::Netcoded => flow_runs(cfg, snr_db),
        _ => packet_runs(cfg, scheme, &mut FadingChannel::new(cfg.wireless_params(snr_db)?)?),
    }
}

fn summarise(label: &str, scheme: Scheme, runs: &Runs, burn_in: usize, k: usize) -> SimulationEntry {
    let series: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.iter().skip(burn_in).map(|&m| m as f64))
        .collect();
    let per_trial = runs.first().map_or(0, |r| r.len().saturating_sub(burn_in));
    let sample = if per_trial > 1 {
        batch_means(&series, STEADY_STATE_BATCHES).unwrap_or_else(|| series.clone())
    } else {
        series.clone()
    };
    let histogram: Histogram = runs.iter().flat_map(|r| r.iter().skip(burn_in).copied()).collect();
    let blocks = runs.first().map_or(0, Vec::len);
    let block_means = (0..blocks)
        .map(|b| runs.iter().map(|r| r[b] as f64).sum::<f64>() / runs.len() as f64)
        .collect();
    let std_error = Summary::of(&sample).filter(|s| s.count > 1).map(|s| s.std_error());
    SimulationEntry {
        label: label.into(),
        scheme,
        summary: histogram.summary().expect("at least one block"),
        below_k: series.iter().filter(|&&m| m < k as f64).count() as f64 / series.len() as f64,
        histogram,
        std_error,
        mean_ci99: mean_ci(&sample, CI_LEVEL),
        block_means,
        tv_to_analytic: None,
    }
}

/// Monte Carlo batches for the selected schemes. Over erasure links the
/// matching analytic pdf is attached with its TV distance: the zero
/// carryover pdf for single-block runs, the steady-state mixture (or the
/// configured carryover) otherwise.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<ResultBundle, ExperimentError> {
    cfg.validate()?;
    let mut bundle = ResultBundle::new("simulate", cfg);
    for scheme in cfg.scheme.schemes() {
        let r = runs(cfg, scheme, cfg.wireless.snr_db)?;
        let mut entry = summarise(scheme.name(), scheme, &r, cfg.burn_in, cfg.erasure.k);
        if cfg.channel == ChannelKind::Erasure {
            let carry = if cfg.blocks == 1 {
                Some(CarryoverState::ZERO)
            } else {
                cfg.analysis.carryover
            };
            let a = analytic_entry(cfg, &cfg.erasure, scheme, carry)?;
            entry.tv_to_analytic = Some(entry.histogram.tv_to_pdf(&a.pdf));
            bundle.analytic.push(a);
        }
        bundle.simulations.push(entry);
    }
    Ok(bundle)
}

/// Mean transmissions against SNR for each selected scheme over the
/// wireless channel (`wireless_approach1` unless approach 2 is chosen).
pub fn cmd_sweep_snr(cfg: &ExperimentConfig, grid: &[f64]) -> Result<ResultBundle, ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::Config("empty SNR grid".into()));
    }
    let mut cfg = cfg.clone();
    if cfg.channel == ChannelKind::Erasure {
        cfg.channel = ChannelKind::WirelessApproach1;
    }
    cfg.wireless.snr_db_grid = grid.to_vec();
    cfg.validate()?;
    let mut bundle = ResultBundle::new("sweep-snr", &cfg);
    for &snr_db in grid {
        if !snr_db.is_finite() {
            return Err(ExperimentError::Config(format!("SNR {snr_db} dB is not finite")));
        }
        let mut points = Vec::new();
        for scheme in cfg.scheme.schemes() {
            let r = runs(&cfg, scheme, snr_db)?;
            let e = summarise(scheme.name(), scheme, &r, cfg.burn_in, cfg.erasure.k);
            points.push(SweepPoint {
                label: e.label,
                mean: e.summary.mean,
                std_error: e.std_error,
            });
        }
        bundle.sweep.push(SweepRow { snr_db, points });
    }
    Ok(bundle)
}
