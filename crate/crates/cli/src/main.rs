use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fountain_relay::experiment::{
    cmd_analyze, cmd_simulate, cmd_sweep_snr, parse_grid, ChannelKind, ExperimentConfig, ExperimentError,
    OutputFormat, ResultBundle, SchemeChoice,
};
use fountain_relay::wireless::AlphaPolicy;

/// Fountain-coded relaying: analytic pdfs, Monte Carlo runs and SNR sweeps.
#[derive(Parser, Debug)]
#[command(name = "fountain-relay", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analytic transmission-count pdfs (erasure links or outage mapping).
    Analyze(Common),
    /// Monte Carlo simulation, with the analytic pdf overlaid when available.
    Simulate(Common),
    /// Mean transmissions against SNR over the wireless channel.
    SweepSnr(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// direct, naive, netcoded or all.
    #[arg(long)]
    scheme: Option<SchemeChoice>,
    /// erasure, wireless_approach1 or wireless_approach2.
    #[arg(long)]
    channel: Option<ChannelKind>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Blocks per trial.
    #[arg(long)]
    blocks: Option<usize>,
    /// Leading blocks per trial left out of statistics.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv.
    #[arg(long)]
    format: Option<OutputFormat>,
    /// SNR grid in dB as start:stop:step.
    #[arg(long)]
    snr_db_grid: Option<String>,
    /// SNR in dB for single-point wireless runs.
    #[arg(long)]
    snr_db: Option<f64>,
    /// Superposition weight for the flow model: `auto` or a value in [0, 1].
    #[arg(long)]
    alpha: Option<String>,
}

fn parse_alpha(s: &str) -> Result<AlphaPolicy, ExperimentError> {
    let value = s.strip_prefix("fixed:").unwrap_or(s);
    if value == "auto" {
        return Ok(AlphaPolicy::Auto);
    }
    match value.parse::<f64>() {
        Ok(a) if (0.0..=1.0).contains(&a) => Ok(AlphaPolicy::Fixed(a)),
        _ => Err(ExperimentError::Config(format!(
            "--alpha expects 'auto' or a number in [0, 1], got '{s}'"
        ))),
    }
}

fn load(args: &Common) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
            let mut value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
            // a seed on the command line satisfies the mandatory field
            if let (Some(seed), Some(obj)) = (args.seed, value.as_object_mut()) {
                obj.entry("seed").or_insert(seed.into());
            }
            serde_json::from_value(value).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?
        }
        None => {
            let seed = args
                .seed
                .ok_or_else(|| ExperimentError::Config("a seed is required (--seed or the config file)".into()))?;
            ExperimentConfig::new(seed)
        }
    };
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.scheme {
        cfg.scheme = v;
    }
    if let Some(v) = args.channel {
        cfg.channel = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.blocks {
        cfg.blocks = v;
    }
    if let Some(v) = args.burn_in {
        cfg.burn_in = v;
    }
    if let Some(v) = &args.out {
        cfg.output.path = Some(v.display().to_string());
    }
    if let Some(v) = args.format {
        cfg.output.format = v;
    }
    if let Some(v) = &args.snr_db_grid {
        cfg.wireless.snr_db_grid = parse_grid(v)?;
    }
    if let Some(v) = args.snr_db {
        cfg.wireless.snr_db = v;
    }
    if let Some(v) = &args.alpha {
        cfg.wireless.alpha = parse_alpha(v)?;
    }
    Ok(cfg)
}

fn emit(bundle: &ResultBundle) -> Result<(), ExperimentError> {
    let out = &bundle.config.output;
    let text = bundle.render(out.format);
    match &out.path {
        Some(path) => std::fs::write(path, text).map_err(|e| ExperimentError::Io(format!("{path}: {e}"))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    let bundle = match &cli.command {
        Command::Analyze(a) => cmd_analyze(&load(a)?)?,
        Command::Simulate(a) => cmd_simulate(&load(a)?)?,
        Command::SweepSnr(a) => {
            let cfg = load(a)?;
            let grid = cfg.wireless.snr_db_grid.clone();
            cmd_sweep_snr(&cfg, &grid)?
        }
    };
    emit(&bundle)
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| {
        // usage errors share the configuration exit status
        let code = if e.use_stderr() { 2 } else { 0 };
        let _ = e.print();
        std::process::exit(code);
    });
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
