//! Experiment configuration, result bundles and the three commands
//! (`analyze`, `simulate`, `sweep-snr`) behind the command-line tool.

mod commands;

pub use commands::{cmd_analyze, cmd_simulate, cmd_sweep_snr};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{AnalysisError, CarryoverState, ErasureNetworkParams, PdfStats, TransmissionPdf};
use crate::sim::{Scheme, SimConfig, SimError};
use crate::stats::{Histogram, Interval, Summary};
use crate::wireless::{db_to_linear, AlphaPolicy, Topology, WirelessError, WirelessParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("truncation failure: {0}")]
    Truncation(String),
    #[error("runaway simulation: {0}")]
    Runaway(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Other(String),
}

impl ExperimentError {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Io(_) => 2,
            ExperimentError::Truncation(_) | ExperimentError::Runaway(_) => 3,
            ExperimentError::Other(_) => 1,
        }
    }
}

impl From<AnalysisError> for ExperimentError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Truncation { .. } => ExperimentError::Truncation(e.to_string()),
            _ => ExperimentError::Config(e.to_string()),
        }
    }
}

impl From<SimError> for ExperimentError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) => ExperimentError::Config(e.to_string()),
            SimError::Runaway { .. } => ExperimentError::Runaway(e.to_string()),
            _ => ExperimentError::Other(e.to_string()),
        }
    }
}

impl From<WirelessError> for ExperimentError {
    fn from(e: WirelessError) -> Self {
        match e {
            WirelessError::Runaway { .. } => ExperimentError::Runaway(e.to_string()),
            _ => ExperimentError::Config(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    Direct,
    Naive,
    Netcoded,
    #[default]
    All,
}

impl SchemeChoice {
    pub fn schemes(&self) -> Vec<Scheme> {
        match self {
            SchemeChoice::Direct => vec![Scheme::Direct],
            SchemeChoice::Naive => vec![Scheme::Naive],
            SchemeChoice::Netcoded => vec![Scheme::Netcoded],
            SchemeChoice::All => Scheme::ALL.to_vec(),
        }
    }
}

impl std::str::FromStr for SchemeChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(SchemeChoice::All),
            other => Ok(match other.parse::<Scheme>()? {
                Scheme::Direct => SchemeChoice::Direct,
                Scheme::Naive => SchemeChoice::Naive,
                Scheme::Netcoded => SchemeChoice::Netcoded,
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    #[default]
    Erasure,
    WirelessApproach1,
    WirelessApproach2,
}

impl std::str::FromStr for ChannelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "erasure" => Ok(ChannelKind::Erasure),
            "wireless_approach1" | "wireless-approach1" => Ok(ChannelKind::WirelessApproach1),
            "wireless_approach2" | "wireless-approach2" => Ok(ChannelKind::WirelessApproach2),
            other => Err(format!(
                "unknown channel '{other}' (erasure, wireless_approach1, wireless_approach2)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown format '{other}' (json, csv)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketSection {
    pub payload_bits: usize,
    pub header_bits: usize,
    pub verify_payloads: bool,
}

impl Default for PacketSection {
    fn default() -> Self {
        Self {
            payload_bits: 1024,
            header_bits: 16,
            verify_payloads: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WirelessSection {
    pub topology: Topology,
    pub snr_db: f64,
    pub snr_db_grid: Vec<f64>,
    pub channel_uses: usize,
    /// SNR gap in dB (non-negative); applied as the factor `10^(-gap/10)`.
    pub gamma_gap_db: f64,
    pub alpha: AlphaPolicy,
}

impl Default for WirelessSection {
    fn default() -> Self {
        Self {
            topology: Topology::default(),
            snr_db: 45.0,
            snr_db_grid: vec![36.0, 40.0, 44.0, 48.0, 52.0, 56.0, 60.0],
            channel_uses: 2080,
            gamma_gap_db: 0.0,
            alpha: AlphaPolicy::Auto,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub tol: f64,
    pub max_support: Option<usize>,
    /// Carryover for the network-coded pdf; `None` samples the steady state.
    pub carryover: Option<CarryoverState>,
    pub chain_blocks: usize,
    pub chain_burn_in: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_support: None,
            carryover: None,
            chain_blocks: 220,
            chain_burn_in: 20,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<String>,
    pub format: OutputFormat,
}

/// One experiment. Everything but `seed` has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub scheme: SchemeChoice,
    #[serde(default)]
    pub channel: ChannelKind,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub erasure: ErasureNetworkParams,
    #[serde(default)]
    pub packet: PacketSection,
    #[serde(default)]
    pub wireless: WirelessSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_trials() -> u64 {
    10_000
}

fn default_blocks() -> usize {
    1
}

impl ExperimentConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            scheme: SchemeChoice::default(),
            channel: ChannelKind::default(),
            trials: default_trials(),
            blocks: default_blocks(),
            burn_in: 0,
            erasure: ErasureNetworkParams::default(),
            packet: PacketSection::default(),
            wireless: WirelessSection::default(),
            analysis: AnalysisSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.erasure.validate()?;
        self.sim_config(self.erasure).validate()?;
        if self.trials == 0 {
            return Err(ExperimentError::Config("trials must be at least 1".into()));
        }
        if self.channel != ChannelKind::Erasure {
            self.wireless_params(self.wireless.snr_db)?.validate()?;
            self.wireless.topology.validate()?;
        }
        if !(self.analysis.tol > 0.0 && self.analysis.tol < 1.0) {
            return Err(ExperimentError::Config(format!(
                "truncation tolerance {} outside (0, 1)",
                self.analysis.tol
            )));
        }
        Ok(())
    }

    pub fn sim_config(&self, params: ErasureNetworkParams) -> SimConfig {
        SimConfig {
            params,
            payload_bits: self.packet.payload_bits,
            header_bits: self.packet.header_bits,
            n_blocks: self.blocks,
            burn_in: self.burn_in,
            seed: self.seed,
            verify_payloads: self.packet.verify_payloads,
        }
    }

    pub fn wireless_params(&self, snr_db: f64) -> Result<WirelessParams, ExperimentError> {
        if self.wireless.gamma_gap_db < 0.0 {
            return Err(ExperimentError::Config("SNR gap in dB must be non-negative".into()));
        }
        Ok(WirelessParams {
            payload_bits: self.packet.payload_bits,
            header_bits: self.packet.header_bits,
            channel_uses: self.wireless.channel_uses,
            gamma_gap: db_to_linear(-self.wireless.gamma_gap_db),
            ..WirelessParams::from_topology(&self.wireless.topology, db_to_linear(snr_db))
        })
    }

    /// SHA-256 of the configuration with the output section left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        let text = serde_json::to_string(&c).expect("config serialises");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Parses `a:b:step` into an inclusive grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, ExperimentError> {
    let bad = || ExperimentError::Config(format!("SNR grid '{spec}' is not of the form start:stop:step"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [a, b, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || b < a || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + i as f64 * step).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticEntry {
    pub scheme: Scheme,
    /// Carryover the network-coded pdf was evaluated at; `None` with
    /// `steady_state` set means a mixture over a sampled block chain.
    pub carryover: Option<CarryoverState>,
    pub steady_state: bool,
    pub stats: PdfStats,
    pub pdf: TransmissionPdf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationEntry {
    pub label: String,
    pub scheme: Scheme,
    pub histogram: Histogram,
    pub summary: Summary,
    pub std_error: Option<f64>,
    pub mean_ci99: Option<Interval>,
    /// Share of counted blocks finishing in fewer than K transmissions.
    pub below_k: f64,
    /// Mean transmissions at each block index, burn-in included.
    pub block_means: Vec<f64>,
    pub tv_to_analytic: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub mean: f64,
    pub std_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub points: Vec<SweepPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    #[serde(default)]
    pub analytic: Vec<AnalyticEntry>,
    #[serde(default)]
    pub simulations: Vec<SimulationEntry>,
    #[serde(default)]
    pub sweep: Vec<SweepRow>,
}

impl ResultBundle {
    fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            tool: "fountain-relay".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config.hash(),
            config: config.clone(),
            analytic: Vec::new(),
            simulations: Vec::new(),
            sweep: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(format!("not a result bundle: {e}")))
    }

    /// Plot-ready CSV: per-M probabilities for analyses and simulations,
    /// one line per series and SNR point for sweeps.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if !self.sweep.is_empty() {
            out.push_str("snr_db,series,mean,std_error\n");
            for row in &self.sweep {
                for p in &row.points {
                    let se = p.std_error.map(number).unwrap_or_default();
                    out.push_str(&format!("{},{},{},{}\n", row.snr_db, p.label, number(p.mean), se));
                }
            }
            return out;
        }
        out.push_str("scheme,M,analytic_p,empirical_p\n");
        let mut labels: Vec<(String, Scheme)> = self.analytic.iter().map(|a| (a.scheme.name().to_string(), a.scheme)).collect();
        for s in &self.simulations {
            if !labels.iter().any(|(l, _)| *l == s.label) {
                labels.push((s.label.clone(), s.scheme));
            }
        }
        for (label, scheme) in labels {
            let analytic = self.analytic.iter().find(|a| a.scheme == scheme && a.scheme.name() == label);
            let sim = self.simulations.iter().find(|s| s.label == label);
            let emp = sim.map(|s| s.histogram.pmf()).unwrap_or_default();
            let len = analytic.map_or(0, |a| a.pdf.values.len()).max(emp.len());
            for m in 0..len {
                let a = analytic.and_then(|a| a.pdf.values.get(m)).copied();
                let e = sim.map(|_| emp.get(m).copied().unwrap_or(0.0));
                if a.unwrap_or(0.0) == 0.0 && e.unwrap_or(0.0) == 0.0 {
                    continue;
                }
                let cell = |v: Option<f64>| v.map(number).unwrap_or_default();
                out.push_str(&format!("{label},{m},{},{}\n", cell(a), cell(e)));
            }
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
        }
    }
}

/// Shortest round-trip form, switching to exponent notation for tiny values.
fn number(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory() {
        assert!(ExperimentConfig::from_json("{}").is_err());
        let c = ExperimentConfig::from_json(r#"{"seed": 5}"#).unwrap();
        assert_eq!(c, ExperimentConfig::new(5));
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let c = ExperimentConfig::from_json(r#"{"seed": 1, "erasure": {"k": 20}, "wireless": {"snr_db": 40}}"#).unwrap();
        assert_eq!(c.erasure.k, 20);
        assert_eq!(c.erasure.pe_sd, 0.4);
        assert_eq!(c.wireless.snr_db, 40.0);
        assert_eq!(c.wireless.channel_uses, 2080);
        assert!(ExperimentConfig::from_json(r#"{"seed": 1, "trails": 4}"#).is_err());
    }

    #[test]
    fn hash_tracks_content_not_output() {
        let a = ExperimentConfig::new(1);
        let mut b = a.clone();
        b.output.path = Some("elsewhere.json".into());
        b.output.format = OutputFormat::Csv;
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.erasure.pe_rr = 0.25;
        assert_ne!(a.hash(), c.hash());
        let mut d = a.clone();
        d.seed = 2;
        assert_ne!(a.hash(), d.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:10:5").unwrap(), vec![0.0, 5.0, 10.0]);
        assert_eq!(parse_grid("3:3:1").unwrap(), vec![3.0]);
        assert_eq!(parse_grid("36:60:4").unwrap().len(), 7);
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("1:2:0").is_err());
        assert!(parse_grid("a:2:1").is_err());
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut c = ExperimentConfig::new(0);
        c.trials = 0;
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        let mut c = ExperimentConfig::new(0);
        c.erasure.pe_sd = 2.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(0);
        c.channel = ChannelKind::WirelessApproach1;
        c.wireless.channel_uses = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn csv_numbers() {
        assert_eq!(number(0.25), "0.25");
        assert_eq!(number(1.5e-20), "1.5e-20");
        assert_eq!(number(0.0), "0");
    }

    #[test]
    fn choice_parsing() {
        assert_eq!("all".parse::<SchemeChoice>().unwrap().schemes().len(), 3);
        assert_eq!("naive".parse::<SchemeChoice>().unwrap(), SchemeChoice::Naive);
        assert_eq!(
            "wireless_approach2".parse::<ChannelKind>().unwrap(),
            ChannelKind::WirelessApproach2
        );
        assert!("csv".parse::<OutputFormat>().is_ok());
        assert!("xml".parse::<OutputFormat>().is_err());
    }
}
