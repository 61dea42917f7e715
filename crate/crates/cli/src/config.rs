//! Experiment configuration: one TOML file, overridable key by key.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use workshare_core::mdp::{Mechanism, Metric, SolverOptions};
use workshare_core::sim::SimConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
}

fn field(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdpSection {
    pub metrics: Vec<String>,
    pub mechanisms: Vec<String>,
    pub alpha_grid: Vec<f64>,
    /// Mechanism default (0.5, or 0 for FruitChains) when unset.
    pub gamma: Option<f64>,
    pub omega: u8,
    pub wfork: u8,
    pub max_fork: u8,
    pub double_spend_value: f64,
    pub confirmations: u8,
    pub solver: SolverOptions,
}

impl Default for MdpSection {
    fn default() -> Self {
        MdpSection {
            metrics: vec!["ic".into()],
            mechanisms: vec!["bitcoin".into(), "rs".into(), "prs".into()],
            alpha_grid: (1..=9).map(|i| f64::from(i) * 0.05).collect(),
            gamma: None,
            omega: 6,
            wfork: 6,
            max_fork: 12,
            double_spend_value: 3.0,
            confirmations: 6,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub epsilon: f64,
    pub deltas: Vec<f64>,
    /// Honest power fractions.
    pub ps: Vec<f64>,
    /// Sample counts for the inaccuracy curves.
    pub sample_grid: Vec<u64>,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection {
            epsilon: 0.1,
            deltas: vec![0.01, 0.02, 0.03, 0.05, 0.07, 0.1],
            ps: vec![0.65, 0.75, 0.85, 0.95],
            sample_grid: (1..=20).map(|i| i * 500).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardsSection {
    /// Rounds of the execution that generates the chain.
    pub rounds: u64,
    pub reward_per_height: f64,
}

impl Default for RewardsSection {
    fn default() -> Self {
        RewardsSection {
            rounds: 2000,
            reward_per_height: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    /// Write a JSON-lines trace per simulated seed.
    pub trace: bool,
    pub mdp: MdpSection,
    pub sim: SimConfig,
    pub sampling: SamplingSection,
    pub rewards: RewardsSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: vec![0],
            trace: false,
            mdp: MdpSection::default(),
            sim: SimConfig::default(),
            sampling: SamplingSection::default(),
            rewards: RewardsSection::default(),
        }
    }
}

/// Reads `path` into a table; a missing path yields an empty table.
pub fn load_table(path: Option<&Path>) -> Result<toml::Table, ConfigError> {
    let Some(path) = path else {
        return Ok(toml::Table::new());
    };
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    text.parse::<toml::Table>()
        .map_err(|e| ConfigError::Parse(format!("{}: {}", path.display(), e.message())))
}

/// Parses a value as a TOML literal, falling back to a bare string.
pub fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets a dotted key, creating intermediate tables.
pub fn set_key(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(field(key, "malformed key"));
    }
    let (last, path) = parts.split_last().expect("nonempty");
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| field(key, format!("`{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn from_table(table: toml::Table) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
    Ok(cfg)
}

pub fn parse_metrics(cfg: &ExperimentConfig) -> Result<Vec<Metric>, ConfigError> {
    if cfg.mdp.metrics.is_empty() {
        return Err(field("mdp.metrics", "must not be empty"));
    }
    cfg.mdp
        .metrics
        .iter()
        .map(|m| m.parse().map_err(|e| field("mdp.metrics", format!("{e}"))))
        .collect()
}

pub fn parse_mechanisms(cfg: &ExperimentConfig) -> Result<Vec<Mechanism>, ConfigError> {
    if cfg.mdp.mechanisms.is_empty() {
        return Err(field("mdp.mechanisms", "must not be empty"));
    }
    cfg.mdp
        .mechanisms
        .iter()
        .map(|m| m.parse().map_err(|e| field("mdp.mechanisms", format!("{e}"))))
        .collect()
}

pub fn validate_common(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    if cfg.seeds.is_empty() {
        return Err(field("seeds", "must not be empty"));
    }
    Ok(())
}

pub fn validate_mdp(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    parse_metrics(cfg)?;
    parse_mechanisms(cfg)?;
    if cfg.mdp.alpha_grid.is_empty() {
        return Err(field("mdp.alpha_grid", "must not be empty"));
    }
    let s = &cfg.mdp.solver;
    if !(s.tau > 0.0 && s.tau < 1.0) {
        return Err(field("mdp.solver.tau", "must lie in (0, 1)"));
    }
    if !(s.span_tol > 0.0 && s.ratio_tol > 0.0) {
        return Err(field("mdp.solver", "tolerances must be positive"));
    }
    Ok(())
}

pub fn validate_sampling(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    let s = &cfg.sampling;
    if !(s.epsilon > 0.0 && s.epsilon < 1.0) {
        return Err(field("sampling.epsilon", "must lie in (0, 1)"));
    }
    if s.deltas.is_empty() || s.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
        return Err(field("sampling.deltas", "must be nonempty with values in (0, 1)"));
    }
    if s.ps.is_empty() || s.ps.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return Err(field("sampling.ps", "must be nonempty with values in (0, 1]"));
    }
    if s.sample_grid.is_empty() || s.sample_grid.contains(&0) {
        return Err(field("sampling.sample_grid", "must be nonempty and positive"));
    }
    Ok(())
}

pub fn validate_sim(sim: &SimConfig) -> Result<(), ConfigError> {
    sim.validate().map_err(|e| field("sim", e.to_string()))?;
    if !sim.waive_compliance && !workshare_core::sim::config_compliant(sim) {
        return Err(field(
            "sim",
            "parameters violate the honest-majority condition; set waive_compliance to run anyway",
        ));
    }
    Ok(())
}
