//! `workshare`: batch front-end for MDP sweeps, simulations, sample-size
//! tables, and reward allocation demos.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 solver
//! nonconvergence, 3 I/O failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{ConfigError, ExperimentConfig};
use output::{config_hash, prepare_dir, write_json, Manifest, OutputError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("simulation error: {0}")]
    Sim(String),
    #[error("{0}")]
    Output(#[from] OutputError),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Sim(_) => 1,
            CliError::Output(OutputError::NotEmpty(_)) => 1,
            CliError::Solver(_) => 2,
            CliError::Output(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "workshare", version, about = "Workshare protocol experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; must be absent or empty.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root for generated output directories when --out is not given.
    #[arg(long, global = true, env = "WORKSHARE_OUT", default_value = "runs")]
    out_root: PathBuf,
    /// Comma-separated seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Comma-separated attacker power values.
    #[arg(long, global = true, value_delimiter = ',')]
    alpha_grid: Vec<f64>,
    /// Comma-separated mechanisms: bitcoin, fruitchains, rs, prs.
    #[arg(long, global = true, value_delimiter = ',')]
    mechanism: Vec<String>,
    /// Comma-separated metrics: ic, subversion, censorship.
    #[arg(long, global = true, value_delimiter = ',')]
    metric: Vec<String>,
    #[arg(long, global = true)]
    omega: Option<u8>,
    #[arg(long, global = true)]
    wfork: Option<u8>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    max_fork: Option<u8>,
    /// Simulation horizon in rounds.
    #[arg(long, global = true)]
    rounds: Option<u64>,
    /// all_honest, selfish_mining, or private_chain.
    #[arg(long, global = true)]
    strategy: Option<String>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    /// Write a JSON-lines trace per seed.
    #[arg(long, global = true)]
    trace: bool,
    /// Override any configuration key, e.g. `sim.protocol.parties=4`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Metric curves of the attack MDP.
    MdpEval,
    /// Simulated executions and their property reports.
    Sim,
    /// Sample-size and storage tables.
    Sampling,
    /// Reward allocation over a simulated chain.
    RewardsDemo,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::MdpEval => "mdp-eval",
            Command::Sim => "sim",
            Command::Sampling => "sampling",
            Command::RewardsDemo => "rewards-demo",
        }
    }
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    use toml::Value;
    let mut t = config::load_table(cli.config.as_deref())?;
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Field {
            field: kv.clone(),
            message: "expected KEY=VALUE".into(),
        })?;
        config::set_key(&mut t, k.trim(), config::parse_value(v.trim()))?;
    }
    let floats = |v: &[f64]| Value::Array(v.iter().map(|&x| Value::Float(x)).collect());
    let strings = |v: &[String]| Value::Array(v.iter().map(|x| Value::String(x.clone())).collect());
    if !cli.seed.is_empty() {
        let seeds = cli.seed.iter().map(|&s| Value::Integer(s as i64)).collect();
        config::set_key(&mut t, "seeds", Value::Array(seeds))?;
    }
    if !cli.alpha_grid.is_empty() {
        config::set_key(&mut t, "mdp.alpha_grid", floats(&cli.alpha_grid))?;
    }
    if !cli.mechanism.is_empty() {
        config::set_key(&mut t, "mdp.mechanisms", strings(&cli.mechanism))?;
    }
    if !cli.metric.is_empty() {
        config::set_key(&mut t, "mdp.metrics", strings(&cli.metric))?;
    }
    let ints = [
        ("mdp.omega", cli.omega.map(i64::from)),
        ("mdp.wfork", cli.wfork.map(i64::from)),
        ("mdp.max_fork", cli.max_fork.map(i64::from)),
        ("sim.rounds", cli.rounds.map(|r| r as i64)),
    ];
    for (k, v) in ints {
        if let Some(v) = v {
            config::set_key(&mut t, k, Value::Integer(v))?;
        }
    }
    if let Some(g) = cli.gamma {
        config::set_key(&mut t, "mdp.gamma", Value::Float(g))?;
    }
    if let Some(r) = cli.rho {
        config::set_key(&mut t, "sim.protocol.rho", Value::Float(r))?;
    }
    if let Some(s) = &cli.strategy {
        config::set_key(&mut t, "sim.strategy", Value::String(s.clone()))?;
    }
    if cli.trace {
        config::set_key(&mut t, "trace", Value::Boolean(true))?;
    }
    config::from_table(t)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let command = cli.command.name();
    let cfg = effective_config(cli)?;
    commands::validate(command, &cfg)?;
    let hash = config_hash(&(command, &cfg));
    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| cli.out_root.join(format!("{command}-{}", &hash[..12])));
    if dir.exists() && std::fs::read_dir(&dir).map_err(OutputError::from)?.next().is_some() {
        return Err(OutputError::NotEmpty(dir).into());
    }
    let results = commands::compute(command, &cfg)?;
    prepare_dir(&dir)?;
    let files = commands::write(&dir, &results)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_hash: hash,
        seeds: &cfg.seeds,
        files,
        config: &cfg,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
