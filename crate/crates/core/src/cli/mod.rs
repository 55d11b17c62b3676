//! The `rmtp` command line: argument parsing, configuration layering and
//! the five analysis subcommands.
//!
//! Settings are resolved from the defaults, then the `--config` file, then
//! `--set key=value` pairs, then the named flags. Exit codes are 0 on
//! success, 2 for configuration errors and 3 for data errors. Outputs are
//! buffered and written only after the whole subcommand succeeds.

mod commands;
pub mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{RunConfig, SyntheticSpec};
pub use output::{Outputs, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] crate::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rmtp", version, about = "Random-matrix filtering and long-only frontier analysis of return panels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for synthetic panels and the simulated spectrum baseline.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Directory receiving the CSV outputs and `run_summary.json`.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Price CSV; replaces any `synthetic` setting.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,

    /// Generator spec, e.g. `iid:n=100,l=500` or
    /// `one-factor:n=50,l=2000,beta=0.5:1.5,noise=1`; replaces any `input`.
    #[arg(long, global = true)]
    pub synthetic: Option<String>,

    /// Single-column price CSV of the market index (beta only).
    #[arg(long, global = true)]
    pub market: Option<PathBuf>,

    /// Override any config key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Correlation matrix, off-diagonal distribution and rolling mean.
    Corr,
    /// Eigenvalue spectrum against the random-matrix band.
    Spectrum,
    /// Market beta of every eigenportfolio.
    Beta,
    /// Efficient frontiers and entropy power-law fits.
    Frontier,
    /// Rolling-window power-law exponents.
    Scan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Corr => "corr",
            Command::Spectrum => "spectrum",
            Command::Beta => "beta",
            Command::Frontier => "frontier",
            Command::Scan => "scan",
        }
    }
}

/// Resolve the layered configuration of a parsed command line.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        config.apply_text(&text, path).map_err(CliError::Config)?;
    }
    for pair in &cli.overrides {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{pair}`")))?;
        config.set(key.trim(), value).map_err(CliError::Config)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        config.out_dir = dir.clone();
    }
    if let Some(input) = &cli.input {
        config.input = Some(input.clone());
        config.synthetic = None;
    }
    if let Some(spec) = &cli.synthetic {
        config.set("synthetic", spec).map_err(CliError::Config)?;
        config.input = None;
    }
    if let Some(market) = &cli.market {
        config.market = Some(market.clone());
    }
    Ok(config)
}

/// Run one subcommand to completion and write its outputs.
pub fn execute(command: Command, config: &RunConfig) -> Result<RunSummary, CliError> {
    commands::validate(config, command)?;
    let data = commands::load(config, command)?;
    let hash = config.hash();
    let mut out = Outputs::new(&hash);
    let results = match command {
        Command::Corr => commands::corr(config, &data, &mut out),
        Command::Spectrum => commands::spectrum(config, &data, &mut out),
        Command::Beta => commands::beta(config, &data, &mut out),
        Command::Frontier => commands::frontier(config, &data, &mut out),
        Command::Scan => commands::scan(config, &data, &mut out),
    }?;
    let summary = RunSummary {
        tool: "rmtp",
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        config_hash: hash,
        config: config.run_entries(),
        outputs: out.names(),
        results,
    };
    out.write_all(&config.out_dir, &summary).map_err(|e| {
        CliError::Output(format!("writing to {}: {e}", config.out_dir.display()))
    })?;
    Ok(summary)
}

/// Entry point of the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match resolve_config(&cli).and_then(|config| execute(cli.command, &config)) {
        Ok(summary) => {
            log::info!(
                "{} wrote {} files",
                summary.command,
                summary.outputs.len() + 1
            );
            0
        }
        Err(e) => {
            eprintln!("rmtp: {e}");
            e.exit_code()
        }
    }
}
