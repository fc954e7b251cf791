//! Batch front end for `grelax`: configuration, subcommands and the
//! acceptance suite behind `grelax verify`.

pub mod commands;
pub mod config;
pub mod verify;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Compute(#[from] grelax::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("acceptance suite failed: {0}")]
    Verify(String),
}

impl CliError {
    /// 2 for problems with the invocation or config, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "grelax", version, about = "Robust relaxed control under volatility uncertainty")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; the shipped default is used when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides the configured number of Monte-Carlo paths.
    #[arg(long, global = true, value_name = "N")]
    pub paths: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the G-heat equation for the configured payoff.
    Gheat,
    /// Sublinear expectation of the payoff of B_T over the scenario family.
    Expect,
    /// Simulate G-Brownian paths for every scenario.
    Paths,
    /// Chattering approximations of the configured relaxed control.
    Chatter,
    /// Solve the controlled G-SDE and its state stability table.
    Solve,
    /// Robust cost of the configured control and its chattering sequence.
    Cost,
    /// Strict and relaxed optima with the gap report.
    Optimize,
    /// Run the acceptance suite.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gheat => "gheat",
            Self::Expect => "expect",
            Self::Paths => "paths",
            Self::Chatter => "chatter",
            Self::Solve => "solve",
            Self::Cost => "cost",
            Self::Optimize => "optimize",
            Self::Verify => "verify",
        }
    }
}

impl Cli {
    /// The configuration with command-line overrides applied.
    pub fn resolve_config(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::parse(config::DEFAULT_CONFIG)?,
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        if let Some(m) = self.paths {
            config.m_paths = m;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Parses the configuration and runs one subcommand.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = cli.resolve_config()?;
    commands::run(cli.command, &config)
}

pub(crate) fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Pretty JSON with a trailing newline. Field order follows the struct
/// definitions and floats print in shortest round-trip form, so equal
/// values give equal bytes.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifacts serialize");
    s.push('\n');
    s
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_text(path, &to_json(value))
}
