//! Library behind the `quasicorr` binary: configuration, commands, and the
//! `verify` suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod verify;

pub use commands::Context;
pub use config::ExperimentConfig;
pub use error::CliError;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "quasicorr", version, about = "Model sets, diffraction, correlations and cycle functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Basis, dual basis, covolume and density.
    Scheme,
    /// Point patch as plain text.
    Generate,
    /// Peak table (CSV) and consistency reports (JSON).
    Diffract,
    /// Correlation and moment estimates for the configured Gaussians.
    Correlate,
    /// Cycle-function estimates and their algebraic properties.
    Cyclefn,
    /// Decomposition of zero-sum cycles into short factors.
    Decompose,
    /// Moments rebuilt from the extended cycle function.
    Reconstruct,
    /// All checks; exit status 0 only if every check passes.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Scheme => "scheme",
            Command::Generate => "generate",
            Command::Diffract => "diffract",
            Command::Correlate => "correlate",
            Command::Cyclefn => "cyclefn",
            Command::Decompose => "decompose",
            Command::Reconstruct => "reconstruct",
            Command::Verify => "verify",
        }
    }
}

pub fn run(command: Command, ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Scheme => commands::scheme(ctx),
        Command::Generate => commands::generate(ctx),
        Command::Diffract => commands::diffract(ctx),
        Command::Correlate => commands::correlate(ctx),
        Command::Cyclefn => commands::cyclefn(ctx),
        Command::Decompose => commands::decompose_cmd(ctx),
        Command::Reconstruct => commands::reconstruct(ctx),
        Command::Verify => verify::verify(ctx),
    }
}

/// Parses the config, applies the seed override, sizes the thread pool and
/// dispatches.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config <path> is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let base = path.parent().map(PathBuf::from).unwrap_or_default();
    let ctx = Context::new(config, &base, &cli.out)?;
    log::info!(
        "quasicorr {} {} config {}",
        output::VERSION,
        cli.command.name(),
        ctx.config_hash
    );
    run(cli.command, &ctx)
}
