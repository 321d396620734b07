//! `qheat` command-line front end: JSON experiment configuration, command
//! dispatch and CSV output. Exit status: 0 success, 2 configuration error,
//! 3 enumeration above the term cap, 4 verification failure, 1 other errors.

pub mod commands;
pub mod error;
pub mod spec;
pub mod table;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{FigureId, FigureOverrides, RunOptions};
pub use error::{CliError, CliResult};
use spec::LoadedSpec;

#[derive(Debug, Parser)]
#[command(name = "qheat", version, about = "Quantum-heat statistics under stochastic projective measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo trajectories: heat histogram, Jarzynski estimate, moments.
    Simulate(RequiredConfig),
    /// Exact enumeration: heat distribution, characteristic function, moments.
    Exact(RequiredConfig),
    /// Data for one of the reference figures.
    Figure {
        #[arg(value_enum)]
        which: FigureId,
        #[command(flatten)]
        args: OptionalConfig,
    },
    /// Runs the self-checks; exits with status 4 if any fails.
    Verify(OptionalConfig),
}

#[derive(Debug, Args)]
pub struct RequiredConfig {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct OptionalConfig {
    /// JSON configuration (figure overrides, or an experiment to check).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Master seed; overrides the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for trajectory batches; output does not depend on it.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=1024))]
    pub threads: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    fn options(&self) -> RunOptions {
        RunOptions { seed: self.seed, threads: self.threads as usize }
    }
}

/// Runs `command` and writes its output. A verification failure is returned
/// after the report has been written.
pub fn run(command: &Command) -> CliResult<()> {
    match command {
        Command::Simulate(args) | Command::Exact(args) => {
            let loaded = spec::load(&args.config)?;
            let out = output_path(args.common.out.as_ref(), Some(&loaded))?;
            let opts = args.common.options();
            let table = match command {
                Command::Simulate(_) => commands::simulate(&loaded, opts)?,
                _ => commands::exact(&loaded, opts)?,
            };
            table::emit(&table.render(), out.as_deref())
        }
        Command::Figure { which, args } => {
            let (overrides, sha) = match &args.config {
                Some(path) => commands::load_overrides(path)?,
                None => (FigureOverrides::default(), "none".to_string()),
            };
            let out = output_path(args.common.out.as_ref(), None)?;
            let table = commands::figure(*which, &overrides, &sha, args.common.options())?;
            table::emit(&table.render(), out.as_deref())
        }
        Command::Verify(args) => {
            let loaded = args.config.as_deref().map(spec::load).transpose()?;
            let out = output_path(args.common.out.as_ref(), None)?;
            let report = commands::verify(loaded.as_ref(), args.common.options())?;
            table::emit(&report.render(), out.as_deref())?;
            let failed: Vec<&str> = report.failed().iter().map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Verification(format!("{} check(s) failed: {}", failed.len(), failed.join(", "))))
            }
        }
    }
}

/// `--out` wins over the configured path; the file must be writable.
fn output_path(cli: Option<&PathBuf>, loaded: Option<&LoadedSpec>) -> CliResult<Option<PathBuf>> {
    let path = cli.cloned().or_else(|| loaded.and_then(|l| l.spec.output.path.clone()));
    if let Some(p) = &path {
        table::ensure_writable(p)?;
    }
    Ok(path)
}
