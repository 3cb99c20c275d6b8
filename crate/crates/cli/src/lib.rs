//! Command-line pipeline over `bayes_stack`: load sales or first-level
//! predictions, fit one of the models, and write plot-ready CSV/JSON files.
//!
//! Every command holds a lock on its output directory and writes nothing
//! there unless the whole run succeeds.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use config::{Cli, Command};
use error::CliError;
use output::{Artifacts, OutputLock};

pub const THREADS_ENV: &str = "BAYES_STACK_THREADS";

/// Caps the global rayon pool at `BAYES_STACK_THREADS` when it is set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))
}

/// Runs one command and returns the paths it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    match &cli.command {
        Command::FitTrend(args) => {
            let run = args.resolve()?;
            in_output_dir(&run.common.output_dir, || commands::fit_trend(&run))
        }
        Command::FitHier(args) => {
            let run = args.resolve()?;
            in_output_dir(&run.common.output_dir, || commands::fit_hier(&run))
        }
        Command::FitStack(args) => {
            let run = args.resolve()?;
            in_output_dir(&run.common.output_dir, || commands::fit_stack(&run))
        }
        Command::Evaluate(args) => {
            let run = args.resolve()?;
            in_output_dir(&run.output_dir, || commands::evaluate(&run))
        }
    }
}

fn in_output_dir(dir: &Path, work: impl FnOnce() -> Result<Artifacts, CliError>) -> Result<Vec<PathBuf>, CliError> {
    let lock = OutputLock::acquire(dir)?;
    let artifacts = work()?;
    lock.commit(&artifacts)
}
