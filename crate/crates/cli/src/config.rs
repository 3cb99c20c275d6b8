use std::path::{Path, PathBuf};

use bayes_stack::mcmc::HmcConfig;
use bayes_stack::models::{StackingLikelihood, StackingOptions, TimeScaling, TrendOptions};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "bayes-stack", version, about = "Bayesian sales forecasting with HMC: trend, hierarchical and stacking models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Saturating trend model of log sales for one store.
    FitTrend(TrendArgs),
    /// Per-store intercepts with partial pooling.
    FitHier(HierArgs),
    /// Bayesian stacking of first-level forecasts.
    FitStack(StackArgs),
    /// RMAE and RMSE of a predictions file.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Sales CSV with Date, Store, Sales and Promo columns.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// First date of the test split (YYYY-MM-DD).
    #[arg(long)]
    pub split_date: Option<NaiveDate>,
    /// JSON file with any of the options; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct HmcArgs {
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long = "warmup")]
    pub warmup_iters: Option<usize>,
    #[arg(long = "samples")]
    pub sample_iters: Option<usize>,
    #[arg(long)]
    pub target_accept: Option<f64>,
    #[arg(long)]
    pub max_leapfrog_steps: Option<usize>,
    #[arg(long)]
    pub init_jitter: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrendArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub hmc: HmcArgs,
    /// Store to model; required when the input holds several.
    #[arg(long)]
    pub store: Option<String>,
    #[arg(long, value_enum)]
    pub time_scaling: Option<TimeScalingArg>,
}

#[derive(Debug, Clone, Args)]
pub struct HierArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub hmc: HmcArgs,
    /// Stores to include (default: all).
    #[arg(long, value_delimiter = ',')]
    pub stores: Option<Vec<String>>,
    /// Keep only the last K training rows of store ID.
    #[arg(long, num_args = 2, value_names = ["ID", "K"])]
    pub truncate_store: Option<Vec<String>>,
    /// Sales are divided by this before fitting (default: mean training sales).
    #[arg(long)]
    pub target_scale: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct StackArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub hmc: HmcArgs,
    /// First-level predictions CSV (`date, target, <models...>`) used instead of --input.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// With --input: first-level models train before this date and predict from it on.
    #[arg(long)]
    pub validation_start: Option<NaiveDate>,
    /// With --input: stores whose sales are summed into the series (default: all).
    #[arg(long, value_delimiter = ',')]
    pub stores: Option<Vec<String>>,
    /// Model columns to leave out of the stack.
    #[arg(long, value_delimiter = ',')]
    pub exclude: Option<Vec<String>>,
    #[arg(long)]
    pub positive_coefficients: bool,
    /// Fix the Student-t degrees of freedom instead of sampling them.
    #[arg(long)]
    pub fixed_nu: Option<f64>,
    #[arg(long, value_enum)]
    pub likelihood: Option<LikelihoodArg>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// CSV with `date` and a `mean` or `prediction` column; `store` and `split` are optional.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// CSV with `date` and an `actual`, `target` or `sales` column. Defaults to
    /// the `actual` column of the predictions file.
    #[arg(long)]
    pub actuals: Option<PathBuf>,
    /// Rows before this date count as train when the predictions have no `split` column.
    #[arg(long)]
    pub split_date: Option<NaiveDate>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScalingArg {
    UnitInterval,
    Days,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodArg {
    StudentT,
    Gaussian,
}

/// Contents of a `--config` file. Every key is optional and matches the
/// long flag name with underscores.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub split_date: Option<NaiveDate>,
    pub chains: Option<usize>,
    pub warmup_iters: Option<usize>,
    pub sample_iters: Option<usize>,
    pub target_accept: Option<f64>,
    pub max_leapfrog_steps: Option<usize>,
    pub init_jitter: Option<f64>,
    pub store: Option<String>,
    pub stores: Option<Vec<String>>,
    pub truncate_store: Option<(String, usize)>,
    pub target_scale: Option<f64>,
    pub time_scaling: Option<TimeScalingArg>,
    pub predictions: Option<PathBuf>,
    pub actuals: Option<PathBuf>,
    pub validation_start: Option<NaiveDate>,
    pub exclude: Option<Vec<String>>,
    pub positive_coefficients: Option<bool>,
    pub fixed_nu: Option<f64>,
    pub likelihood: Option<LikelihoodArg>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::input(format!("missing required option --{flag}")))
}

pub struct Common {
    pub output_dir: PathBuf,
    pub seed: u64,
    pub split_date: NaiveDate,
}

fn resolve_common(args: &CommonArgs, file: &FileConfig) -> Result<Common, CliError> {
    Ok(Common {
        output_dir: required(args.output_dir.clone().or(file.output_dir.clone()), "output-dir")?,
        seed: args.seed.or(file.seed).unwrap_or(0),
        split_date: required(args.split_date.or(file.split_date), "split-date")?,
    })
}

fn resolve_hmc(args: &HmcArgs, file: &FileConfig, seed: u64) -> Result<HmcConfig, CliError> {
    let d = HmcConfig::default();
    let config = HmcConfig {
        chains: args.chains.or(file.chains).unwrap_or(d.chains),
        warmup_iters: args.warmup_iters.or(file.warmup_iters).unwrap_or(d.warmup_iters),
        sample_iters: args.sample_iters.or(file.sample_iters).unwrap_or(d.sample_iters),
        target_accept: args.target_accept.or(file.target_accept).unwrap_or(d.target_accept),
        max_leapfrog_steps: args.max_leapfrog_steps.or(file.max_leapfrog_steps).unwrap_or(d.max_leapfrog_steps),
        init_jitter: args.init_jitter.or(file.init_jitter).unwrap_or(d.init_jitter),
        seed,
    };
    config.validate()?;
    Ok(config)
}

pub struct TrendRun {
    pub input: PathBuf,
    pub common: Common,
    pub hmc: HmcConfig,
    pub store: Option<String>,
    pub options: TrendOptions,
}

impl TrendArgs {
    pub fn resolve(&self) -> Result<TrendRun, CliError> {
        let file = FileConfig::load(self.common.config.as_deref())?;
        let common = resolve_common(&self.common, &file)?;
        let time_scaling = match self.time_scaling.or(file.time_scaling) {
            Some(TimeScalingArg::Days) => TimeScaling::Days,
            _ => TimeScaling::UnitInterval,
        };
        Ok(TrendRun {
            input: required(self.common.input.clone().or(file.input.clone()), "input")?,
            hmc: resolve_hmc(&self.hmc, &file, common.seed)?,
            common,
            store: self.store.clone().or(file.store),
            options: TrendOptions {
                time_scaling,
                ..TrendOptions::default()
            },
        })
    }
}

pub struct HierRun {
    pub input: PathBuf,
    pub common: Common,
    pub hmc: HmcConfig,
    pub stores: Option<Vec<String>>,
    pub truncate: Option<(String, usize)>,
    pub target_scale: Option<f64>,
}

impl HierArgs {
    pub fn resolve(&self) -> Result<HierRun, CliError> {
        let file = FileConfig::load(self.common.config.as_deref())?;
        let common = resolve_common(&self.common, &file)?;
        let truncate = match &self.truncate_store {
            Some(v) => {
                let k = v[1]
                    .parse()
                    .map_err(|_| CliError::input(format!("--truncate-store: `{}` is not a row count", v[1])))?;
                Some((v[0].clone(), k))
            }
            None => file.truncate_store.clone(),
        };
        Ok(HierRun {
            input: required(self.common.input.clone().or(file.input.clone()), "input")?,
            hmc: resolve_hmc(&self.hmc, &file, common.seed)?,
            common,
            stores: self.stores.clone().or(file.stores),
            truncate,
            target_scale: self.target_scale.or(file.target_scale),
        })
    }
}

pub enum StackSource {
    /// Sales CSV; first-level models are fitted here.
    Sales {
        input: PathBuf,
        validation_start: NaiveDate,
        stores: Option<Vec<String>>,
    },
    /// Precomputed first-level predictions.
    Predictions(PathBuf),
}

pub struct StackRun {
    pub source: StackSource,
    pub common: Common,
    pub hmc: HmcConfig,
    pub exclude: Vec<String>,
    pub options: StackingOptions,
}

impl StackArgs {
    pub fn resolve(&self) -> Result<StackRun, CliError> {
        let file = FileConfig::load(self.common.config.as_deref())?;
        let common = resolve_common(&self.common, &file)?;
        let input = self.common.input.clone().or(file.input.clone());
        let predictions = self.predictions.clone().or(file.predictions.clone());
        let source = match (input, predictions) {
            (Some(_), Some(_)) => return Err(CliError::input("give either --input or --predictions, not both")),
            (None, None) => return Err(CliError::input("missing required option --input or --predictions")),
            (None, Some(p)) => StackSource::Predictions(p),
            (Some(input), None) => StackSource::Sales {
                input,
                validation_start: required(self.validation_start.or(file.validation_start), "validation-start")?,
                stores: self.stores.clone().or(file.stores.clone()),
            },
        };
        let likelihood = match self.likelihood.or(file.likelihood) {
            Some(LikelihoodArg::Gaussian) => StackingLikelihood::Gaussian,
            _ => StackingLikelihood::StudentT,
        };
        let fixed_nu = self.fixed_nu.or(file.fixed_nu);
        if fixed_nu.is_some() && likelihood == StackingLikelihood::Gaussian {
            return Err(CliError::input("--fixed-nu needs the student-t likelihood"));
        }
        Ok(StackRun {
            source,
            hmc: resolve_hmc(&self.hmc, &file, common.seed)?,
            common,
            exclude: self.exclude.clone().or(file.exclude).unwrap_or_default(),
            options: StackingOptions {
                positive_coefficients: self.positive_coefficients || file.positive_coefficients.unwrap_or(false),
                fixed_nu,
                likelihood,
            },
        })
    }
}

pub struct EvaluateRun {
    pub output_dir: PathBuf,
    pub predictions: PathBuf,
    pub actuals: Option<PathBuf>,
    pub split_date: Option<NaiveDate>,
}

impl EvaluateArgs {
    pub fn resolve(&self) -> Result<EvaluateRun, CliError> {
        let file = FileConfig::load(self.config.as_deref())?;
        Ok(EvaluateRun {
            output_dir: required(self.output_dir.clone().or(file.output_dir), "output-dir")?,
            predictions: required(self.predictions.clone().or(file.predictions), "predictions")?,
            actuals: self.actuals.clone().or(file.actuals),
            split_date: self.split_date.or(file.split_date),
        })
    }
}
