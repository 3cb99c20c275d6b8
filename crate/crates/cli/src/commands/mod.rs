mod evaluate;
mod hier;
mod stack;
mod trend;

pub use evaluate::evaluate;
pub use hier::{fit_hier, StoreAlpha};
pub use stack::{fit_stack, fit_stack_input, ModelCoefficient, StackOutcome};
pub use trend::fit_trend;

use std::io::Write;

use bayes_stack::mcmc::{diagnose, Diagnostics, HmcConfig, PosteriorDraws};
use bayes_stack::metrics::Split;
use bayes_stack::models::{sample_posterior, ModelSpec};
use bayes_stack::TimeSeriesFrame;
use chrono::NaiveDate;
use log::{info, warn};

use crate::error::CliError;

/// Runs above this split-R-hat on any parameter are rejected.
pub const RHAT_LIMIT: f64 = 1.1;

pub const VAR_LEVEL: f64 = 0.05;

/// Samples `spec` and checks convergence. Returns constrained draws.
pub(crate) fn sample_checked(spec: &ModelSpec, hmc: &HmcConfig) -> Result<(PosteriorDraws, Diagnostics), CliError> {
    for w in &spec.warnings {
        warn!("{w}");
    }
    info!(
        "sampling {} parameters from {} rows: {} chains x ({} warmup + {} draws)",
        spec.layout.total_dim(),
        spec.n_obs(),
        hmc.chains,
        hmc.warmup_iters,
        hmc.sample_iters
    );
    let draws = sample_posterior(spec, hmc)?.constrained();
    let diagnostics = diagnose(&draws)?;
    let bad = diagnostics.unconverged(RHAT_LIMIT);
    if !bad.is_empty() {
        let mut report = format!("{} parameters have R-hat above {RHAT_LIMIT}:", bad.len());
        for (name, rhat) in &bad {
            report.push_str(&format!("\n  {name:<24} {rhat:.4}"));
        }
        eprintln!("{}", diagnostics_table(&diagnostics));
        return Err(CliError::Convergence(report));
    }
    info!(
        "max R-hat {:.4}, min ESS {:.0}",
        diagnostics.max_rhat(),
        diagnostics.min_ess()
    );
    Ok((draws, diagnostics))
}

fn diagnostics_table(d: &Diagnostics) -> String {
    let mut out = format!("{:<24} {:>10} {:>10}", "parameter", "rhat", "ess");
    for ((name, rhat), ess) in d.names.iter().zip(&d.rhat).zip(&d.ess) {
        out.push_str(&format!("\n{name:<24} {rhat:>10.4} {ess:>10.1}"));
    }
    out
}

/// Drops closed days (`sales <= 0`) from an evaluation frame.
pub(crate) fn open_days(frame: &TimeSeriesFrame, label: &str) -> TimeSeriesFrame {
    let (kept, dropped) = frame.drop_nonpositive_sales();
    if !dropped.is_empty() {
        warn!("{label}: ignoring {} rows with non-positive sales", dropped.len());
    }
    kept
}

/// One row of `forecast.csv` / `predictions.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRow {
    pub date: NaiveDate,
    pub store: Option<String>,
    pub split: Split,
    pub actual: f64,
    pub mean: f64,
    pub var05: f64,
}

pub(crate) fn write_forecast<W: Write>(rows: &[ForecastRow], writer: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let with_store = rows.iter().any(|r| r.store.is_some());
    if with_store {
        out.write_record(["date", "store", "split", "actual", "mean", "var05"])?;
    } else {
        out.write_record(["date", "split", "actual", "mean", "var05"])?;
    }
    for r in rows {
        let mut rec = vec![r.date.to_string()];
        if with_store {
            rec.push(r.store.clone().unwrap_or_default());
        }
        rec.extend([r.split.to_string(), r.actual.to_string(), r.mean.to_string(), r.var05.to_string()]);
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
