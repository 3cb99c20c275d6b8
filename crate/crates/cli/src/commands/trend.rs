use bayes_stack::features::{load_csv, time_split, CsvSchema};
use bayes_stack::metrics::{summarize_posterior, MetricsReport, Split};
use bayes_stack::models::{build_trend_model, conditional_mean, posterior_predictive, ModelSpec};
use bayes_stack::{PosteriorDraws, TimeSeriesFrame};
use log::warn;

use super::{open_days, sample_checked, write_forecast, ForecastRow, VAR_LEVEL};
use crate::config::TrendRun;
use crate::error::CliError;
use crate::output::Artifacts;

pub fn fit_trend(run: &TrendRun) -> Result<Artifacts, CliError> {
    let loaded = load_csv(&run.input, &CsvSchema::default())?;
    let mut artifacts = Artifacts::default();
    if !loaded.rejects.is_empty() {
        warn!("{} malformed rows skipped, see rejects.csv", loaded.rejects.len());
        artifacts.csv("rejects.csv", |w| loaded.write_rejects_csv(w))?;
    }
    let stores = loaded.frame.stores();
    let store = match (&run.store, stores.as_slice()) {
        (Some(s), _) if stores.contains(s) => s.clone(),
        (Some(s), _) => return Err(CliError::input(format!("store `{s}` not in input; found {}", stores.join(", ")))),
        (None, [only]) => only.clone(),
        (None, []) => return Err(CliError::input("input holds no valid rows")),
        (None, _) => {
            return Err(CliError::input(format!(
                "input holds {} stores; pick one with --store ({})",
                stores.len(),
                stores.join(", ")
            )))
        }
    };
    let frame = loaded.frame.select_stores(&[store]);
    let (train, test) = time_split(&frame, run.common.split_date)?;

    let spec = build_trend_model(&train, &run.options)?;
    let (draws, diagnostics) = sample_checked(&spec, &run.hmc)?;

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (split, part, stream) in [(Split::Train, &train, 1), (Split::Test, &test, 2)] {
        let part = open_days(part, &split.to_string());
        if part.is_empty() {
            return Err(CliError::input(format!("{split} split has no days with positive sales")));
        }
        let forecast = forecast_rows(&spec, &draws, &part, split, run.hmc.seed.wrapping_add(stream))?;
        let mean: Vec<f64> = forecast.iter().map(|r| r.mean).collect();
        reports.push(MetricsReport::compute(&mean, &part.sales(), split)?);
        rows.extend(forecast);
    }

    artifacts.csv("draws.csv", |w| draws.write_csv(w))?;
    artifacts.json("summary.json", &summarize_posterior(&draws)?)?;
    artifacts.json("diagnostics.json", &diagnostics)?;
    artifacts.csv("forecast.csv", |w| write_forecast(&rows, w))?;
    artifacts.json("metrics.json", &reports)?;
    Ok(artifacts)
}

/// Posterior mean of sales and the 5% predictive quantile for every row of `frame`.
pub(crate) fn forecast_rows(
    spec: &ModelSpec,
    draws: &PosteriorDraws,
    frame: &TimeSeriesFrame,
    split: Split,
    seed: u64,
) -> Result<Vec<ForecastRow>, CliError> {
    let design = spec.design_for(frame)?;
    let mean = conditional_mean(spec, draws, &design)?;
    let var = posterior_predictive(spec, draws, &design, seed)?.quantile(VAR_LEVEL);
    let multi = spec.group_labels.len() > 1;
    Ok(frame
        .rows()
        .iter()
        .zip(mean.into_iter().zip(var))
        .map(|(r, (mean, var05))| ForecastRow {
            date: r.date,
            store: multi.then(|| r.store.clone()),
            split,
            actual: r.sales,
            mean,
            var05,
        })
        .collect())
}
