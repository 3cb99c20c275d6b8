use std::io::Write;

use bayes_stack::features::{load_csv, time_split, CsvSchema};
use bayes_stack::metrics::{summarize_posterior, MetricsReport, ParameterSummary, Split};
use bayes_stack::models::{build_hierarchical_model, HierarchicalOptions};
use log::{info, warn};
use serde::Serialize;

use super::trend::forecast_rows;
use super::{open_days, sample_checked, write_forecast, VAR_LEVEL};
use crate::config::HierRun;
use crate::error::CliError;
use crate::output::Artifacts;

/// Posterior of one store's intercept, in sales units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoreAlpha {
    pub store: String,
    pub n_train: usize,
    #[serde(flatten)]
    pub summary: ParameterSummary,
    pub iqr: f64,
}

pub fn fit_hier(run: &HierRun) -> Result<Artifacts, CliError> {
    let loaded = load_csv(&run.input, &CsvSchema::default())?;
    let mut artifacts = Artifacts::default();
    if !loaded.rejects.is_empty() {
        warn!("{} malformed rows skipped, see rejects.csv", loaded.rejects.len());
        artifacts.csv("rejects.csv", |w| loaded.write_rejects_csv(w))?;
    }
    let mut frame = loaded.frame;
    if let Some(stores) = &run.stores {
        let missing: Vec<&str> = stores
            .iter()
            .filter(|s| !frame.stores().contains(s))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(CliError::input(format!("stores not in input: {}", missing.join(", "))));
        }
        frame = frame.select_stores(stores);
    }
    let (mut train, test) = time_split(&frame, run.common.split_date)?;
    if let Some((store, k)) = &run.truncate {
        if !train.stores().contains(store) {
            return Err(CliError::input(format!("--truncate-store: store `{store}` has no training rows")));
        }
        info!("keeping the last {k} training rows of store {store}");
        train = train.truncate_store(store, *k);
    }
    let train = open_days(&train, "train");
    let stores = train.stores();
    if stores.len() < 2 {
        return Err(CliError::input(format!(
            "the hierarchical model needs at least two stores with training data, found {}",
            stores.len()
        )));
    }
    let target_scale = match run.target_scale {
        Some(s) => s,
        None => {
            let sales = train.sales();
            sales.iter().sum::<f64>() / sales.len() as f64
        }
    };
    let options = HierarchicalOptions {
        stores: None,
        target_scale,
        drop_nonpositive: true,
    };
    let spec = build_hierarchical_model(&train, &options)?;
    let (draws, diagnostics) = sample_checked(&spec, &run.hmc)?;

    let test = open_days(&test.select_stores(&spec.group_labels), "test");
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (split, part, stream) in [(Split::Train, &train, 1), (Split::Test, &test, 2)] {
        if part.is_empty() {
            return Err(CliError::input(format!("{split} split has no rows for the modelled stores")));
        }
        let forecast = forecast_rows(&spec, &draws, part, split, run.hmc.seed.wrapping_add(stream))?;
        let mean: Vec<f64> = forecast.iter().map(|r| r.mean).collect();
        reports.push(MetricsReport::compute(&mean, &part.sales(), split)?);
        rows.extend(forecast);
    }

    let mut alphas = Vec::new();
    for (g, store) in spec.group_labels.iter().enumerate() {
        let values: Vec<f64> = draws
            .block_values("alpha", g)
            .expect("alpha block per store")
            .into_iter()
            .map(|a| a * target_scale)
            .collect();
        let summary = ParameterSummary::of(&format!("alpha[{store}]"), &values)?;
        alphas.push(StoreAlpha {
            store: store.clone(),
            n_train: train.rows().iter().filter(|r| &r.store == store).count(),
            iqr: summary.q75 - summary.q25,
            summary,
        });
    }

    artifacts.csv("draws.csv", |w| draws.write_csv(w))?;
    artifacts.json("summary.json", &HierSummary {
        target_scale,
        var_level: VAR_LEVEL,
        stores: &alphas,
        parameters: &summarize_posterior(&draws)?.parameters,
    })?;
    artifacts.json("diagnostics.json", &diagnostics)?;
    artifacts.csv("alpha.csv", |w| write_alphas(&alphas, w))?;
    artifacts.csv("forecast.csv", |w| write_forecast(&rows, w))?;
    artifacts.json("metrics.json", &reports)?;
    Ok(artifacts)
}

#[derive(Serialize)]
struct HierSummary<'a> {
    /// Model-scale parameters are in units of `sales / target_scale`.
    target_scale: f64,
    var_level: f64,
    stores: &'a [StoreAlpha],
    parameters: &'a [ParameterSummary],
}

fn write_alphas<W: Write>(alphas: &[StoreAlpha], writer: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["store", "n_train", "mean", "sd", "q05", "q25", "median", "q75", "q95", "iqr"])?;
    for a in alphas {
        let s = &a.summary;
        out.write_record([
            a.store.clone(),
            a.n_train.to_string(),
            s.mean.to_string(),
            s.sd.to_string(),
            s.q05.to_string(),
            s.q25.to_string(),
            s.median.to_string(),
            s.q75.to_string(),
            s.q95.to_string(),
            a.iqr.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
