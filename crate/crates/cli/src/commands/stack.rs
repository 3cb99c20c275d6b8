use bayes_stack::baselearners::{build_stacking_input, default_models, import_external_predictions, StackingInput};
use bayes_stack::features::{load_csv, time_split, CsvSchema};
use bayes_stack::mcmc::{Diagnostics, HmcConfig};
use bayes_stack::metrics::{summarize_posterior, MetricsReport, ParameterSummary, Split};
use bayes_stack::models::{build_stacking_model, conditional_mean, posterior_predictive, StackingOptions};
use bayes_stack::PosteriorDraws;
use chrono::NaiveDate;
use log::{info, warn};
use serde::Serialize;

use super::{sample_checked, write_forecast, ForecastRow, VAR_LEVEL};
use crate::config::{StackRun, StackSource};
use crate::error::CliError;
use crate::output::Artifacts;

/// Posterior of one first-level model's stacking weight (z-score units).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelCoefficient {
    pub model: String,
    pub mean: f64,
    pub sd: f64,
    /// `null` in JSON when the posterior mean is numerically zero.
    pub coef_variation_abs: f64,
}

#[derive(Debug, Clone)]
pub struct StackOutcome {
    pub draws: PosteriorDraws,
    pub diagnostics: Diagnostics,
    pub coefficients: Vec<ModelCoefficient>,
    pub rows: Vec<ForecastRow>,
    pub reports: Vec<MetricsReport>,
}

impl StackOutcome {
    pub fn report(&self, split: Split) -> &MetricsReport {
        self.reports.iter().find(|r| r.split == split).expect("both splits reported")
    }
}

pub fn fit_stack(run: &StackRun) -> Result<Artifacts, CliError> {
    let mut artifacts = Artifacts::default();
    let input = match &run.source {
        StackSource::Predictions(path) => {
            let imported = import_external_predictions(path)?;
            if !imported.rejects.is_empty() {
                warn!("{} rows with missing or non-finite cells skipped, see rejects.csv", imported.rejects.len());
                artifacts.csv("rejects.csv", |w| imported.write_rejects_csv(w))?;
            }
            imported.input
        }
        StackSource::Sales {
            input,
            validation_start,
            stores,
        } => {
            let loaded = load_csv(input, &CsvSchema::default())?;
            if !loaded.rejects.is_empty() {
                warn!("{} malformed rows skipped, see rejects.csv", loaded.rejects.len());
                artifacts.csv("rejects.csv", |w| loaded.write_rejects_csv(w))?;
            }
            let frame = match stores {
                Some(s) => loaded.frame.select_stores(s),
                None => loaded.frame,
            };
            let series = match frame.stores().as_slice() {
                [] => return Err(CliError::input("no rows left after store selection")),
                [_] => frame,
                many => {
                    info!("summing sales of {} stores into one series", many.len());
                    frame.total_by_date("total")
                }
            };
            let (history, validation) = time_split(&series, *validation_start)?;
            let models = default_models(run.hmc.seed);
            info!(
                "fitting {} first-level models on {} rows, predicting {} validation rows",
                models.len(),
                history.len(),
                validation.len()
            );
            let input = build_stacking_input(&models, &history, &validation)?;
            artifacts.csv("first_level.csv", |w| input.write_csv(w))?;
            input
        }
    };

    let outcome = fit_stack_input(&input, run.common.split_date, &run.exclude, &run.options, &run.hmc)?;
    artifacts.csv("stack_draws.csv", |w| outcome.draws.write_csv(w))?;
    artifacts.json("summary.json", &summarize_posterior(&outcome.draws)?)?;
    artifacts.json("diagnostics.json", &outcome.diagnostics)?;
    artifacts.json("coefficients.json", &outcome.coefficients)?;
    artifacts.json("metrics.json", &outcome.reports)?;
    artifacts.csv("predictions.csv", |w| write_forecast(&outcome.rows, w))?;
    Ok(artifacts)
}

/// Splits `input` at `split_date`, z-scores both sides with statistics of the
/// training rows, fits the stacking regression and reports predictions and
/// metrics in the original units.
pub fn fit_stack_input(
    input: &StackingInput,
    split_date: NaiveDate,
    exclude: &[String],
    options: &StackingOptions,
    hmc: &HmcConfig,
) -> Result<StackOutcome, CliError> {
    let input = if exclude.is_empty() { input.clone() } else { input.exclude(exclude)? };
    let (train, test) = time_split(&input, split_date)?;
    let scaler = train.fit_scaler()?;
    let target = scaler.stats("target")?;
    let z_train = train.standardized(&scaler)?;
    let z_test = test.standardized(&scaler)?;

    let spec = build_stacking_model(&z_train, options)?;
    let (draws, diagnostics) = sample_checked(&spec, hmc)?;

    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (split, raw, z, stream) in [(Split::Train, &train, &z_train, 1), (Split::Test, &test, &z_test, 2)] {
        let design = spec.stacking_design_for(z);
        let mean: Vec<f64> = conditional_mean(&spec, &draws, &design)?
            .into_iter()
            .map(|m| target.restore(m))
            .collect();
        let var = posterior_predictive(&spec, &draws, &design, hmc.seed.wrapping_add(stream))?.quantile(VAR_LEVEL);
        reports.push(MetricsReport::compute(&mean, raw.target(), split)?);
        for i in 0..raw.len() {
            rows.push(ForecastRow {
                date: raw.dates()[i],
                store: None,
                split,
                actual: raw.target()[i],
                mean: mean[i],
                var05: target.restore(var[i]),
            });
        }
    }

    let mut coefficients = Vec::new();
    for (j, model) in input.model_names().iter().enumerate() {
        let values = draws.block_values("beta", j).expect("one beta per model");
        let s = ParameterSummary::of(model, &values)?;
        coefficients.push(ModelCoefficient {
            model: model.clone(),
            mean: s.mean,
            sd: s.sd,
            coef_variation_abs: s.coef_variation_abs,
        });
    }
    Ok(StackOutcome {
        draws,
        diagnostics,
        coefficients,
        rows,
        reports,
    })
}
