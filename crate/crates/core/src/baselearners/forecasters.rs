use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::{fit_ar, fit_lasso, fit_tree_ensemble, BaseLearnerError, EnsembleMode, StackingInput, TreeEnsembleConfig};
use crate::features::{weekday_dummies, ColumnStats, TimeSeriesFrame, ZScaler};

/// A forecaster trained on a history frame that predicts sales on later rows.
pub trait FirstLevelModel: Send + Sync {
    fn name(&self) -> &str;

    fn fit_predict(&self, history: &TimeSeriesFrame, horizon: &TimeSeriesFrame) -> Result<Vec<f64>, BaseLearnerError>;
}

/// Columns `promo, time, wd_1..wd_7` with `time` in days since `origin`.
pub fn calendar_features(frame: &TimeSeriesFrame, origin: NaiveDate) -> (Vec<String>, DMatrix<f64>) {
    let dates = frame.dates();
    let wd = weekday_dummies(&dates);
    let promo = frame.promo();
    let mut names = vec!["promo".to_string(), "time".to_string()];
    names.extend((1..=7).map(|i| format!("wd_{i}")));
    let x = DMatrix::from_fn(dates.len(), 9, |i, j| match j {
        0 => promo[i],
        1 => (dates[i] - origin).num_days() as f64,
        _ => wd[(i, j - 2)],
    });
    (names, x)
}

fn origin(history: &TimeSeriesFrame) -> Result<NaiveDate, BaseLearnerError> {
    history
        .first_date()
        .ok_or_else(|| BaseLearnerError::InvalidInput("empty history".into()))
}

/// AR(p) on the sales series, forecasting one step per horizon row.
#[derive(Debug, Clone)]
pub struct ArForecaster {
    pub p: usize,
}

impl FirstLevelModel for ArForecaster {
    fn name(&self) -> &str {
        "ar"
    }

    fn fit_predict(&self, history: &TimeSeriesFrame, horizon: &TimeSeriesFrame) -> Result<Vec<f64>, BaseLearnerError> {
        Ok(fit_ar(&history.sales(), self.p)?.forecast(horizon.len()))
    }
}

/// Lasso on z-scored calendar features. Constant feature columns are dropped.
#[derive(Debug, Clone)]
pub struct LassoForecaster {
    pub lambda: f64,
}

impl FirstLevelModel for LassoForecaster {
    fn name(&self) -> &str {
        "lasso"
    }

    fn fit_predict(&self, history: &TimeSeriesFrame, horizon: &TimeSeriesFrame) -> Result<Vec<f64>, BaseLearnerError> {
        let origin = origin(history)?;
        let (names, x) = calendar_features(history, origin);
        let (_, x_new) = calendar_features(horizon, origin);
        let y = history.sales();
        let y_stats = ColumnStats::of(&y).ok_or_else(|| BaseLearnerError::InvalidInput("history too short".into()))?;
        let keep: Vec<usize> = (0..names.len())
            .filter(|&j| {
                let col: Vec<f64> = x.column(j).iter().copied().collect();
                ColumnStats::of(&col).is_some_and(|s| s.sd > 0.0)
            })
            .collect();
        if y_stats.sd == 0.0 || keep.is_empty() {
            return Ok(vec![y_stats.mean; horizon.len()]);
        }
        let kept: Vec<String> = keep.iter().map(|&j| names[j].clone()).collect();
        let x = x.select_columns(&keep);
        let x_new = x_new.select_columns(&keep);
        let scaler = ZScaler::fit_matrix(&kept, &x)?;
        let fit = fit_lasso(
            &scaler.apply_matrix(&kept, &x)?,
            &y.iter().map(|&v| y_stats.standardize(v)).collect::<Vec<_>>(),
            self.lambda,
        )?;
        Ok(fit
            .predict(&scaler.apply_matrix(&kept, &x_new)?)
            .into_iter()
            .map(|z| y_stats.restore(z))
            .collect())
    }
}

/// Random forest or extra trees on raw calendar features.
#[derive(Debug, Clone)]
pub struct TreeForecaster {
    pub config: TreeEnsembleConfig,
}

impl FirstLevelModel for TreeForecaster {
    fn name(&self) -> &str {
        match self.config.mode {
            EnsembleMode::RandomForest => "random_forest",
            EnsembleMode::ExtraTrees => "extra_trees",
        }
    }

    fn fit_predict(&self, history: &TimeSeriesFrame, horizon: &TimeSeriesFrame) -> Result<Vec<f64>, BaseLearnerError> {
        let origin = origin(history)?;
        let (_, x) = calendar_features(history, origin);
        let (_, x_new) = calendar_features(horizon, origin);
        fit_tree_ensemble(&x, &history.sales(), &self.config)?.predict(&x_new)
    }
}

/// AR(7), lasso (lambda 0.01), random forest and extra trees with default sizes.
pub fn default_models(seed: u64) -> Vec<Box<dyn FirstLevelModel>> {
    vec![
        Box::new(ArForecaster { p: 7 }),
        Box::new(LassoForecaster { lambda: 0.01 }),
        Box::new(TreeForecaster {
            config: TreeEnsembleConfig {
                mode: EnsembleMode::RandomForest,
                seed,
                ..Default::default()
            },
        }),
        Box::new(TreeForecaster {
            config: TreeEnsembleConfig {
                mode: EnsembleMode::ExtraTrees,
                seed: seed.wrapping_add(1),
                ..Default::default()
            },
        }),
    ]
}

/// Fits every model on `history` and stacks their predictions for the
/// `validation` rows, one column per model, with the realized sales as target.
/// Both frames must hold a single series (see [`TimeSeriesFrame::total_by_date`]).
pub fn build_stacking_input(
    models: &[Box<dyn FirstLevelModel>],
    history: &TimeSeriesFrame,
    validation: &TimeSeriesFrame,
) -> Result<StackingInput, BaseLearnerError> {
    if models.is_empty() {
        return Err(BaseLearnerError::InvalidInput("stacking needs at least one first-level model".into()));
    }
    for (label, frame) in [("history", history), ("validation", validation)] {
        if frame.stores().len() != 1 {
            return Err(BaseLearnerError::Precondition(format!(
                "{label} frame must hold exactly one series, found {} stores",
                frame.stores().len()
            )));
        }
    }
    let n = validation.len();
    let mut values = DMatrix::zeros(n, models.len());
    for (j, model) in models.iter().enumerate() {
        let preds = model.fit_predict(history, validation)?;
        if preds.len() != n {
            return Err(BaseLearnerError::Alignment(format!(
                "model `{}` returned {} predictions for {n} validation rows",
                model.name(),
                preds.len()
            )));
        }
        values.set_column(j, &nalgebra::DVector::from_vec(preds));
    }
    let names = models.iter().map(|m| m.name().to_string()).collect();
    StackingInput::new(values, names, validation.sales(), validation.dates())
}
