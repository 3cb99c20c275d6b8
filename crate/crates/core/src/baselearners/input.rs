use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::BaseLearnerError;
use crate::features::{write_rejects, FeatureError, RejectRecord, TimeIndexed, ZScaler};

const RESERVED: [&str; 2] = ["date", "target"];

/// Validation-set predictions of several models (one column each), the
/// realized target and the dates of the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct StackingInput {
    predictions: DMatrix<f64>,
    model_names: Vec<String>,
    target: Vec<f64>,
    dates: Vec<NaiveDate>,
}

impl StackingInput {
    pub fn new(
        predictions: DMatrix<f64>,
        model_names: Vec<String>,
        target: Vec<f64>,
        dates: Vec<NaiveDate>,
    ) -> Result<Self, BaseLearnerError> {
        let n = predictions.nrows();
        if predictions.ncols() != model_names.len() {
            return Err(BaseLearnerError::Alignment(format!(
                "{} prediction columns for {} model names",
                predictions.ncols(),
                model_names.len()
            )));
        }
        if target.len() != n || dates.len() != n {
            return Err(BaseLearnerError::Alignment(format!(
                "{n} prediction rows, {} targets, {} dates",
                target.len(),
                dates.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &model_names {
            if RESERVED.contains(&name.as_str()) || name.is_empty() {
                return Err(BaseLearnerError::Schema(format!("`{name}` cannot be a model name")));
            }
            if !seen.insert(name) {
                return Err(BaseLearnerError::Schema(format!("duplicate model name `{name}`")));
            }
        }
        for (j, name) in model_names.iter().enumerate() {
            if let Some(i) = (0..n).find(|&i| !predictions[(i, j)].is_finite()) {
                return Err(BaseLearnerError::NonFinite {
                    model: name.clone(),
                    date: dates[i],
                });
            }
        }
        if let Some(i) = target.iter().position(|v| !v.is_finite()) {
            return Err(BaseLearnerError::InvalidInput(format!("non-finite target on {}", dates[i])));
        }
        Ok(Self {
            predictions,
            model_names,
            target,
            dates,
        })
    }

    pub fn n_models(&self) -> usize {
        self.model_names.len()
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn predictions(&self) -> &DMatrix<f64> {
        &self.predictions
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn column(&self, model: &str) -> Option<Vec<f64>> {
        let j = self.model_names.iter().position(|m| m == model)?;
        Some(self.predictions.column(j).iter().copied().collect())
    }

    /// Drops the named models. Unknown names are an error.
    pub fn exclude(&self, models: &[String]) -> Result<Self, BaseLearnerError> {
        if let Some(unknown) = models.iter().find(|m| !self.model_names.contains(m)) {
            return Err(BaseLearnerError::Schema(format!(
                "cannot exclude unknown model `{unknown}`; available: {}",
                self.model_names.join(", ")
            )));
        }
        let keep: Vec<String> = self.model_names.iter().filter(|m| !models.contains(m)).cloned().collect();
        if keep.is_empty() {
            return Err(BaseLearnerError::InvalidInput("excluding every model leaves nothing to stack".into()));
        }
        self.select(&keep)
    }

    /// Keeps the named models in the given order.
    pub fn select(&self, models: &[String]) -> Result<Self, BaseLearnerError> {
        let idx = models
            .iter()
            .map(|m| {
                self.model_names
                    .iter()
                    .position(|n| n == m)
                    .ok_or_else(|| BaseLearnerError::Schema(format!("unknown model `{m}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let predictions = DMatrix::from_fn(self.len(), idx.len(), |i, j| self.predictions[(i, idx[j])]);
        Self::new(predictions, models.to_vec(), self.target.clone(), self.dates.clone())
    }

    /// Z-score parameters of every model column and of `target`.
    pub fn fit_scaler(&self) -> Result<ZScaler, FeatureError> {
        let mut names = self.model_names.clone();
        names.push("target".into());
        let mut data = self.predictions.clone().insert_column(self.n_models(), 0.0);
        data.set_column(self.n_models(), &nalgebra::DVector::from_column_slice(&self.target));
        ZScaler::fit_matrix(&names, &data)
    }

    /// Applies a scaler from [`StackingInput::fit_scaler`] (possibly fitted on other rows).
    pub fn standardized(&self, scaler: &ZScaler) -> Result<Self, BaseLearnerError> {
        let predictions = scaler.apply_matrix(&self.model_names, &self.predictions)?;
        let target = scaler.apply("target", &self.target)?;
        Self::new(predictions, self.model_names.clone(), target, self.dates.clone())
    }

    /// CSV `date, target, <models...>`, readable by [`import_external_predictions`].
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string(), "target".to_string()];
        header.extend(self.model_names.iter().cloned());
        out.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.dates[i].to_string(), self.target[i].to_string()];
            rec.extend(self.predictions.row(i).iter().map(f64::to_string));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

impl TimeIndexed for StackingInput {
    fn row_dates(&self) -> Vec<NaiveDate> {
        self.dates.clone()
    }

    fn take_rows(&self, indices: &[usize]) -> Self {
        Self {
            predictions: self.predictions.select_rows(indices),
            model_names: self.model_names.clone(),
            target: indices.iter().map(|&i| self.target[i]).collect(),
            dates: indices.iter().map(|&i| self.dates[i]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImportedPredictions {
    pub input: StackingInput,
    pub rejects: Vec<RejectRecord>,
}

impl ImportedPredictions {
    pub fn write_rejects_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        write_rejects(&self.rejects, writer)
    }
}

/// Reads `date, target, <model columns...>`. Rows with a bad date or a
/// non-finite cell are skipped and reported.
pub fn import_external_predictions(path: impl AsRef<Path>) -> Result<ImportedPredictions, BaseLearnerError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(FeatureError::from)?;
    let headers = reader.headers().map_err(FeatureError::from)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BaseLearnerError::Schema(format!("missing required column `{name}`")))
    };
    let date_col = find("date")?;
    let target_col = find("target")?;
    let model_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != date_col && i != target_col).collect();
    if model_cols.is_empty() {
        return Err(BaseLearnerError::Schema("no model prediction columns".into()));
    }
    let names: Vec<String> = model_cols.iter().map(|&i| headers[i].to_string()).collect();

    let mut dates = Vec::new();
    let mut target = Vec::new();
    let mut values = Vec::new();
    let mut rejects = Vec::new();
    for record in reader.records() {
        let record = record.map_err(FeatureError::from)?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |i: usize| -> Result<f64, String> {
            let text = record.get(i).unwrap_or("");
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format!("non-finite or unparseable `{}` = `{text}`", &headers[i])),
            }
        };
        let row = (|| -> Result<(NaiveDate, f64, Vec<f64>), String> {
            let text = record.get(date_col).unwrap_or("");
            let date = NaiveDate::parse_from_str(text, "%Y-%m-%d").map_err(|_| format!("unparseable date `{text}`"))?;
            let y = parse(target_col)?;
            let preds = model_cols.iter().map(|&i| parse(i)).collect::<Result<Vec<_>, _>>()?;
            Ok((date, y, preds))
        })();
        match row {
            Ok((date, y, preds)) => {
                dates.push(date);
                target.push(y);
                values.extend(preds);
            }
            Err(reason) => rejects.push(RejectRecord { line, reason }),
        }
    }
    if !rejects.is_empty() {
        log::warn!("{} prediction rows rejected", rejects.len());
    }
    if dates.is_empty() {
        return Err(BaseLearnerError::InvalidInput("no valid prediction rows".into()));
    }
    let predictions = DMatrix::from_row_slice(dates.len(), names.len(), &values);
    Ok(ImportedPredictions {
        input: StackingInput::new(predictions, names, target, dates)?,
        rejects,
    })
}
