use std::path::Path;

use bayes_stack::metrics::{MetricsReport, Split};
use chrono::NaiveDate;

use crate::config::EvaluateRun;
use crate::error::CliError;
use crate::output::Artifacts;

struct Table {
    headers: Vec<String>,
    records: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, CliError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_lowercase)
            .collect();
        let records = reader
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        if records.is_empty() {
            return Err(CliError::input(format!("{} has no data rows", path.display())));
        }
        Ok(Self { headers, records })
    }

    fn column(&self, names: &[&str]) -> Option<usize> {
        names.iter().find_map(|n| self.headers.iter().position(|h| h == n))
    }

    fn require(&self, names: &[&str], path: &Path) -> Result<usize, CliError> {
        self.column(names).ok_or_else(|| {
            CliError::input(format!("{} needs a column named {}", path.display(), names.join(" or ")))
        })
    }
}

fn parse_date(text: &str, path: &Path, row: usize) -> Result<NaiveDate, CliError> {
    text.parse()
        .map_err(|_| CliError::input(format!("{} row {}: bad date `{text}`", path.display(), row + 1)))
}

fn parse_number(text: &str, path: &Path, row: usize) -> Result<f64, CliError> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::input(format!("{} row {}: bad number `{text}`", path.display(), row + 1))),
    }
}

struct Row {
    date: NaiveDate,
    store: Option<String>,
    split: Option<Split>,
    value: f64,
}

fn read_rows(path: &Path, value_names: &[&str]) -> Result<Vec<Row>, CliError> {
    let table = Table::read(path)?;
    let date = table.require(&["date"], path)?;
    let value = table.require(value_names, path)?;
    let store = table.column(&["store"]);
    let split = table.column(&["split"]);
    table
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let split = match split.map(|j| &r[j]) {
                None => None,
                Some("train") => Some(Split::Train),
                Some("test") => Some(Split::Test),
                Some(other) => {
                    return Err(CliError::input(format!(
                        "{} row {}: split must be train or test, got `{other}`",
                        path.display(),
                        i + 1
                    )))
                }
            };
            Ok(Row {
                date: parse_date(&r[date], path, i)?,
                store: store.map(|j| r[j].to_string()),
                split,
                value: parse_number(&r[value], path, i)?,
            })
        })
        .collect()
}

/// RMAE and RMSE of a predictions file against actuals, per split.
pub fn evaluate(run: &EvaluateRun) -> Result<Artifacts, CliError> {
    let predictions = read_rows(&run.predictions, &["mean", "prediction", "predicted"])?;
    let actuals = match &run.actuals {
        Some(path) => read_rows(path, &["actual", "target", "sales"])?,
        None => read_rows(&run.predictions, &["actual"])?,
    };
    for i in 0..predictions.len().max(actuals.len()) {
        match (predictions.get(i), actuals.get(i)) {
            (Some(p), Some(a)) if p.date == a.date && (a.store.is_none() || p.store == a.store) => {}
            (Some(p), _) => {
                return Err(CliError::input(format!(
                    "predictions and actuals are misaligned at row {} (date {})",
                    i + 1,
                    p.date
                )))
            }
            (None, Some(a)) => {
                return Err(CliError::input(format!(
                    "actuals have extra rows from row {} (date {})",
                    i + 1,
                    a.date
                )))
            }
            (None, None) => unreachable!(),
        }
    }

    let split_of = |r: &Row| match (r.split, run.split_date) {
        (Some(s), _) => s,
        (None, Some(d)) if r.date < d => Split::Train,
        _ => Split::Test,
    };
    let mut reports = Vec::new();
    for split in [Split::Train, Split::Test] {
        let (pred, act): (Vec<f64>, Vec<f64>) = predictions
            .iter()
            .zip(&actuals)
            .filter(|(p, _)| split_of(p) == split)
            .map(|(p, a)| (p.value, a.value))
            .unzip();
        if !pred.is_empty() {
            reports.push(MetricsReport::compute(&pred, &act, split)?);
        }
    }
    let mut artifacts = Artifacts::default();
    artifacts.json("metrics.json", &reports)?;
    Ok(artifacts)
}
