//! Input frames, calendar features, z-scoring and time-ordered splits.

mod frame;
mod scaler;
mod split;

pub use frame::{load_csv, CsvSchema, LoadedFrame, Observation, RejectRecord, TimeSeriesFrame};
pub(crate) use frame::write_rejects;
pub use scaler::{ColumnStats, ZScaler};
pub use split::{time_split, TimeIndexed};

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("duplicate observation for store `{store}` on {date}")]
    DuplicateKey { date: NaiveDate, store: String },
    #[error("column `{0}` is constant (standard deviation 0)")]
    ConstantColumn(String),
    #[error("column `{0}` is unknown to the scaler")]
    UnknownColumn(String),
    #[error("empty split: {train} rows before and {test} rows on or after {split_date}")]
    EmptySplit {
        split_date: NaiveDate,
        train: usize,
        test: usize,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for FeatureError {
    fn from(e: std::io::Error) -> Self {
        FeatureError::Io(e.to_string())
    }
}

impl From<csv::Error> for FeatureError {
    fn from(e: csv::Error) -> Self {
        FeatureError::Io(e.to_string())
    }
}

/// One-hot day of week, Monday in column 0 through Sunday in column 6.
pub fn weekday_dummies(dates: &[NaiveDate]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(dates.len(), 7);
    for (i, d) in dates.iter().enumerate() {
        out[(i, d.weekday().num_days_from_monday() as usize)] = 1.0;
    }
    out
}

/// Maps calendar dates to a model time axis. With `span_days = last - first`
/// the training window lands on `[0, 1]`; later dates extrapolate past 1.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimeScale {
    pub origin: NaiveDate,
    pub span_days: f64,
}

impl TimeScale {
    pub fn unit_interval(first: NaiveDate, last: NaiveDate) -> Self {
        let span = (last - first).num_days().max(1) as f64;
        Self {
            origin: first,
            span_days: span,
        }
    }

    /// Raw day counts from `origin`.
    pub fn days(origin: NaiveDate) -> Self {
        Self {
            origin,
            span_days: 1.0,
        }
    }

    pub fn apply(&self, date: NaiveDate) -> f64 {
        (date - self.origin).num_days() as f64 / self.span_days
    }
}
