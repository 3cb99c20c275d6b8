//! Forecast error metrics, quantiles and posterior summaries.

mod summary;

pub use summary::{summarize_posterior, ParameterSummary, PosteriorSummary};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {predicted} predictions for {actual} actuals")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("metric needs at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("undefined metric: {0}")]
    Undefined(String),
    #[error("domain error: {0}")]
    Domain(String),
}

fn check_pair(y_pred: &[f64], y: &[f64]) -> Result<(), MetricsError> {
    if y_pred.len() != y.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: y_pred.len(),
            actual: y.len(),
        });
    }
    if y.is_empty() {
        return Err(MetricsError::TooFew { needed: 1, got: 0 });
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean absolute error as a percentage of the mean actual value.
pub fn rmae(y_pred: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pair(y_pred, y)?;
    let scale = mean(y);
    if scale == 0.0 || !scale.is_finite() {
        return Err(MetricsError::Undefined(format!("relative error with mean actual {scale}")));
    }
    let mae = y_pred.iter().zip(y).map(|(p, a)| (p - a).abs()).sum::<f64>() / y.len() as f64;
    Ok(100.0 * mae / scale)
}

pub fn rmse(y_pred: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    check_pair(y_pred, y)?;
    let sse: f64 = y_pred.iter().zip(y).map(|(p, a)| (p - a).powi(2)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// `|sd / mean|` with the sample sd. A mean within 1e-12 of zero yields
/// `+inf` and a warning instead of an error.
pub fn coef_variation_abs(draws: &[f64]) -> Result<f64, MetricsError> {
    if draws.len() < 2 {
        return Err(MetricsError::TooFew { needed: 2, got: draws.len() });
    }
    let m = mean(draws);
    let var = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws.len() as f64 - 1.0);
    let sd = var.sqrt();
    if m.abs() <= 1e-12 {
        log::warn!("coefficient of variation undefined for mean {m:e}; reporting +inf");
        return Ok(f64::INFINITY);
    }
    Ok((sd / m).abs())
}

/// Quantile of already sorted values by linear interpolation at zero-based
/// position `(n - 1) q`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Empirical `q` quantile of unsorted draws.
pub fn value_at_risk(draws: &[f64], q: f64) -> Result<f64, MetricsError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(MetricsError::Domain(format!("quantile level {q} outside (0, 1)")));
    }
    if draws.is_empty() {
        return Err(MetricsError::TooFew { needed: 1, got: 0 });
    }
    if draws.iter().any(|x| x.is_nan()) {
        return Err(MetricsError::Domain("NaN among draws".into()));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile(&sorted, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmae_percent: f64,
    pub rmse: f64,
    pub split: Split,
    pub n: usize,
}

impl MetricsReport {
    pub fn compute(y_pred: &[f64], y: &[f64], split: Split) -> Result<Self, MetricsError> {
        Ok(Self {
            rmae_percent: rmae(y_pred, y)?,
            rmse: rmse(y_pred, y)?,
            split,
            n: y.len(),
        })
    }

    /// CSV with one row per report.
    pub fn write_csv<W: std::io::Write>(reports: &[MetricsReport], writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for r in reports {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}
