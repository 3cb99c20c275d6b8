use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Mean and sample standard deviation (denominator `n - 1`) of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub sd: f64,
}

impl ColumnStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.len() < 2 {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Some(Self { mean, sd: var.sqrt() })
    }

    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mean) / self.sd
    }

    pub fn restore(&self, z: f64) -> f64 {
        z * self.sd + self.mean
    }

    /// Mean within 1e-8 of 0 and sd within 1e-6 of 1.
    pub fn is_standardized(&self) -> bool {
        self.mean.abs() <= 1e-8 && (self.sd - 1.0).abs() <= 1e-6
    }
}

/// Per-column z-score transform fitted on one data set and reused on others.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ZScaler {
    columns: Vec<(String, ColumnStats)>,
}

impl ZScaler {
    pub fn fit<'a, I>(columns: I) -> Result<Self, FeatureError>
    where
        I: IntoIterator<Item = (&'a str, &'a [f64])>,
    {
        let mut out = Vec::new();
        for (name, values) in columns {
            let stats = ColumnStats::of(values)
                .filter(|s| s.sd > 0.0 && s.sd.is_finite())
                .ok_or_else(|| FeatureError::ConstantColumn(name.to_string()))?;
            out.push((name.to_string(), stats));
        }
        Ok(Self { columns: out })
    }

    pub fn fit_matrix(names: &[String], data: &DMatrix<f64>) -> Result<Self, FeatureError> {
        let cols: Vec<Vec<f64>> = data.column_iter().map(|c| c.iter().copied().collect()).collect();
        Self::fit(names.iter().map(String::as_str).zip(cols.iter().map(Vec::as_slice)))
    }

    pub fn stats(&self, name: &str) -> Result<ColumnStats, FeatureError> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| *s)
            .ok_or_else(|| FeatureError::UnknownColumn(name.to_string()))
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn apply(&self, name: &str, values: &[f64]) -> Result<Vec<f64>, FeatureError> {
        let s = self.stats(name)?;
        Ok(values.iter().map(|&v| s.standardize(v)).collect())
    }

    pub fn invert(&self, name: &str, values: &[f64]) -> Result<Vec<f64>, FeatureError> {
        let s = self.stats(name)?;
        Ok(values.iter().map(|&v| s.restore(v)).collect())
    }

    pub fn apply_matrix(&self, names: &[String], data: &DMatrix<f64>) -> Result<DMatrix<f64>, FeatureError> {
        self.map_matrix(names, data, ColumnStats::standardize)
    }

    pub fn invert_matrix(&self, names: &[String], data: &DMatrix<f64>) -> Result<DMatrix<f64>, FeatureError> {
        self.map_matrix(names, data, ColumnStats::restore)
    }

    fn map_matrix(
        &self,
        names: &[String],
        data: &DMatrix<f64>,
        f: fn(&ColumnStats, f64) -> f64,
    ) -> Result<DMatrix<f64>, FeatureError> {
        if names.len() != data.ncols() {
            return Err(FeatureError::Schema(format!(
                "{} column names for a matrix with {} columns",
                names.len(),
                data.ncols()
            )));
        }
        let mut out = data.clone();
        for (j, name) in names.iter().enumerate() {
            let s = self.stats(name)?;
            for v in out.column_mut(j).iter_mut() {
                *v = f(&s, *v);
            }
        }
        Ok(out)
    }
}
