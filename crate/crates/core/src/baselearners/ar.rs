use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::BaseLearnerError;

/// `y_t = c + phi_1 y_{t-1} + ... + phi_p y_{t-p} + e_t`, fitted by least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub intercept: f64,
    /// `phi_1..phi_p`, lag 1 first.
    pub coefficients: Vec<f64>,
    /// Last `p` observed values, oldest first.
    history: Vec<f64>,
}

pub fn fit_ar(series: &[f64], p: usize) -> Result<ArModel, BaseLearnerError> {
    if p == 0 {
        return Err(BaseLearnerError::InvalidInput("AR order must be positive".into()));
    }
    if series.len() <= p + 2 {
        return Err(BaseLearnerError::InvalidInput(format!(
            "AR({p}) needs more than {} observations, got {}",
            p + 2,
            series.len()
        )));
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(BaseLearnerError::InvalidInput(format!("non-finite value at position {i}")));
    }
    let history = series[series.len() - p..].to_vec();
    if series.iter().all(|&v| v == series[0]) {
        return Ok(ArModel {
            intercept: series[0],
            coefficients: vec![0.0; p],
            history,
        });
    }

    let rows = series.len() - p;
    let design = DMatrix::from_fn(rows, p + 1, |i, j| if j == 0 { 1.0 } else { series[p + i - j] });
    let response = DVector::from_iterator(rows, series[p..].iter().copied());
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(min_sv > 1e-10 * max_sv) {
        return Err(BaseLearnerError::Singular { p });
    }
    let beta = svd
        .solve(&response, 0.0)
        .map_err(|_| BaseLearnerError::Singular { p })?;
    Ok(ArModel {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        history,
    })
}

impl ArModel {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// Long-run mean `c / (1 - sum phi)`; `None` for a unit root.
    pub fn stationary_mean(&self) -> Option<f64> {
        let denom = 1.0 - self.coefficients.iter().sum::<f64>();
        (denom.abs() > 1e-12).then(|| self.intercept / denom)
    }

    /// Iterates the recursion `horizon` steps past the end of the training series.
    pub fn forecast(&self, horizon: usize) -> Vec<f64> {
        let mut window = self.history.clone();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let next = self.intercept
                + self
                    .coefficients
                    .iter()
                    .zip(window.iter().rev())
                    .map(|(phi, y)| phi * y)
                    .sum::<f64>();
            out.push(next);
            window.remove(0);
            window.push(next);
        }
        out
    }
}
