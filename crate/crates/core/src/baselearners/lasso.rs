use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::BaseLearnerError;
use crate::features::ColumnStats;

const TOLERANCE: f64 = 1e-8;
const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub weights: Vec<f64>,
    pub lambda: f64,
    /// Objective after each full sweep.
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
}

impl LassoFit {
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (x * DVector::from_column_slice(&self.weights)).iter().copied().collect()
    }
}

pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    z.signum() * (z.abs() - lambda).max(0.0)
}

/// `(2n)^-1 ||y - Xw||^2 + lambda ||w||_1`.
pub fn lasso_objective(x: &DMatrix<f64>, y: &[f64], weights: &[f64], lambda: f64) -> f64 {
    let n = y.len() as f64;
    let fitted = x * DVector::from_column_slice(weights);
    let rss: f64 = fitted.iter().zip(y).map(|(f, t)| (t - f).powi(2)).sum();
    rss / (2.0 * n) + lambda * weights.iter().map(|w| w.abs()).sum::<f64>()
}

/// Cyclic coordinate descent until the largest coordinate change in a sweep
/// is below 1e-8. Columns of `x` and `y` must be z-scored.
pub fn fit_lasso(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<LassoFit, BaseLearnerError> {
    let (n, p) = x.shape();
    if p == 0 {
        return Err(BaseLearnerError::InvalidInput("lasso needs at least one column".into()));
    }
    if n != y.len() {
        return Err(BaseLearnerError::InvalidInput(format!("{n} design rows for {} targets", y.len())));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(BaseLearnerError::InvalidInput(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    for (j, col) in x.column_iter().enumerate() {
        let values: Vec<f64> = col.iter().copied().collect();
        if !ColumnStats::of(&values).is_some_and(|s| s.is_standardized()) {
            return Err(BaseLearnerError::Precondition(format!("design column {j} is not z-scored")));
        }
    }
    if !ColumnStats::of(y).is_some_and(|s| s.is_standardized()) {
        return Err(BaseLearnerError::Precondition("target is not z-scored".into()));
    }

    let nf = n as f64;
    let scale: Vec<f64> = x.column_iter().map(|c| c.norm_squared() / nf).collect();
    let mut w = vec![0.0; p];
    let mut residual = DVector::from_column_slice(y);
    let mut trace = Vec::new();
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let col = x.column(j);
            let rho = col.dot(&residual) / nf + w[j] * scale[j];
            let updated = soft_threshold(rho, lambda) / scale[j];
            let delta = updated - w[j];
            if delta != 0.0 {
                residual.axpy(-delta, &col, 1.0);
                w[j] = updated;
            }
            max_change = max_change.max(delta.abs());
        }
        trace.push(lasso_objective(x, y, &w, lambda));
        if max_change < TOLERANCE || sweeps >= MAX_SWEEPS {
            break;
        }
    }
    Ok(LassoFit {
        weights: w,
        lambda,
        objective_trace: trace,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ZScaler;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn zscored(x: DMatrix<f64>, y: Vec<f64>) -> (DMatrix<f64>, Vec<f64>) {
        let names: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        let xs = ZScaler::fit_matrix(&names, &x).unwrap().apply_matrix(&names, &x).unwrap();
        let ys = ZScaler::fit([("y", y.as_slice())]).unwrap().apply("y", &y).unwrap();
        (xs, ys)
    }

    fn random_problem(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = stream_rng(seed, 0);
        let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let y = (0..n)
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut rng);
                2.0 * x[(i, 0)] - x[(i, p - 1)] + 0.5 * e
            })
            .collect();
        zscored(x, y)
    }

    #[test]
    fn zero_penalty_is_least_squares() {
        let (x, y) = random_problem(150, 4, 1);
        let fit = fit_lasso(&x, &y, 0.0).unwrap();
        let ols = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * DVector::from_column_slice(&y)));
        for (a, b) in fit.weights.iter().zip(ols.iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn large_penalty_zeroes_everything() {
        let (x, y) = random_problem(80, 3, 2);
        let max_corr = (x.transpose() * DVector::from_column_slice(&y)).abs().max() / 80.0;
        let fit = fit_lasso(&x, &y, max_corr).unwrap();
        assert!(fit.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn unscaled_input_is_rejected() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert!(matches!(fit_lasso(&x, &[-1.0, 0.0, 1.0], 0.1), Err(BaseLearnerError::Precondition(_))));
    }

    proptest! {
        #[test]
        fn objective_never_increases(seed in 0u64..500, lambda in 0.0f64..0.5) {
            let (x, y) = random_problem(40, 5, seed);
            let fit = fit_lasso(&x, &y, lambda).unwrap();
            for pair in fit.objective_trace.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-12);
            }
        }
    }
}
