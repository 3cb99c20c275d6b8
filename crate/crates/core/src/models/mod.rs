//! The three regression families compiled to log densities.
//!
//! * **trend**: `log(sales) ~ N(mu, sigma)` with
//!   `mu = a / (1 + exp(b t + c)) + b_promo promo + b_time t + sum_j b_wd[j] weekday_j`.
//! * **hierarchical**: `sales ~ N(mu, sigma)` with a per-store intercept
//!   `alpha[store] ~ N(mu_alpha, tau)` in place of the logistic term.
//! * **stacking**: `y ~ StudentT(nu, alpha + sum_i beta_i x_i, sigma)` over
//!   z-scored first-level predictions, optionally with `beta_i > 0` or a fixed `nu`.
//!
//! Positive parameters are sampled on the log scale; the log-Jacobian of each
//! transform is part of the density.

mod build;
mod density;
mod layout;
mod predictive;

pub use build::{
    build_hierarchical_model, build_stacking_model, build_trend_model, HierarchicalOptions, StackingLikelihood,
    StackingOptions, TimeScaling, TrendOptions,
};
pub use density::{log_posterior, normal_logpdf, student_t_logpdf, DensityParts, ModelPosterior};
pub use layout::{ParameterBlock, ParameterLayout, Transform};
pub use predictive::{conditional_mean, posterior_predictive, PredictiveDraws};

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, TimeScale};
use crate::mcmc::{hmc_sample, HmcConfig, McmcError, PosteriorDraws};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("layout error: {0}")]
    Layout(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Mcmc(#[from] McmcError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// Gaussian on a log-transformed target; predictions are exponentiated back.
    GaussianOnLogTarget,
    Gaussian,
    StudentT,
}

/// Shape of the mean function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Trend,
    Hierarchical,
    Stacking,
}

/// Normal prior on one block. With `truncated_at_zero` the block must carry a
/// positivity transform and the density is the half-normal. With
/// `on_unconstrained` the prior applies to the sampler coordinate itself
/// (used for `log(nu - 1)`), so no Jacobian enters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub mean: f64,
    pub sd: f64,
    #[serde(default)]
    pub truncated_at_zero: bool,
    #[serde(default)]
    pub on_unconstrained: bool,
}

impl Prior {
    pub fn normal(mean: f64, sd: f64) -> Self {
        Self {
            mean,
            sd,
            truncated_at_zero: false,
            on_unconstrained: false,
        }
    }

    pub fn half_normal(sd: f64) -> Self {
        Self {
            truncated_at_zero: true,
            ..Self::normal(0.0, sd)
        }
    }
}

/// Named design columns plus the row metadata needed to predict.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub columns: Vec<String>,
    pub values: DMatrix<f64>,
    /// Group (store) index per row, hierarchical models only.
    pub groups: Option<Vec<usize>>,
    pub dates: Vec<NaiveDate>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    /// Columns reordered to match `names`; missing names are reported together.
    pub fn reordered(&self, names: &[String]) -> Result<DesignMatrix, ModelError> {
        let missing: Vec<&str> = names
            .iter()
            .filter(|n| !self.columns.contains(n))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(ModelError::Schema(format!("missing design columns: {}", missing.join(", "))));
        }
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.columns.iter().position(|c| c == n).unwrap())
            .collect();
        let values = DMatrix::from_fn(self.nrows(), idx.len(), |i, j| self.values[(i, idx[j])]);
        Ok(DesignMatrix {
            columns: names.to_vec(),
            values,
            groups: self.groups.clone(),
            dates: self.dates.clone(),
        })
    }
}

/// A compiled model: data, parameter layout, priors and likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub likelihood: Likelihood,
    pub design: DesignMatrix,
    pub target: Vec<f64>,
    pub layout: ParameterLayout,
    /// Priors keyed by block name. The hierarchical `alpha` block has no entry:
    /// its prior is `N(mu_alpha, tau)`.
    pub priors: Vec<(String, Prior)>,
    pub fixed_nu: Option<f64>,
    /// Store ids in group-index order (hierarchical only).
    pub group_labels: Vec<String>,
    pub time_scale: Option<TimeScale>,
    /// Hierarchical target is `sales / target_scale`.
    pub target_scale: f64,
    /// Non-fatal notes from model building (e.g. excluded stores, dropped rows).
    pub warnings: Vec<String>,
}

impl ModelSpec {
    pub fn prior(&self, block: &str) -> Option<&Prior> {
        self.priors.iter().find(|(n, _)| n == block).map(|(_, p)| p)
    }

    /// Replaces the prior of an existing block.
    pub fn set_prior(&mut self, block: &str, prior: Prior) -> Result<(), ModelError> {
        if !(prior.sd > 0.0 && prior.sd.is_finite() && prior.mean.is_finite()) {
            return Err(ModelError::Domain(format!("prior for `{block}` needs finite mean and sd > 0")));
        }
        let transform = self
            .layout
            .block(block)
            .ok_or_else(|| ModelError::Layout(format!("no block named `{block}`")))?
            .transform;
        if prior.truncated_at_zero && transform.is_identity() {
            return Err(ModelError::Domain(format!(
                "block `{block}` is unconstrained; a zero-truncated prior needs a positive block"
            )));
        }
        match self.priors.iter_mut().find(|(n, _)| n == block) {
            Some(slot) => slot.1 = prior,
            None => {
                return Err(ModelError::Layout(format!(
                    "block `{block}` has a structural prior that cannot be replaced"
                )))
            }
        }
        Ok(())
    }

    /// Same model with every observation removed; the density becomes the prior.
    pub fn without_observations(&self) -> ModelSpec {
        let mut out = self.clone();
        out.design.values = DMatrix::zeros(0, self.design.columns.len());
        out.design.groups = self.design.groups.as_ref().map(|_| Vec::new());
        out.design.dates.clear();
        out.target.clear();
        out
    }

    /// Layout index of the coefficient of design column 0. Coefficients of
    /// all design columns are contiguous from here.
    pub(crate) fn coefficient_offset(&self) -> usize {
        let block = match self.family {
            ModelFamily::Trend | ModelFamily::Hierarchical => "beta_promo",
            ModelFamily::Stacking => "beta",
        };
        self.layout.range(block).expect("layout built with coefficients").start
    }

    /// Unconstrained starting point near the data scale.
    pub fn default_init(&self) -> Vec<f64> {
        let mut init = vec![0.0; self.layout.total_dim()];
        let n = self.target.len();
        let mean = if n > 0 { self.target.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let sd = if n > 1 {
            (self.target.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
        } else {
            1.0
        };
        let log_sd = if sd > 0.0 && sd.is_finite() { sd.ln() } else { 0.0 };
        let mut set = |block: &str, value: f64| {
            if let Some(r) = self.layout.range(block) {
                for v in &mut init[r] {
                    *v = value;
                }
            }
        };
        match self.family {
            ModelFamily::Trend => match self.trend_profile_fit() {
                Some(fit) => {
                    let sigma = self.layout.range("sigma").expect("sigma block").start;
                    init[..sigma].copy_from_slice(&fit.params);
                    init[sigma] = fit.rmse.max(1e-3).ln();
                    return init;
                }
                None => {
                    set("a", 1.0);
                    set("beta_wd", mean);
                }
            },
            ModelFamily::Hierarchical => {
                set("alpha", mean);
                set("mu_alpha", mean);
                set("tau", 0.0);
            }
            ModelFamily::Stacking => {
                if let Some(block) = self.layout.block("beta") {
                    if !block.transform.is_identity() {
                        set("beta", (0.5_f64).ln());
                    }
                }
                set("nu", 9.0_f64.ln());
            }
        }
        set("sigma", log_sd.min(0.0));
        init
    }

    /// Least-squares fit of the trend mean over a grid of `(b, c)`. With those
    /// two fixed the mean is linear in everything else, so each grid point is
    /// one small solve. The best point is mapped to the `a > 0` branch.
    fn trend_profile_fit(&self) -> Option<ProfileFit> {
        let x = &self.design.values;
        let (n, p) = x.shape();
        if n <= p + 1 {
            return None;
        }
        let time_col = self.design.columns.iter().position(|c| c == "time")?;
        let y = DVector::from_column_slice(&self.target);
        let grid: Vec<f64> = (-30..=30).map(|k| k as f64 * 0.5).collect();
        let mut best: Option<(f64, f64, f64, DVector<f64>)> = None;
        for &b in &grid {
            for &c in &grid {
                let mut aug = DMatrix::zeros(n, p + 1);
                for r in 0..n {
                    aug[(r, 0)] = 1.0 / (1.0 + (b * x[(r, time_col)] + c).exp());
                }
                aug.columns_mut(1, p).copy_from(x);
                let mut gram = aug.transpose() * &aug;
                for d in 0..=p {
                    gram[(d, d)] += 1e-6;
                }
                let Some(chol) = gram.cholesky() else { continue };
                let coef = chol.solve(&(aug.transpose() * &y));
                let rss = (&y - &aug * &coef).norm_squared();
                if rss.is_finite() && best.as_ref().map_or(true, |(r, ..)| rss < *r) {
                    best = Some((rss, b, c, coef));
                }
            }
        }
        let (rss, mut b, mut c, coef) = best?;
        let mut a = coef[0];
        let mut rest: Vec<f64> = coef.iter().skip(1).copied().collect();
        if a < 0.0 {
            // a s(u) = a + (-a) s(-u); the constant goes to the weekday dummies.
            let wd_start = self.design.columns.iter().position(|c| c.starts_with("wd_"))?;
            for v in &mut rest[wd_start..] {
                *v += a;
            }
            a = -a;
            b = -b;
            c = -c;
        }
        let mut params = vec![a, b, c];
        params.extend(rest);
        Some(ProfileFit {
            params,
            rmse: (rss / n as f64).sqrt(),
        })
    }

    /// Number of observation rows.
    pub fn n_obs(&self) -> usize {
        self.target.len()
    }
}

struct ProfileFit {
    params: Vec<f64>,
    rmse: f64,
}

/// Samples the posterior of `spec` and attaches its layout to the draws.
/// Draws stay on the unconstrained scale; call
/// [`PosteriorDraws::constrained`] for model-scale values.
pub fn sample_posterior(spec: &ModelSpec, config: &HmcConfig) -> Result<PosteriorDraws, ModelError> {
    let target = log_posterior(spec)?;
    let draws = hmc_sample(&target, &spec.default_init(), config)?;
    Ok(draws.with_layout(spec.layout.clone())?)
}
