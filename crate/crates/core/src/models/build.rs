use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DesignMatrix, Likelihood, ModelError, ModelFamily, ModelSpec, ParameterLayout, Prior, Transform};
use crate::baselearners::StackingInput;
use crate::features::{weekday_dummies, ColumnStats, TimeScale, TimeSeriesFrame};

const MIN_TREND_ROWS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScaling {
    /// Training window mapped to `[0, 1]`.
    #[default]
    UnitInterval,
    /// Days since the first training date.
    Days,
}

impl FromStr for TimeScaling {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unit_interval" | "unit" => Ok(TimeScaling::UnitInterval),
            "days" => Ok(TimeScaling::Days),
            other => Err(ModelError::Input(format!(
                "unknown time scaling `{other}` (expected `unit_interval` or `days`)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrendOptions {
    pub time_scaling: TimeScaling,
    /// Drop closed days (`sales <= 0`) instead of failing on them.
    pub drop_nonpositive: bool,
}

impl Default for TrendOptions {
    fn default() -> Self {
        Self {
            time_scaling: TimeScaling::UnitInterval,
            drop_nonpositive: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HierarchicalOptions {
    /// Stores to model; `None` uses every store in the frame.
    pub stores: Option<Vec<String>>,
    /// The target is `sales / target_scale`; predictions are scaled back.
    pub target_scale: f64,
    pub drop_nonpositive: bool,
}

impl Default for HierarchicalOptions {
    fn default() -> Self {
        Self {
            stores: None,
            target_scale: 1.0,
            drop_nonpositive: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackingLikelihood {
    #[default]
    StudentT,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct StackingOptions {
    pub positive_coefficients: bool,
    pub fixed_nu: Option<f64>,
    pub likelihood: StackingLikelihood,
}

/// First weekday dummy in the design. The hierarchical model leaves Monday
/// out because its store intercepts already absorb the level.
fn first_weekday(family: ModelFamily) -> usize {
    match family {
        ModelFamily::Hierarchical => 2,
        _ => 1,
    }
}

/// Design `[promo, time, wd_k..wd_7]` for the rows of `frame`.
pub(crate) fn calendar_design(
    frame: &TimeSeriesFrame,
    scale: &TimeScale,
    groups: Option<Vec<usize>>,
    family: ModelFamily,
) -> DesignMatrix {
    let first = first_weekday(family);
    let dates = frame.dates();
    let promo = frame.promo();
    let wd = weekday_dummies(&dates);
    let n = dates.len();
    let n_wd = 8 - first;
    let mut values = DMatrix::zeros(n, 2 + n_wd);
    for i in 0..n {
        values[(i, 0)] = promo[i];
        values[(i, 1)] = scale.apply(dates[i]);
        for j in 0..n_wd {
            values[(i, 2 + j)] = wd[(i, first - 1 + j)];
        }
    }
    let mut columns = vec!["promo".to_string(), "time".to_string()];
    columns.extend((first..=7).map(|j| format!("wd_{j}")));
    DesignMatrix {
        columns,
        values,
        groups,
        dates,
    }
}

fn push_calendar_blocks(layout: &mut ParameterLayout, family: ModelFamily) -> Result<(), ModelError> {
    layout.push("beta_promo", 1, Transform::Identity)?;
    layout.push("beta_time", 1, Transform::Identity)?;
    layout.push_labeled(
        "beta_wd",
        (first_weekday(family)..=7).map(|j| j.to_string()).collect(),
        Transform::Identity,
    )?;
    Ok(())
}

fn calendar_priors() -> Vec<(String, Prior)> {
    ["beta_promo", "beta_time", "beta_wd"]
        .into_iter()
        .map(|b| (b.to_string(), Prior::normal(0.0, 1.0)))
        .collect()
}

fn resolve_scale(frame: &TimeSeriesFrame, scaling: TimeScaling) -> TimeScale {
    let first = frame.first_date().expect("non-empty frame");
    let last = frame.last_date().expect("non-empty frame");
    match scaling {
        TimeScaling::UnitInterval => TimeScale::unit_interval(first, last),
        TimeScaling::Days => TimeScale::days(first),
    }
}

fn nonpositive_dates(frame: &TimeSeriesFrame) -> Vec<String> {
    frame
        .rows()
        .iter()
        .filter(|r| !(r.sales > 0.0))
        .map(|r| r.date.to_string())
        .collect()
}

/// Saturating-trend model of `log(sales)` for a single store.
pub fn build_trend_model(frame: &TimeSeriesFrame, options: &TrendOptions) -> Result<ModelSpec, ModelError> {
    let stores = frame.stores();
    if stores.len() > 1 {
        return Err(ModelError::Input(format!(
            "trend model expects one store, found {}: {}",
            stores.len(),
            stores.join(", ")
        )));
    }
    let mut warnings = Vec::new();
    let frame = if options.drop_nonpositive {
        let (kept, dropped) = frame.drop_nonpositive_sales();
        if !dropped.is_empty() {
            warnings.push(format!("dropped {} rows with non-positive sales", dropped.len()));
        }
        kept
    } else {
        let bad = nonpositive_dates(frame);
        if !bad.is_empty() {
            return Err(ModelError::Input(format!(
                "non-positive sales cannot be log-transformed on: {}",
                bad.join(", ")
            )));
        }
        frame.clone()
    };
    if frame.len() < MIN_TREND_ROWS {
        return Err(ModelError::Input(format!(
            "trend model needs at least {MIN_TREND_ROWS} rows with positive sales, got {}",
            frame.len()
        )));
    }

    let scale = resolve_scale(&frame, options.time_scaling);
    let design = calendar_design(&frame, &scale, None, ModelFamily::Trend);
    let target = frame.sales().iter().map(|s| s.ln()).collect();

    let mut layout = ParameterLayout::new();
    layout.push("a", 1, Transform::Identity)?;
    layout.push("b", 1, Transform::Identity)?;
    layout.push("c", 1, Transform::Identity)?;
    push_calendar_blocks(&mut layout, ModelFamily::Trend)?;
    layout.push("sigma", 1, Transform::POSITIVE)?;

    let mut priors = vec![
        ("a".to_string(), Prior::normal(0.0, 5.0)),
        ("b".to_string(), Prior::normal(0.0, 5.0)),
        ("c".to_string(), Prior::normal(0.0, 5.0)),
    ];
    priors.extend(calendar_priors());
    priors.push(("sigma".to_string(), Prior::half_normal(1.0)));

    Ok(ModelSpec {
        family: ModelFamily::Trend,
        likelihood: Likelihood::GaussianOnLogTarget,
        design,
        target,
        layout,
        priors,
        fixed_nu: None,
        group_labels: stores,
        time_scale: Some(scale),
        target_scale: 1.0,
        warnings,
    })
}

/// Per-store intercepts with partial pooling, shared promo, time and weekday
/// effects, on the untransformed (optionally rescaled) sales.
pub fn build_hierarchical_model(
    frame: &TimeSeriesFrame,
    options: &HierarchicalOptions,
) -> Result<ModelSpec, ModelError> {
    if !(options.target_scale > 0.0 && options.target_scale.is_finite()) {
        return Err(ModelError::Domain(format!(
            "target_scale must be positive, got {}",
            options.target_scale
        )));
    }
    let mut warnings = Vec::new();
    let mut frame = match &options.stores {
        Some(stores) => frame.select_stores(stores),
        None => frame.clone(),
    };
    if options.drop_nonpositive {
        let (kept, dropped) = frame.drop_nonpositive_sales();
        if !dropped.is_empty() {
            warnings.push(format!("dropped {} rows with non-positive sales", dropped.len()));
        }
        frame = kept;
    }
    let present = frame.stores();
    if let Some(requested) = &options.stores {
        for s in requested {
            if !present.contains(s) {
                warnings.push(format!("store `{s}` has no rows and was excluded"));
            }
        }
    }
    if present.len() < 2 {
        return Err(ModelError::Precondition(format!(
            "hierarchical model needs at least 2 stores, found {}",
            present.len()
        )));
    }

    let scale = TimeScale::unit_interval(frame.first_date().unwrap(), frame.last_date().unwrap());
    let index: BTreeMap<&str, usize> = present.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let groups = frame.rows().iter().map(|r| index[r.store.as_str()]).collect();
    let design = calendar_design(&frame, &scale, Some(groups), ModelFamily::Hierarchical);
    let target = frame.sales().iter().map(|s| s / options.target_scale).collect();

    let mut layout = ParameterLayout::new();
    layout.push_labeled("alpha", present.clone(), Transform::Identity)?;
    layout.push("mu_alpha", 1, Transform::Identity)?;
    layout.push("tau", 1, Transform::POSITIVE)?;
    push_calendar_blocks(&mut layout, ModelFamily::Hierarchical)?;
    layout.push("sigma", 1, Transform::POSITIVE)?;

    let mut priors = vec![
        ("mu_alpha".to_string(), Prior::normal(0.0, 5.0)),
        ("tau".to_string(), Prior::half_normal(1.0)),
    ];
    priors.extend(calendar_priors());
    priors.push(("sigma".to_string(), Prior::half_normal(1.0)));

    Ok(ModelSpec {
        family: ModelFamily::Hierarchical,
        likelihood: Likelihood::Gaussian,
        design,
        target,
        layout,
        priors,
        fixed_nu: None,
        group_labels: present,
        time_scale: Some(scale),
        target_scale: options.target_scale,
        warnings,
    })
}

/// Stacking regression over already z-scored first-level predictions.
pub fn build_stacking_model(input: &StackingInput, options: &StackingOptions) -> Result<ModelSpec, ModelError> {
    if input.n_models() == 0 {
        return Err(ModelError::Input("stacking needs at least one model column".into()));
    }
    if input.len() < 2 {
        return Err(ModelError::Input("stacking needs at least two rows".into()));
    }
    let columns = input.predictions().column_iter().map(|c| c.iter().copied().collect::<Vec<_>>());
    for (name, values) in input.model_names().iter().zip(columns) {
        check_standardized(name, &values)?;
    }
    check_standardized("target", input.target())?;
    if let Some(nu) = options.fixed_nu {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(ModelError::Domain(format!("fixed_nu must be positive, got {nu}")));
        }
    }

    let beta_transform = if options.positive_coefficients {
        Transform::POSITIVE
    } else {
        Transform::Identity
    };
    let mut layout = ParameterLayout::new();
    layout.push("alpha", 1, Transform::Identity)?;
    layout.push_labeled("beta", input.model_names().to_vec(), beta_transform)?;
    layout.push("sigma", 1, Transform::POSITIVE)?;

    let beta_prior = if options.positive_coefficients {
        Prior::half_normal(1.0)
    } else {
        Prior::normal(0.0, 1.0)
    };
    let mut priors = vec![
        ("alpha".to_string(), Prior::normal(0.0, 1.0)),
        ("beta".to_string(), beta_prior),
        ("sigma".to_string(), Prior::half_normal(1.0)),
    ];

    let (likelihood, fixed_nu) = match options.likelihood {
        StackingLikelihood::Gaussian => (Likelihood::Gaussian, None),
        StackingLikelihood::StudentT => {
            if options.fixed_nu.is_none() {
                layout.push("nu", 1, Transform::LogForPositive { lower: 1.0 })?;
                priors.push((
                    "nu".to_string(),
                    Prior {
                        on_unconstrained: true,
                        ..Prior::normal(0.0, 1.0)
                    },
                ));
            }
            (Likelihood::StudentT, options.fixed_nu)
        }
    };

    Ok(ModelSpec {
        family: ModelFamily::Stacking,
        likelihood,
        design: stacking_design(input),
        target: input.target().to_vec(),
        layout,
        priors,
        fixed_nu,
        group_labels: Vec::new(),
        time_scale: None,
        target_scale: 1.0,
        warnings: Vec::new(),
    })
}

pub(crate) fn stacking_design(input: &StackingInput) -> DesignMatrix {
    DesignMatrix {
        columns: input.model_names().to_vec(),
        values: input.predictions().clone(),
        groups: None,
        dates: input.dates().to_vec(),
    }
}

fn check_standardized(name: &str, values: &[f64]) -> Result<(), ModelError> {
    let stats = ColumnStats::of(values)
        .ok_or_else(|| ModelError::Precondition(format!("column `{name}` has fewer than two values")))?;
    if !stats.is_standardized() {
        return Err(ModelError::Precondition(format!(
            "column `{name}` is not z-scored (mean {:.3e}, sd {:.6})",
            stats.mean, stats.sd
        )));
    }
    Ok(())
}

impl ModelSpec {
    /// Design rows for new observations of a trend or hierarchical model,
    /// using the training time scale and store index.
    pub fn design_for(&self, frame: &TimeSeriesFrame) -> Result<DesignMatrix, ModelError> {
        let scale = self
            .time_scale
            .ok_or_else(|| ModelError::Schema("model has no calendar design; use a stacking input".into()))?;
        let groups = match self.family {
            ModelFamily::Hierarchical => {
                let mut groups = Vec::with_capacity(frame.len());
                for r in frame.rows() {
                    let g = self
                        .group_labels
                        .iter()
                        .position(|s| *s == r.store)
                        .ok_or_else(|| ModelError::Schema(format!("store `{}` is not part of the model", r.store)))?;
                    groups.push(g);
                }
                Some(groups)
            }
            _ => None,
        };
        Ok(calendar_design(frame, &scale, groups, self.family))
    }

    /// Design rows for a stacking model from new first-level predictions.
    pub fn stacking_design_for(&self, input: &StackingInput) -> DesignMatrix {
        stacking_design(input)
    }
}
