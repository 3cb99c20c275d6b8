use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{coef_variation_abs, quantile, MetricsError};
use crate::mcmc::{DrawSpace, PosteriorDraws};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    /// `+inf` when the mean is numerically zero; serialized as `null` in JSON.
    pub coef_variation_abs: f64,
}

impl ParameterSummary {
    /// Summary of pooled draws of one scalar.
    pub fn of(name: &str, values: &[f64]) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::TooFew { needed: 1, got: 0 });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let cv = if values.len() > 1 { coef_variation_abs(values)? } else { f64::NAN };
        Ok(Self {
            name: name.to_string(),
            mean,
            sd,
            q05: quantile(&sorted, 0.05),
            q25: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
            q95: quantile(&sorted, 0.95),
            coef_variation_abs: cv,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub parameters: Vec<ParameterSummary>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// One row per parameter.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for p in &self.parameters {
            out.serialize(p)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Pools all chains and summarizes every parameter on the model scale
/// (unconstrained draws are transformed first).
pub fn summarize_posterior(draws: &PosteriorDraws) -> Result<PosteriorSummary, MetricsError> {
    if draws.total_draws() == 0 {
        return Err(MetricsError::TooFew { needed: 1, got: 0 });
    }
    let owned;
    let draws = match draws.space() {
        DrawSpace::Constrained => draws,
        DrawSpace::Unconstrained => {
            owned = draws.constrained();
            &owned
        }
    };
    let names = draws.layout().parameter_names();
    let parameters = names
        .iter()
        .enumerate()
        .map(|(p, name)| ParameterSummary::of(name, &draws.param_values(p)))
        .collect::<Result<_, _>>()?;
    Ok(PosteriorSummary { parameters })
}
