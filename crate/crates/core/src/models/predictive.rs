use std::io::Write;

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;

use super::density::mean_function;
use super::{DesignMatrix, Likelihood, ModelError, ModelFamily, ModelSpec};
use crate::mcmc::PosteriorDraws;
use crate::metrics::quantile;
use crate::rng::stream_rng;

/// Posterior predictive samples indexed `[draw][time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDraws {
    n_draws: usize,
    values: Vec<f64>,
    pub dates: Vec<NaiveDate>,
    /// Store id per time point, when the rows span several stores.
    pub series: Option<Vec<String>>,
}

impl PredictiveDraws {
    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_times(&self) -> usize {
        self.dates.len()
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        let n = self.n_times();
        &self.values[i * n..(i + 1) * n]
    }

    /// All draws at one time point.
    pub fn at(&self, t: usize) -> Vec<f64> {
        (0..self.n_draws).map(|i| self.draw(i)[t]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.n_times())
            .map(|t| self.at(t).iter().sum::<f64>() / self.n_draws as f64)
            .collect()
    }

    /// Per-time empirical quantile (linear interpolation between order statistics).
    pub fn quantile(&self, q: f64) -> Vec<f64> {
        (0..self.n_times())
            .map(|t| {
                let mut col = self.at(t);
                col.sort_by(f64::total_cmp);
                quantile(&col, q)
            })
            .collect()
    }

    /// Applies `f` to every value (e.g. undoing a z-score).
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// CSV `date, draw, value`, with a `store` column after `date` when the
    /// rows span several stores.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        match &self.series {
            Some(_) => out.write_record(["date", "store", "draw", "value"])?,
            None => out.write_record(["date", "draw", "value"])?,
        }
        for t in 0..self.n_times() {
            for d in 0..self.n_draws {
                let date = self.dates[t].to_string();
                let value = self.draw(d)[t].to_string();
                match &self.series {
                    Some(s) => out.write_record([date, s[t].clone(), d.to_string(), value])?,
                    None => out.write_record([date, d.to_string(), value])?,
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn prepare<'a>(
    spec: &ModelSpec,
    draws: &'a PosteriorDraws,
    new_design: &DesignMatrix,
) -> Result<(DesignMatrix, std::borrow::Cow<'a, PosteriorDraws>), ModelError> {
    let design = new_design.reordered(&spec.design.columns)?;
    if spec.family == ModelFamily::Hierarchical {
        match &design.groups {
            Some(g) if g.len() == design.nrows() && g.iter().all(|&i| i < spec.group_labels.len()) => {}
            _ => return Err(ModelError::Schema("hierarchical prediction needs a valid store index per row".into())),
        }
    }
    if design.dates.len() != design.nrows() {
        return Err(ModelError::Schema("design dates do not match its rows".into()));
    }
    if draws.dim() != spec.layout.total_dim() {
        return Err(ModelError::Schema(format!(
            "draws have {} parameters, model has {}",
            draws.dim(),
            spec.layout.total_dim()
        )));
    }
    let constrained = match draws.space() {
        crate::mcmc::DrawSpace::Constrained => std::borrow::Cow::Borrowed(draws),
        crate::mcmc::DrawSpace::Unconstrained => {
            let with_layout = draws.clone().with_layout(spec.layout.clone())?;
            std::borrow::Cow::Owned(with_layout.constrained())
        }
    };
    Ok((design, constrained))
}

fn series_labels(spec: &ModelSpec, design: &DesignMatrix) -> Option<Vec<String>> {
    match (&design.groups, spec.family) {
        (Some(g), ModelFamily::Hierarchical) => Some(g.iter().map(|&i| spec.group_labels[i].clone()).collect()),
        _ => None,
    }
}

/// One predictive sample per retained posterior draw and design row. Draw `i`
/// uses its own random stream derived from `(seed, i)`.
pub fn posterior_predictive(
    spec: &ModelSpec,
    draws: &PosteriorDraws,
    new_design: &DesignMatrix,
    seed: u64,
) -> Result<PredictiveDraws, ModelError> {
    let (design, draws) = prepare(spec, draws, new_design)?;
    let mean = mean_function(spec);
    let sigma_idx = spec.layout.range("sigma").expect("sigma block").start;
    let nu_idx = spec.layout.range("nu").map(|r| r.start);
    let n = design.nrows();
    let all: Vec<&[f64]> = draws.iter_draws().collect();

    let per_draw: Vec<Result<Vec<f64>, ModelError>> = all
        .par_iter()
        .enumerate()
        .map(|(i, params)| {
            let mut rng = stream_rng(seed, i as u64);
            let sigma = params[sigma_idx];
            let t_dist = match spec.likelihood {
                Likelihood::StudentT => {
                    let nu = spec.fixed_nu.or(nu_idx.map(|k| params[k])).unwrap();
                    Some(StudentT::new(nu).map_err(|e| ModelError::Domain(e.to_string()))?)
                }
                _ => None,
            };
            let mut row = Vec::with_capacity(n);
            for r in 0..n {
                let mu = mean(params, &design, r);
                let noise: f64 = match &t_dist {
                    Some(t) => t.sample(&mut rng),
                    None => rng.sample(StandardNormal),
                };
                let y = mu + sigma * noise;
                row.push(match spec.likelihood {
                    Likelihood::GaussianOnLogTarget => y.exp(),
                    _ => y * spec.target_scale,
                });
            }
            Ok(row)
        })
        .collect();

    let mut values = Vec::with_capacity(all.len() * n);
    for row in per_draw {
        values.extend(row?);
    }
    Ok(PredictiveDraws {
        n_draws: all.len(),
        values,
        dates: design.dates.clone(),
        series: series_labels(spec, &design),
    })
}

/// Posterior mean of `E[y | parameters]` per design row, on the sales scale.
/// For the log-target model this averages `exp(mu + sigma^2 / 2)`.
pub fn conditional_mean(
    spec: &ModelSpec,
    draws: &PosteriorDraws,
    new_design: &DesignMatrix,
) -> Result<Vec<f64>, ModelError> {
    let (design, draws) = prepare(spec, draws, new_design)?;
    let mean = mean_function(spec);
    let sigma_idx = spec.layout.range("sigma").expect("sigma block").start;
    let n = design.nrows();
    let mut sums = vec![0.0; n];
    for params in draws.iter_draws() {
        let sigma = params[sigma_idx];
        for (r, s) in sums.iter_mut().enumerate() {
            let mu = mean(params, &design, r);
            *s += match spec.likelihood {
                Likelihood::GaussianOnLogTarget => (mu + 0.5 * sigma * sigma).exp(),
                _ => mu * spec.target_scale,
            };
        }
    }
    let total = draws.total_draws() as f64;
    Ok(sums.into_iter().map(|s| s / total).collect())
}
