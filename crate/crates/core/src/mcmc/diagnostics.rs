use serde::{Deserialize, Serialize};

use super::{McmcError, PosteriorDraws};

/// Per-parameter convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub names: Vec<String>,
    /// Classic split-R̂; `+inf` when some chain has zero variance.
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.ess.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Parameters whose R̂ exceeds `threshold`.
    pub fn unconverged(&self, threshold: f64) -> Vec<(&str, f64)> {
        self.names
            .iter()
            .zip(&self.rhat)
            .filter(|(_, r)| !(**r <= threshold))
            .map(|(n, r)| (n.as_str(), *r))
            .collect()
    }
}

pub fn diagnose(draws: &PosteriorDraws) -> Result<Diagnostics, McmcError> {
    if draws.n_chains() < 2 {
        return Err(McmcError::InsufficientDraws(format!(
            "need at least 2 chains, got {}",
            draws.n_chains()
        )));
    }
    if draws.n_iters() < 4 {
        return Err(McmcError::InsufficientDraws(format!(
            "need at least 4 iterations per chain, got {}",
            draws.n_iters()
        )));
    }
    let mut rhat = Vec::with_capacity(draws.dim());
    let mut ess = Vec::with_capacity(draws.dim());
    for p in 0..draws.dim() {
        let chains = draws.param_chains(p);
        rhat.push(split_rhat(&chains));
        ess.push(effective_sample_size(&chains));
    }
    Ok(Diagnostics {
        names: draws.layout().parameter_names(),
        rhat,
        ess,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Between/within variance ratio after splitting each chain in half.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let half = chains.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if half < 2 {
        return f64::NAN;
    }
    let mut pieces: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for chain in chains {
        let n = chain.len();
        pieces.push(&chain[..half]);
        pieces.push(&chain[n - half..]);
    }
    let n = half as f64;
    let means: Vec<f64> = pieces.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = pieces.iter().map(|c| sample_variance(c)).collect();
    if vars.iter().any(|v| *v <= 0.0) {
        return f64::INFINITY;
    }
    let within = mean(&vars);
    let between_over_n = sample_variance(&means);
    let var_plus = (n - 1.0) / n * within + between_over_n;
    (var_plus / within).sqrt()
}

/// Multi-chain ESS using Geyer's initial monotone sequence, capped at the
/// total number of draws.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let total = (m * n) as f64;
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = chains.iter().map(|c| sample_variance(c)).collect();
    if vars.iter().any(|v| *v <= 0.0) {
        return 1.0;
    }
    let nf = n as f64;
    let within = mean(&vars);
    let var_plus = if m > 1 {
        (nf - 1.0) / nf * within + sample_variance(&means)
    } else {
        (nf - 1.0) / nf * within
    };

    let autocov = |lag: usize| -> f64 {
        let sum: f64 = chains
            .iter()
            .zip(&means)
            .map(|(c, mu)| {
                (0..n - lag).map(|t| (c[t] - mu) * (c[t + lag] - mu)).sum::<f64>() / nf
            })
            .sum();
        sum / m as f64
    };
    let rho = |lag: usize| 1.0 - (within - autocov(lag)) / var_plus;

    let mut tau = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let mut pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        tau += pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = (2.0 * tau - 1.0).max(1.0 / total.log10().max(1.0));
    (total / tau).clamp(1.0, total)
}
