use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adapt::{DualAverage, RunningVariance};
use super::integrator::{integrate, PhasePoint};
use super::{DrawSpace, LogDensity, McmcError, PosteriorDraws};
use crate::models::ParameterLayout;
use crate::rng::stream_rng;

/// Energy error above which a transition counts as divergent.
const DIVERGENCE_THRESHOLD: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmcConfig {
    pub chains: usize,
    pub warmup_iters: usize,
    pub sample_iters: usize,
    pub target_accept: f64,
    /// Each transition draws its step count uniformly from `1..=max_leapfrog_steps`.
    pub max_leapfrog_steps: usize,
    pub seed: u64,
    /// Chains start at `init + U(-init_jitter, init_jitter)` per coordinate.
    pub init_jitter: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup_iters: 1000,
            sample_iters: 1000,
            target_accept: 0.8,
            max_leapfrog_steps: 64,
            seed: 0,
            init_jitter: 0.1,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<(), McmcError> {
        let counts = [
            ("chains", self.chains),
            ("warmup_iters", self.warmup_iters),
            ("sample_iters", self.sample_iters),
            ("max_leapfrog_steps", self.max_leapfrog_steps),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(McmcError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(McmcError::InvalidConfig(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if !(self.init_jitter >= 0.0 && self.init_jitter.is_finite()) {
            return Err(McmcError::InvalidConfig(format!(
                "init_jitter must be a finite non-negative number, got {}",
                self.init_jitter
            )));
        }
        Ok(())
    }
}

struct Transition {
    accept_prob: f64,
    divergent: bool,
}

struct ChainOutput {
    draws: Vec<f64>,
    accept_rate: f64,
    step_size: f64,
    divergences: usize,
}

/// Samples `target` with `config.chains` independent HMC chains started near
/// `init`. Warmup draws are discarded; the returned draws live on the
/// unconstrained space of the target under a single `theta` block layout.
pub fn hmc_sample<T: LogDensity + ?Sized>(
    target: &T,
    init: &[f64],
    config: &HmcConfig,
) -> Result<PosteriorDraws, McmcError> {
    config.validate()?;
    let dim = target.dim();
    if init.len() != dim {
        return Err(McmcError::Dimension {
            expected: dim,
            actual: init.len(),
        });
    }
    if let Some(i) = init.iter().position(|v| !v.is_finite()) {
        return Err(McmcError::InvalidInit(format!("coordinate {i} is not finite")));
    }

    let outputs = (0..config.chains)
        .into_par_iter()
        .map(|chain| run_chain(target, init, config, chain))
        .collect::<Result<Vec<_>, _>>()?;

    let mut values = Vec::with_capacity(config.chains * config.sample_iters * dim);
    let mut accept_rate = Vec::with_capacity(config.chains);
    let mut step_size = Vec::with_capacity(config.chains);
    let mut divergences = Vec::with_capacity(config.chains);
    for out in outputs {
        values.extend_from_slice(&out.draws);
        accept_rate.push(out.accept_rate);
        step_size.push(out.step_size);
        divergences.push(out.divergences);
    }
    let mut draws = PosteriorDraws::from_flat(
        config.chains,
        config.sample_iters,
        values,
        ParameterLayout::unnamed(dim),
        DrawSpace::Unconstrained,
    )?;
    draws.accept_rate = accept_rate;
    draws.step_size = step_size;
    draws.divergences = divergences;
    Ok(draws)
}

fn run_chain<T: LogDensity + ?Sized>(
    target: &T,
    init: &[f64],
    config: &HmcConfig,
    chain: usize,
) -> Result<ChainOutput, McmcError> {
    let dim = target.dim();
    let mut rng = stream_rng(config.seed, chain as u64);
    let mut point = initial_point(target, init, config.init_jitter, &mut rng, chain)?;
    let mut inv_mass = vec![1.0; dim];

    let mut dual = DualAverage::new(initial_step_size(target, &point, &inv_mass, &mut rng));
    let windows = MassWindows::new(config.warmup_iters);
    let mut variance = RunningVariance::new(dim);

    for iter in 0..config.warmup_iters {
        let n_steps = rng.random_range(1..=config.max_leapfrog_steps);
        let t = transition(target, &mut point, &inv_mass, dual.current(), n_steps, &mut rng);
        dual.advance(t.accept_prob, config.target_accept);

        if windows.collects(iter) {
            variance.add(&point.position);
        }
        if windows.closes(iter) {
            if let Some(v) = variance.regularized() {
                inv_mass = v;
                let step = initial_step_size(target, &point, &inv_mass, &mut rng);
                dual = DualAverage::new(step);
            }
            variance = RunningVariance::new(dim);
        }
    }

    let step_size = dual.adapted();
    let mut draws = Vec::with_capacity(config.sample_iters * dim);
    let mut accept_sum = 0.0;
    let mut divergences = 0;
    for _ in 0..config.sample_iters {
        let n_steps = rng.random_range(1..=config.max_leapfrog_steps);
        let t = transition(target, &mut point, &inv_mass, step_size, n_steps, &mut rng);
        accept_sum += t.accept_prob;
        divergences += usize::from(t.divergent);
        draws.extend_from_slice(&point.position);
    }
    if 2 * divergences > config.sample_iters {
        return Err(McmcError::SamplingFailure {
            chain,
            divergent: divergences,
            total: config.sample_iters,
        });
    }
    Ok(ChainOutput {
        draws,
        accept_rate: accept_sum / config.sample_iters as f64,
        step_size,
        divergences,
    })
}

fn initial_point<T: LogDensity + ?Sized>(
    target: &T,
    init: &[f64],
    jitter: f64,
    rng: &mut ChaCha8Rng,
    chain: usize,
) -> Result<PhasePoint, McmcError> {
    let dim = init.len();
    let mut scale = jitter;
    for _ in 0..100 {
        let position: Vec<f64> = init
            .iter()
            .map(|&x| {
                if scale > 0.0 {
                    x + rng.random_range(-scale..=scale)
                } else {
                    x
                }
            })
            .collect();
        let point = PhasePoint::new(target, position, vec![0.0; dim]);
        if point.is_finite() {
            return Ok(point);
        }
        scale *= 0.5;
    }
    Err(McmcError::InvalidInit(format!(
        "chain {chain}: log density or gradient is not finite near the initial point"
    )))
}

/// Doubles or halves the step until a single leapfrog step crosses 50%
/// acceptance.
fn initial_step_size<T: LogDensity + ?Sized>(
    target: &T,
    start: &PhasePoint,
    inv_mass: &[f64],
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut point = start.clone();
    resample_momentum(&mut point, inv_mass, rng);
    let h0 = point.hamiltonian(inv_mass);
    let log_accept = |step: f64| {
        let mut trial = point.clone();
        match integrate(target, &mut trial, inv_mass, step, 1) {
            Ok(()) => {
                let delta = h0 - trial.hamiltonian(inv_mass);
                if delta.is_finite() {
                    delta
                } else {
                    f64::NEG_INFINITY
                }
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let mut step = 1.0;
    let half = 0.5_f64.ln();
    let direction = if log_accept(step) > half { 1.0 } else { -1.0 };
    for _ in 0..60 {
        let la = log_accept(step);
        let crossed = if direction > 0.0 { la <= half } else { la > half };
        if crossed {
            break;
        }
        step *= 2.0_f64.powf(direction);
    }
    step.clamp(1e-8, 1e3)
}

fn resample_momentum(point: &mut PhasePoint, inv_mass: &[f64], rng: &mut ChaCha8Rng) {
    for (p, m) in point.momentum.iter_mut().zip(inv_mass) {
        let z: f64 = rng.sample(StandardNormal);
        *p = z / m.sqrt();
    }
}

fn transition<T: LogDensity + ?Sized>(
    target: &T,
    point: &mut PhasePoint,
    inv_mass: &[f64],
    step_size: f64,
    n_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Transition {
    resample_momentum(point, inv_mass, rng);
    let h0 = point.hamiltonian(inv_mass);
    let mut proposal = point.clone();
    let integrated = integrate(target, &mut proposal, inv_mass, step_size, n_steps);
    let delta = match integrated {
        Ok(()) => proposal.hamiltonian(inv_mass) - h0,
        Err(_) => f64::INFINITY,
    };
    let divergent = !delta.is_finite() || delta > DIVERGENCE_THRESHOLD;
    let accept_prob = if divergent { 0.0 } else { (-delta).exp().min(1.0) };
    let u: f64 = rng.random();
    if u < accept_prob {
        *point = proposal;
    }
    Transition {
        accept_prob,
        divergent,
    }
}

/// Warmup schedule: step size only for the first 15%, a first metric window
/// up to 50%, the final metric window from 50% to 75%, then step size only
/// for the last quarter so the averaged step can settle.
struct MassWindows {
    first: (usize, usize),
    second: (usize, usize),
}

impl MassWindows {
    fn new(warmup: usize) -> Self {
        if warmup < 40 {
            return Self {
                first: (0, 0),
                second: (0, 0),
            };
        }
        let at = |frac: f64| (warmup as f64 * frac).round() as usize;
        Self {
            first: (at(0.15), at(0.5)),
            second: (at(0.5), at(0.75)),
        }
    }

    fn collects(&self, iter: usize) -> bool {
        (self.first.0..self.first.1).contains(&iter) || (self.second.0..self.second.1).contains(&iter)
    }

    fn closes(&self, iter: usize) -> bool {
        (self.first.1 > 0 && iter + 1 == self.first.1) || (self.second.1 > 0 && iter + 1 == self.second.1)
    }
}
