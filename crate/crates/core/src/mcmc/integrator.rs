use super::{LogDensity, McmcError};

/// Phase-space point with cached log density and gradient.
#[derive(Debug, Clone)]
pub(crate) struct PhasePoint {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

impl PhasePoint {
    pub fn new<T: LogDensity + ?Sized>(target: &T, position: Vec<f64>, momentum: Vec<f64>) -> Self {
        let mut grad = vec![0.0; position.len()];
        let logp = target.log_density(&position, &mut grad);
        Self {
            position,
            momentum,
            grad,
            logp,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.logp.is_finite() && self.grad.iter().all(|g| g.is_finite())
    }

    pub fn kinetic(&self, inv_mass: &[f64]) -> f64 {
        0.5 * self
            .momentum
            .iter()
            .zip(inv_mass)
            .map(|(p, m)| m * p * p)
            .sum::<f64>()
    }

    /// Potential plus kinetic energy.
    pub fn hamiltonian(&self, inv_mass: &[f64]) -> f64 {
        -self.logp + self.kinetic(inv_mass)
    }
}

/// Integrates `n_steps` leapfrog steps in place. On a non-finite density or
/// gradient, returns the 1-based step at which it appeared.
pub(crate) fn integrate<T: LogDensity + ?Sized>(
    target: &T,
    point: &mut PhasePoint,
    inv_mass: &[f64],
    step_size: f64,
    n_steps: usize,
) -> Result<(), usize> {
    let half = 0.5 * step_size;
    for step in 1..=n_steps {
        for (p, g) in point.momentum.iter_mut().zip(&point.grad) {
            *p += half * g;
        }
        for ((x, p), m) in point.position.iter_mut().zip(&point.momentum).zip(inv_mass) {
            *x += step_size * m * p;
        }
        point.logp = target.log_density(&point.position, &mut point.grad);
        if !point.is_finite() {
            return Err(step);
        }
        for (p, g) in point.momentum.iter_mut().zip(&point.grad) {
            *p += half * g;
        }
    }
    Ok(())
}

/// Runs the leapfrog integrator with a unit mass matrix and returns the
/// trajectory endpoint `(position, momentum)`.
pub fn leapfrog<T: LogDensity + ?Sized>(
    target: &T,
    position: &[f64],
    momentum: &[f64],
    step_size: f64,
    n_steps: usize,
) -> Result<(Vec<f64>, Vec<f64>), McmcError> {
    let dim = target.dim();
    for len in [position.len(), momentum.len()] {
        if len != dim {
            return Err(McmcError::Dimension {
                expected: dim,
                actual: len,
            });
        }
    }
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(McmcError::InvalidConfig(format!(
            "step size must be positive, got {step_size}"
        )));
    }
    if n_steps == 0 {
        return Err(McmcError::InvalidConfig("n_steps must be at least 1".into()));
    }
    let mut point = PhasePoint::new(target, position.to_vec(), momentum.to_vec());
    if !point.is_finite() {
        return Err(McmcError::Divergence { step: 0 });
    }
    let inv_mass = vec![1.0; dim];
    integrate(target, &mut point, &inv_mass, step_size, n_steps)
        .map_err(|step| McmcError::Divergence { step })?;
    Ok((point.position, point.momentum))
}
