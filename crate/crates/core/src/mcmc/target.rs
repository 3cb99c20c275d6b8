/// A log density over an unconstrained parameter vector, with its gradient.
///
/// Implementations must be deterministic and read-only: the sampler shares one
/// target across all concurrently running chains.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient at `position` into `grad` and returns the log density.
    fn log_density(&self, position: &[f64], grad: &mut [f64]) -> f64;

    /// Allocating variant of [`LogDensity::log_density`].
    fn eval(&self, position: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.dim()];
        let logp = self.log_density(position, &mut grad);
        (logp, grad)
    }
}

impl<T: LogDensity + ?Sized> LogDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density(&self, position: &[f64], grad: &mut [f64]) -> f64 {
        (**self).log_density(position, grad)
    }
}

/// Wraps a closure `(position, grad) -> logp` as a [`LogDensity`].
pub struct FnDensity<F> {
    dim: usize,
    func: F,
}

impl<F> FnDensity<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, func: F) -> Self {
        Self { dim, func }
    }
}

impl<F> LogDensity for FnDensity<F>
where
    F: Fn(&[f64], &mut [f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, position: &[f64], grad: &mut [f64]) -> f64 {
        (self.func)(position, grad)
    }
}
