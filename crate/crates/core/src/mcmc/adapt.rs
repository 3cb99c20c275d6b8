/// Nesterov dual averaging of log step size toward a target acceptance rate.
#[derive(Debug, Clone)]
pub(crate) struct DualAverage {
    log_step: f64,
    log_step_bar: f64,
    h_bar: f64,
    mu: f64,
    count: f64,
}

const GAMMA: f64 = 0.1;
const T0: f64 = 10.0;
const KAPPA: f64 = 0.75;

impl DualAverage {
    pub fn new(initial_step: f64) -> Self {
        Self {
            log_step: initial_step.ln(),
            log_step_bar: initial_step.ln(),
            h_bar: 0.0,
            mu: (10.0 * initial_step).ln(),
            count: 0.0,
        }
    }

    pub fn advance(&mut self, accept_prob: f64, target: f64) {
        self.count += 1.0;
        let w = 1.0 / (self.count + T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (target - accept_prob);
        self.log_step = self.mu - self.h_bar * self.count.sqrt() / GAMMA;
        let eta = self.count.powf(-KAPPA);
        self.log_step_bar = eta * self.log_step + (1.0 - eta) * self.log_step_bar;
    }

    pub fn current(&self) -> f64 {
        self.log_step.exp()
    }

    pub fn adapted(&self) -> f64 {
        self.log_step_bar.exp()
    }
}

/// Welford accumulator for per-coordinate variances.
#[derive(Debug, Clone)]
pub(crate) struct RunningVariance {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningVariance {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn add(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    /// Sample variances shrunk toward 1e-3, as Stan regularizes its metric.
    pub fn regularized(&self) -> Option<Vec<f64>> {
        if self.n < 3 {
            return None;
        }
        let n = self.n as f64;
        let weight = n / (n + 5.0);
        Some(
            self.m2
                .iter()
                .map(|s| weight * s / (n - 1.0) + 1e-3 * (1.0 - weight))
                .collect(),
        )
    }
}
