use super::LogDensity;

/// Analytic versus central-difference gradient at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// Per coordinate `|analytic - numeric| / max(1, |numeric|)`.
    pub relative_error: Vec<f64>,
}

impl GradientCheck {
    pub fn max_error(&self) -> f64 {
        self.relative_error.iter().copied().fold(0.0, f64::max)
    }

    /// Index and error of the worst coordinate.
    pub fn worst(&self) -> (usize, f64) {
        self.relative_error
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |best, (i, e)| if e > best.1 || e.is_nan() { (i, e) } else { best })
    }
}

/// Compares the target's gradient with central differences of step `h`.
pub fn check_gradient<T: LogDensity + ?Sized>(target: &T, position: &[f64], h: f64) -> GradientCheck {
    let (_, analytic) = target.eval(position);
    let mut scratch = vec![0.0; target.dim()];
    let mut probe = position.to_vec();
    let numeric: Vec<f64> = (0..position.len())
        .map(|i| {
            probe[i] = position[i] + h;
            let up = target.log_density(&probe, &mut scratch);
            probe[i] = position[i] - h;
            let down = target.log_density(&probe, &mut scratch);
            probe[i] = position[i];
            (up - down) / (2.0 * h)
        })
        .collect();
    let relative_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / n.abs().max(1.0))
        .collect();
    GradientCheck {
        analytic,
        numeric,
        relative_error,
    }
}
