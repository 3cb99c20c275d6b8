use std::f64::consts::{LN_2, PI};
use std::ops::Range;

use statrs::function::gamma::{digamma, ln_gamma};

use super::{DesignMatrix, Likelihood, ModelError, ModelFamily, ModelSpec, Prior, Transform};
use crate::mcmc::LogDensity;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -HALF_LN_2PI - sd.ln() - 0.5 * z * z
}

/// Location-scale Student-t log density.
pub fn student_t_logpdf(y: f64, nu: f64, mu: f64, sigma: f64) -> Result<f64, ModelError> {
    if !(nu > 0.0) || !(sigma > 0.0) {
        return Err(ModelError::Domain(format!(
            "student-t needs nu > 0 and sigma > 0, got nu = {nu}, sigma = {sigma}"
        )));
    }
    let z = (y - mu) / sigma;
    Ok(student_t_const(nu) - sigma.ln() - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p())
}

fn student_t_const(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
}

/// Index bookkeeping resolved once per spec.
#[derive(Debug, Clone)]
struct Slots {
    coef: usize,
    sigma: usize,
    nu: Option<usize>,
    logistic: Option<[usize; 3]>,
    time_col: usize,
    intercept: Option<usize>,
    hier: Option<(Range<usize>, usize, usize)>,
}

impl Slots {
    fn new(spec: &ModelSpec) -> Self {
        let idx = |name: &str| spec.layout.range(name).map(|r| r.start);
        let time_col = spec.design.columns.iter().position(|c| c == "time").unwrap_or(usize::MAX);
        Slots {
            coef: spec.coefficient_offset(),
            sigma: idx("sigma").expect("sigma block"),
            nu: idx("nu"),
            logistic: match spec.family {
                ModelFamily::Trend => Some([idx("a").unwrap(), idx("b").unwrap(), idx("c").unwrap()]),
                _ => None,
            },
            time_col,
            intercept: match spec.family {
                ModelFamily::Stacking => idx("alpha"),
                _ => None,
            },
            hier: match spec.family {
                ModelFamily::Hierarchical => Some((
                    spec.layout.range("alpha").unwrap(),
                    idx("mu_alpha").unwrap(),
                    idx("tau").unwrap(),
                )),
                _ => None,
            },
        }
    }

    /// Linear predictor for one row, plus what the gradient pass needs.
    fn row_mean(&self, params: &[f64], design: &DesignMatrix, row: usize) -> RowMean {
        let x = &design.values;
        let mut mu = 0.0;
        for j in 0..x.ncols() {
            mu += x[(row, j)] * params[self.coef + j];
        }
        let mut logistic = None;
        if let Some([a, b, c]) = self.logistic {
            let t = x[(row, self.time_col)];
            let u = params[b] * t + params[c];
            // s = 1 / (1 + exp(u)), evaluated without overflow.
            let s = if u > 0.0 {
                let e = (-u).exp();
                e / (1.0 + e)
            } else {
                1.0 / (1.0 + u.exp())
            };
            mu += params[a] * s;
            logistic = Some((t, s));
        }
        let group = match (&self.hier, &design.groups) {
            (Some((alpha, _, _)), Some(groups)) => Some(alpha.start + groups[row]),
            _ => None,
        };
        if let Some(g) = group {
            mu += params[g];
        }
        if let Some(i) = self.intercept {
            mu += params[i];
        }
        RowMean { mu, logistic, group }
    }

    /// Adds `w * d mu / d param` for one row into `grad`.
    fn add_mean_grad(&self, params: &[f64], design: &DesignMatrix, row: usize, m: &RowMean, w: f64, grad: &mut [f64]) {
        let x = &design.values;
        for j in 0..x.ncols() {
            grad[self.coef + j] += w * x[(row, j)];
        }
        if let (Some([a, b, c]), Some((t, s))) = (self.logistic, m.logistic) {
            let ds = -params[a] * s * (1.0 - s);
            grad[a] += w * s;
            grad[b] += w * ds * t;
            grad[c] += w * ds;
        }
        if let Some(g) = m.group {
            grad[g] += w;
        }
        if let Some(i) = self.intercept {
            grad[i] += w;
        }
    }
}

struct RowMean {
    mu: f64,
    logistic: Option<(f64, f64)>,
    group: Option<usize>,
}

/// Unnormalized log posterior of a [`ModelSpec`] over unconstrained
/// coordinates, including transform log-Jacobians.
#[derive(Debug, Clone)]
pub struct ModelPosterior<'a> {
    spec: &'a ModelSpec,
    transforms: Vec<Transform>,
    /// False where the prior is stated on the sampler coordinate itself.
    with_jacobian: Vec<bool>,
    priors: Vec<(Range<usize>, Prior)>,
    slots: Slots,
}

/// Terms of the log posterior at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParts {
    pub log_likelihood: f64,
    pub log_prior: f64,
    pub log_jacobian: f64,
}

impl DensityParts {
    pub fn total(&self) -> f64 {
        self.log_likelihood + self.log_prior + self.log_jacobian
    }
}

pub fn log_posterior(spec: &ModelSpec) -> Result<ModelPosterior<'_>, ModelError> {
    let n = spec.target.len();
    if spec.design.nrows() != n {
        return Err(ModelError::Schema(format!(
            "design has {} rows but target has {n}",
            spec.design.nrows()
        )));
    }
    if spec.design.values.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::Input("design matrix contains non-finite entries".into()));
    }
    if spec.target.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::Input("target contains non-finite entries".into()));
    }
    if let Some(groups) = &spec.design.groups {
        if groups.len() != n || groups.iter().any(|&g| g >= spec.group_labels.len()) {
            return Err(ModelError::Schema("group index does not match the store list".into()));
        }
    } else if spec.family == ModelFamily::Hierarchical {
        return Err(ModelError::Schema("hierarchical model needs a group index".into()));
    }
    let expected_cols = spec.layout.total_dim();
    let coef = spec.coefficient_offset();
    if coef + spec.design.columns.len() > expected_cols {
        return Err(ModelError::Layout("design has more columns than coefficients".into()));
    }
    match (spec.likelihood, spec.fixed_nu, spec.layout.block("nu")) {
        (Likelihood::StudentT, None, None) => {
            return Err(ModelError::Layout("student-t model needs a nu block or a fixed nu".into()))
        }
        (Likelihood::StudentT, Some(nu), _) if !(nu > 0.0) => {
            return Err(ModelError::Domain(format!("fixed nu must be positive, got {nu}")))
        }
        _ => {}
    }
    let sigma = spec
        .layout
        .block("sigma")
        .ok_or_else(|| ModelError::Layout("missing sigma block".into()))?;
    if sigma.transform.is_identity() {
        return Err(ModelError::Layout("sigma must use a positivity transform".into()));
    }

    let mut priors = Vec::new();
    let mut with_jacobian = vec![true; spec.layout.total_dim()];
    for (name, prior) in &spec.priors {
        let block = spec
            .layout
            .block(name)
            .ok_or_else(|| ModelError::Layout(format!("prior for unknown block `{name}`")))?;
        if prior.on_unconstrained {
            with_jacobian[block.range()].fill(false);
        }
        priors.push((block.range(), *prior));
    }
    Ok(ModelPosterior {
        spec,
        transforms: spec.layout.transforms(),
        with_jacobian,
        priors,
        slots: Slots::new(spec),
    })
}

impl ModelPosterior<'_> {
    pub fn spec(&self) -> &ModelSpec {
        self.spec
    }

    pub fn parts(&self, theta: &[f64]) -> DensityParts {
        self.evaluate(theta, None)
    }

    fn evaluate(&self, theta: &[f64], grad: Option<&mut [f64]>) -> DensityParts {
        let dim = theta.len();
        let spec = self.spec;
        let params: Vec<f64> = theta.iter().zip(&self.transforms).map(|(&t, tr)| tr.constrain(t)).collect();
        let want_grad = grad.is_some();
        // Gradient with respect to constrained values, and direct terms in theta.
        let mut g_value = vec![0.0; if want_grad { dim } else { 0 }];
        let mut g_theta = vec![0.0; if want_grad { dim } else { 0 }];

        let mut log_jacobian = 0.0;
        for (i, tr) in self.transforms.iter().enumerate() {
            if !self.with_jacobian[i] {
                continue;
            }
            log_jacobian += tr.log_jacobian(theta[i]);
            if want_grad && !tr.is_identity() {
                g_theta[i] += 1.0;
            }
        }

        let mut log_prior = 0.0;
        for (range, prior) in &self.priors {
            let var = prior.sd * prior.sd;
            for i in range.clone() {
                let x = if prior.on_unconstrained { theta[i] } else { params[i] };
                log_prior += normal_logpdf(x, prior.mean, prior.sd);
                if prior.truncated_at_zero {
                    log_prior += LN_2;
                }
                if want_grad {
                    let d = -(x - prior.mean) / var;
                    if prior.on_unconstrained {
                        g_theta[i] += d;
                    } else {
                        g_value[i] += d;
                    }
                }
            }
        }
        if let Some((alpha, mu_idx, tau_idx)) = &self.slots.hier {
            let (mu, tau) = (params[*mu_idx], params[*tau_idx]);
            for i in alpha.clone() {
                let d = params[i] - mu;
                log_prior += normal_logpdf(params[i], mu, tau);
                if want_grad {
                    let t2 = tau * tau;
                    g_value[i] -= d / t2;
                    g_value[*mu_idx] += d / t2;
                    g_value[*tau_idx] += -1.0 / tau + d * d / (t2 * tau);
                }
            }
        }

        let sigma = params[self.slots.sigma];
        let nu = match (spec.likelihood, spec.fixed_nu, self.slots.nu) {
            (Likelihood::StudentT, Some(nu), _) => nu,
            (Likelihood::StudentT, None, Some(i)) => params[i],
            _ => f64::NAN,
        };
        let student = spec.likelihood == Likelihood::StudentT;
        let (t_const, t_dconst) = if student {
            (
                student_t_const(nu),
                0.5 * (digamma(0.5 * (nu + 1.0)) - digamma(0.5 * nu) - 1.0 / nu),
            )
        } else {
            (0.0, 0.0)
        };

        let mut log_likelihood = 0.0;
        let mut g_sigma = 0.0;
        let mut g_nu = 0.0;
        let ln_sigma = sigma.ln();
        let s2 = sigma * sigma;
        for row in 0..spec.target.len() {
            let mean = self.slots.row_mean(&params, &spec.design, row);
            let r = spec.target[row] - mean.mu;
            let (ll, d_mu) = if student {
                let z2 = r * r / s2;
                let denom = nu * s2 + r * r;
                if want_grad {
                    g_sigma += -1.0 / sigma + (nu + 1.0) * r * r / (sigma * denom);
                    g_nu += t_dconst - 0.5 * (z2 / nu).ln_1p() + 0.5 * (nu + 1.0) * z2 / (nu * (nu + z2));
                }
                (
                    t_const - ln_sigma - 0.5 * (nu + 1.0) * (z2 / nu).ln_1p(),
                    (nu + 1.0) * r / denom,
                )
            } else {
                if want_grad {
                    g_sigma += -1.0 / sigma + r * r / (s2 * sigma);
                }
                (-HALF_LN_2PI - ln_sigma - 0.5 * r * r / s2, r / s2)
            };
            log_likelihood += ll;
            if want_grad {
                self.slots
                    .add_mean_grad(&params, &spec.design, row, &mean, d_mu, &mut g_value);
            }
        }

        if let Some(grad) = grad {
            g_value[self.slots.sigma] += g_sigma;
            if let (Some(i), None) = (self.slots.nu, spec.fixed_nu) {
                g_value[i] += g_nu;
            }
            for i in 0..dim {
                grad[i] = g_value[i] * self.transforms[i].derivative(theta[i]) + g_theta[i];
            }
        }
        DensityParts {
            log_likelihood,
            log_prior,
            log_jacobian,
        }
    }
}

impl LogDensity for ModelPosterior<'_> {
    fn dim(&self) -> usize {
        self.transforms.len()
    }

    fn log_density(&self, position: &[f64], grad: &mut [f64]) -> f64 {
        self.evaluate(position, Some(grad)).total()
    }
}

/// Mean of one observation given constrained parameters.
pub(crate) fn mean_function(spec: &ModelSpec) -> impl Fn(&[f64], &DesignMatrix, usize) -> f64 + Sync + '_ {
    let slots = Slots::new(spec);
    move |params, design, row| slots.row_mean(params, design, row).mu
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_mode() {
        let v = student_t_logpdf(3.0, 1.0, 3.0, 2.0).unwrap();
        assert!((v - (1.0 / (PI * 2.0)).ln()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_about_location() {
        for d in [0.1, 1.0, 7.5] {
            let a = student_t_logpdf(1.0 + d, 4.0, 1.0, 0.7).unwrap();
            let b = student_t_logpdf(1.0 - d, 4.0, 1.0, 0.7).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(student_t_logpdf(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(student_t_logpdf(0.0, 3.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn t_with_huge_nu_matches_normal() {
        for (y, mu, sigma) in [(1.0, 0.0, 1.0), (-2.3, 0.4, 0.8), (5.0, 4.0, 3.0)] {
            let t = student_t_logpdf(y, 1e6, mu, sigma).unwrap();
            let n = normal_logpdf(y, mu, sigma);
            assert!((t - n).abs() < 1e-4, "{t} vs {n}");
        }
    }

    #[test]
    fn t3_normalizes() {
        // Trapezoid on a substituted grid y = tan(u) over (-pi/2, pi/2).
        let n = 200_000;
        let h = PI / n as f64;
        let mut total = 0.0;
        for k in 1..n {
            let u = -PI / 2.0 + k as f64 * h;
            let y = u.tan();
            let jac = 1.0 / u.cos().powi(2);
            total += student_t_logpdf(y, 3.0, 0.0, 1.0).unwrap().exp() * jac * h;
        }
        assert!((total - 1.0).abs() < 1e-6, "integral {total}");
        // Closed form at y = 2: Γ(2)/(Γ(3/2) √(3π)) (1 + 4/3)^-2.
        let expected = (1.0 / (0.886_226_925_452_758 * (3.0 * PI).sqrt())) * (7.0_f64 / 3.0).powi(-2);
        assert!((student_t_logpdf(2.0, 3.0, 0.0, 1.0).unwrap().exp() - expected).abs() < 1e-12);
    }
}
