use bayes_stack::features::ZScaler;
use bayes_stack::mcmc::{diagnose, effective_sample_size, hmc_sample, FnDensity, HmcConfig};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Problem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    noise_sd: f64,
    prior_sd: f64,
}

/// Closed-form posterior of `w` under `y ~ N(Xw, noise_sd^2)`, `w ~ N(0, prior_sd^2 I)`.
fn closed_form(p: &Problem) -> (DVector<f64>, DMatrix<f64>) {
    let dim = p.x.ncols();
    let precision = p.x.transpose() * &p.x / p.noise_sd.powi(2) + DMatrix::identity(dim, dim) / p.prior_sd.powi(2);
    let cov = precision.try_inverse().unwrap();
    let mean = &cov * p.x.transpose() * &p.y / p.noise_sd.powi(2);
    (mean, cov)
}

fn problem(n: usize, dim: usize, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::from_fn(n, dim, |_, j| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * (1.0 + j as f64)
    });
    let truth: Vec<f64> = (0..dim).map(|j| 0.8 - 0.6 * j as f64).collect();
    let names: Vec<String> = (0..dim).map(|j| format!("x{j}")).collect();
    let x = ZScaler::fit_matrix(&names, &raw).unwrap().apply_matrix(&names, &raw).unwrap();
    let y_raw: Vec<f64> = (0..n)
        .map(|i| {
            let e: f64 = StandardNormal.sample(&mut rng);
            (0..dim).map(|j| x[(i, j)] * truth[j]).sum::<f64>() + 0.7 * e
        })
        .collect();
    let y = ZScaler::fit([("y", y_raw.as_slice())]).unwrap().apply("y", &y_raw).unwrap();
    Problem {
        x,
        y: DVector::from_vec(y),
        noise_sd: 0.5,
        prior_sd: 1.0,
    }
}

fn sample(p: &Problem, config: &HmcConfig) -> bayes_stack::PosteriorDraws {
    let dim = p.x.ncols();
    let target = FnDensity::new(dim, |w: &[f64], g: &mut [f64]| {
        let r = &p.y - &p.x * DVector::from_column_slice(w);
        let xr = p.x.transpose() * &r / p.noise_sd.powi(2);
        let mut lp = -0.5 * r.norm_squared() / p.noise_sd.powi(2);
        for j in 0..w.len() {
            g[j] = xr[j] - w[j] / p.prior_sd.powi(2);
            lp -= 0.5 * w[j] * w[j] / p.prior_sd.powi(2);
        }
        lp
    });
    hmc_sample(&target, &vec![0.0; dim], config).unwrap()
}

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (mean, sd)
}

#[test]
fn three_coefficient_regression_matches_closed_form() {
    let p = problem(200, 3, 1);
    let (mean, cov) = closed_form(&p);
    let config = HmcConfig {
        seed: 42,
        ..Default::default()
    };
    let draws = sample(&p, &config);
    assert!(diagnose(&draws).unwrap().max_rhat() < 1.01);
    for j in 0..3 {
        let values = draws.param_values(j);
        let (m, sd) = moments(&values);
        let true_sd = cov[(j, j)].sqrt();
        let chains = draws.param_chains(j);
        let mcse_mean = true_sd / effective_sample_size(&chains).sqrt();
        // The sd's error depends on the mixing of the squared deviations,
        // which can be much slower than that of the draws themselves.
        let squares: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| c.iter().map(|v| (v - m).powi(2)).collect())
            .collect();
        let mcse_sd = true_sd / (2.0 * effective_sample_size(&squares)).sqrt();
        assert!((m - mean[j]).abs() < 0.05, "w{j}: mean {m} vs {}", mean[j]);
        assert!((sd / true_sd - 1.0).abs() < 0.10, "w{j}: sd {sd} vs {true_sd}");
        assert!((m - mean[j]).abs() < 3.0 * mcse_mean, "w{j}: mean off by {} (mcse {mcse_mean})", m - mean[j]);
        assert!((sd - true_sd).abs() < 3.0 * mcse_sd, "w{j}: sd off by {} (mcse {mcse_sd})", sd - true_sd);
    }
}

#[test]
fn two_coefficient_regression_means() {
    let p = problem(80, 2, 7);
    let (mean, _) = closed_form(&p);
    let config = HmcConfig {
        seed: 3,
        warmup_iters: 500,
        sample_iters: 500,
        ..Default::default()
    };
    let draws = sample(&p, &config);
    for j in 0..2 {
        let (m, _) = moments(&draws.param_values(j));
        assert!((m - mean[j]).abs() < 0.05, "w{j}: {m} vs {}", mean[j]);
    }
}
