use bayes_stack::features::time_split;
use bayes_stack::mcmc::{check_gradient, LogDensity};
use bayes_stack::models::{
    build_hierarchical_model, build_stacking_model, build_trend_model, log_posterior, HierarchicalOptions, ModelSpec,
    StackingLikelihood, StackingOptions, TrendOptions,
};
use bayes_stack::simulate::{simulate_stacking, simulate_stores, simulate_trend, StackingScenario, StoresTruth, TrendTruth};
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-5;
const POINTS: usize = 20;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 1).unwrap()
}

fn assert_gradients(spec: &ModelSpec, seed: u64, spread: f64) {
    let target = log_posterior(spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = spec.default_init();
    for k in 0..POINTS {
        let theta: Vec<f64> = base.iter().map(|b| b + rng.random_range(-spread..spread)).collect();
        let (logp, _) = target.eval(&theta);
        assert!(logp.is_finite(), "point {k}: log density {logp}");
        let check = check_gradient(&target, &theta, H);
        let (worst, err) = check.worst();
        let names = spec.layout.parameter_names();
        assert!(
            err < TOL,
            "point {k}: d/d{} analytic {} numeric {} (rel {err:e})",
            names[worst],
            check.analytic[worst],
            check.numeric[worst]
        );
    }
}

fn trend_spec() -> ModelSpec {
    let frame = simulate_trend(&TrendTruth::default(), start(), 120, 119.0, 1);
    build_trend_model(&frame, &TrendOptions::default()).unwrap()
}

fn hier_spec() -> ModelSpec {
    let frame = simulate_stores(&StoresTruth::default(), start(), 40, 2);
    let options = HierarchicalOptions {
        target_scale: 1000.0,
        ..Default::default()
    };
    build_hierarchical_model(&frame, &options).unwrap()
}

fn stacking_spec(options: StackingOptions) -> ModelSpec {
    let scenario = StackingScenario {
        outlier_fraction: 0.1,
        ..Default::default()
    };
    let (input, _) = simulate_stacking(&scenario, 3);
    let (train, _) = time_split(&input, input.dates()[48]).unwrap();
    let z = train.standardized(&train.fit_scaler().unwrap()).unwrap();
    build_stacking_model(&z, &options).unwrap()
}

#[test]
fn trend_gradient_matches_finite_differences() {
    assert_gradients(&trend_spec(), 10, 1.5);
}

#[test]
fn hierarchical_gradient_matches_finite_differences() {
    assert_gradients(&hier_spec(), 11, 1.0);
}

#[test]
fn stacking_student_t_gradient_matches_finite_differences() {
    assert_gradients(&stacking_spec(StackingOptions::default()), 12, 1.5);
}

#[test]
fn stacking_variants_gradient_matches_finite_differences() {
    let variants = [
        StackingOptions {
            positive_coefficients: true,
            ..Default::default()
        },
        StackingOptions {
            fixed_nu: Some(10.0),
            ..Default::default()
        },
        StackingOptions {
            likelihood: StackingLikelihood::Gaussian,
            ..Default::default()
        },
    ];
    for (i, options) in variants.into_iter().enumerate() {
        assert_gradients(&stacking_spec(options), 20 + i as u64, 1.5);
    }
}

#[test]
fn prior_only_gradients_match() {
    assert_gradients(&trend_spec().without_observations(), 30, 2.0);
    assert_gradients(&hier_spec().without_observations(), 31, 2.0);
}
