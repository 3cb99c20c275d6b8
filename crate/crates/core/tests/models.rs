use bayes_stack::features::time_split;
use bayes_stack::mcmc::{diagnose, HmcConfig, LogDensity};
use bayes_stack::metrics::summarize_posterior;
use bayes_stack::models::{
    build_hierarchical_model, build_stacking_model, build_trend_model, conditional_mean, log_posterior,
    posterior_predictive, sample_posterior, HierarchicalOptions, ModelSpec, ParameterLayout, StackingOptions,
    Transform, TrendOptions,
};
use bayes_stack::simulate::{simulate_stacking, simulate_stores, simulate_trend, StackingScenario, StoresTruth, TrendTruth};
use bayes_stack::StackingInput;
use chrono::NaiveDate;
use proptest::prelude::*;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 1).unwrap()
}

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (mean, (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn standardized_train(scenario: &StackingScenario, seed: u64) -> StackingInput {
    let (input, _) = simulate_stacking(scenario, seed);
    let (train, _) = time_split(&input, input.dates()[scenario.contaminated_rows]).unwrap();
    train.standardized(&train.fit_scaler().unwrap()).unwrap()
}

#[test]
fn prior_only_sampling_recovers_priors() {
    let input = standardized_train(&StackingScenario::default(), 1);
    let spec = build_stacking_model(
        &input,
        &StackingOptions {
            positive_coefficients: true,
            ..Default::default()
        },
    )
    .unwrap()
    .without_observations();
    let config = HmcConfig {
        seed: 5,
        ..Default::default()
    };
    let draws = sample_posterior(&spec, &config).unwrap();
    let nu_raw = draws.param_values(spec.layout.range("nu").unwrap().start);
    let constrained = draws.constrained();
    let alpha = constrained.block_values("alpha", 0).unwrap();
    let sigma = constrained.block_values("sigma", 0).unwrap();
    let beta = constrained.block_values("beta", 2).unwrap();

    let half_normal = ((2.0 / std::f64::consts::PI).sqrt(), (1.0 - 2.0 / std::f64::consts::PI).sqrt());
    let (m, s) = moments(&alpha);
    assert!(m.abs() < 0.1 && (s - 1.0).abs() < 0.1, "alpha {m} {s}");
    for (name, values) in [("sigma", &sigma), ("beta", &beta)] {
        let (m, s) = moments(values);
        assert!((m - half_normal.0).abs() < 0.08, "{name} mean {m}");
        assert!((s - half_normal.1).abs() < 0.08, "{name} sd {s}");
    }
    let (m, s) = moments(&nu_raw);
    assert!(m.abs() < 0.1 && (s - 1.0).abs() < 0.1, "log(nu - 1) {m} {s}");
}

proptest! {
    #[test]
    fn transforms_are_consistent(theta in -8.0f64..8.0, lower in 0.0f64..3.0) {
        let t = Transform::LogForPositive { lower };
        let v = t.constrain(theta);
        prop_assert!(v > lower);
        prop_assert!((t.unconstrain(v) - theta).abs() < 1e-9 * theta.abs().max(1.0));
        let h = 1e-6;
        let numeric = (t.constrain(theta + h) - t.constrain(theta - h)) / (2.0 * h);
        prop_assert!((t.derivative(theta) - numeric).abs() < 1e-6 * numeric.abs().max(1.0));
        prop_assert!((t.log_jacobian(theta) - t.derivative(theta).ln()).abs() < 1e-12);
        prop_assert_eq!(Transform::Identity.constrain(theta), theta);
        prop_assert_eq!(Transform::Identity.log_jacobian(theta), 0.0);
    }

    #[test]
    fn layout_roundtrips(values in prop::collection::vec(0.01f64..50.0, 4)) {
        let mut layout = ParameterLayout::new();
        layout.push("x", 2, Transform::Identity).unwrap();
        layout.push("s", 1, Transform::POSITIVE).unwrap();
        layout.push("nu", 1, Transform::LogForPositive { lower: 1.0 }).unwrap();
        let mut v = values.clone();
        v[3] += 1.0;
        let back = layout.constrain(&layout.unconstrain(&v));
        for (a, b) in back.iter().zip(&v) {
            prop_assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
    }
}

#[test]
fn relabeling_models_permutes_the_density() {
    let input = standardized_train(&StackingScenario::default(), 2);
    let names = input.model_names().to_vec();
    let mut reversed = names.clone();
    reversed.reverse();
    let permuted = input.select(&reversed).unwrap();
    let options = StackingOptions::default();
    let spec = build_stacking_model(&input, &options).unwrap();
    let spec_p = build_stacking_model(&permuted, &options).unwrap();
    let (a, b) = (log_posterior(&spec).unwrap(), log_posterior(&spec_p).unwrap());
    let beta = spec.layout.range("beta").unwrap();
    let theta: Vec<f64> = (0..spec.layout.total_dim()).map(|i| 0.3 - 0.17 * i as f64).collect();
    let mut theta_p = theta.clone();
    theta_p[beta.clone()].reverse();
    let (la, ga) = a.eval(&theta);
    let (lb, gb) = b.eval(&theta_p);
    assert!((la - lb).abs() < 1e-9 * la.abs().max(1.0));
    let mut gb_back = gb.clone();
    gb_back[beta].reverse();
    for (x, y) in ga.iter().zip(&gb_back) {
        assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
    }
}

#[test]
fn positive_stacking_draws_are_positive() {
    let input = standardized_train(&StackingScenario::default(), 3);
    let spec = build_stacking_model(
        &input,
        &StackingOptions {
            positive_coefficients: true,
            ..Default::default()
        },
    )
    .unwrap();
    let config = HmcConfig {
        seed: 8,
        warmup_iters: 500,
        sample_iters: 500,
        ..Default::default()
    };
    let draws = sample_posterior(&spec, &config).unwrap().constrained();
    for j in 0..input.n_models() {
        assert!(draws.block_values("beta", j).unwrap().iter().all(|&b| b > 0.0));
    }
}

#[test]
fn best_model_gets_the_largest_weight() {
    let input = standardized_train(&StackingScenario::default(), 4);
    let spec = build_stacking_model(&input, &StackingOptions::default()).unwrap();
    let config = HmcConfig {
        seed: 9,
        ..Default::default()
    };
    let draws = sample_posterior(&spec, &config).unwrap();
    let summary = summarize_posterior(&draws).unwrap();
    let means: Vec<f64> = (1..=4).map(|j| summary.get(&format!("beta[m{j}]")).unwrap().mean).collect();
    let best = means.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    assert_eq!(best, 0, "{means:?}");
}

fn trend_fit(seed: u64) -> (ModelSpec, bayes_stack::PosteriorDraws, bayes_stack::TimeSeriesFrame) {
    let truth = TrendTruth::default();
    let frame = simulate_trend(&truth, start(), 330, 299.0, seed);
    let (train, test) = time_split(&frame, frame.rows()[300].date).unwrap();
    let spec = build_trend_model(&train, &TrendOptions::default()).unwrap();
    let config = HmcConfig {
        seed,
        ..Default::default()
    };
    let draws = sample_posterior(&spec, &config).unwrap();
    (spec, draws, test)
}

#[test]
fn trend_forecast_tracks_the_truth() {
    let truth = TrendTruth::default();
    let (spec, draws, test) = trend_fit(21);
    assert!(diagnose(&draws).unwrap().max_rhat() < 1.1);
    let design = spec.design_for(&test).unwrap();
    let mean = conditional_mean(&spec, &draws, &design).unwrap();
    let scale = spec.time_scale.unwrap();
    let mut rel = 0.0;
    for (row, m) in test.rows().iter().zip(&mean) {
        let t = scale.apply(row.date);
        let expected = (truth.log_mean(t, row.promo, row.date) + 0.5 * truth.sigma.powi(2)).exp();
        rel += (m - expected).abs() / expected;
    }
    rel /= mean.len() as f64;
    assert!(rel < 0.05, "mean relative error {rel}");

    let pred = posterior_predictive(&spec, &draws, &design, 3).unwrap();
    assert_eq!(pred.n_draws(), draws.total_draws());
    let sample_mean = pred.mean();
    for (a, b) in sample_mean.iter().zip(&mean) {
        assert!((a - b).abs() / b < 0.05);
    }
}

#[test]
fn short_history_store_has_the_widest_intercept() {
    let frame = simulate_stores(&StoresTruth::default(), start(), 120, 5).truncate_store("3", 5);
    let options = HierarchicalOptions {
        target_scale: 1000.0,
        ..Default::default()
    };
    let spec = build_hierarchical_model(&frame, &options).unwrap();
    let config = HmcConfig {
        seed: 4,
        ..Default::default()
    };
    let draws = sample_posterior(&spec, &config).unwrap();
    let summary = summarize_posterior(&draws).unwrap();
    let sd: Vec<f64> = ["1", "2", "3", "4", "5"]
        .iter()
        .map(|s| summary.get(&format!("alpha[{s}]")).unwrap().sd)
        .collect();
    let widest = sd.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    assert_eq!(widest, 2, "{sd:?}");
}
