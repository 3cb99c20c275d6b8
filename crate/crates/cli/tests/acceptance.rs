//! Acceptance suite. Runs every criterion at its fixed tolerance and prints
//! one `[PASS]` or `[FAIL]` line per criterion; exits non-zero if any fails.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use bayes_stack::features::{time_split, ZScaler};
use bayes_stack::mcmc::{check_gradient, hmc_sample, split_rhat, FnDensity, HmcConfig, LogDensity};
use bayes_stack::metrics::{coef_variation_abs, rmae, rmse, summarize_posterior, value_at_risk, Split};
use bayes_stack::models::{
    build_hierarchical_model, build_stacking_model, build_trend_model, log_posterior, sample_posterior,
    HierarchicalOptions, ModelSpec, StackingLikelihood, StackingOptions, TrendOptions,
};
use bayes_stack::simulate::{
    simulate_stacking, simulate_stores, simulate_trend, StackingScenario, StoresTruth, TrendTruth,
};
use bayes_stack_cli::commands::fit_stack_input;
use chrono::NaiveDate;
use common::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const REPLICATIONS: u64 = 20;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn within(limit: Duration, started: Instant) -> (bool, String) {
    let t = started.elapsed();
    (t < limit, format!("{:.1}s of {}s allowed", t.as_secs_f64(), limit.as_secs()))
}

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 1, 1).unwrap()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// Gaussian-prior linear regression with known noise against its closed form.
fn conjugate_oracle() -> Verdict {
    let started = Instant::now();
    let (n, p, noise_sd) = (200, 3, 0.5_f64);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let raw = DMatrix::from_fn(n, p, |_, j| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * (1.0 + j as f64)
    });
    let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    let x = ZScaler::fit_matrix(&names, &raw).unwrap().apply_matrix(&names, &raw).unwrap();
    let truth = [0.7, -0.4, 0.1];
    let y_raw: Vec<f64> = (0..n)
        .map(|i| {
            let e: f64 = StandardNormal.sample(&mut rng);
            (0..p).map(|j| x[(i, j)] * truth[j]).sum::<f64>() + 0.6 * e
        })
        .collect();
    let y = DVector::from_vec(ZScaler::fit([("y", y_raw.as_slice())]).unwrap().apply("y", &y_raw).unwrap());

    let precision = x.transpose() * &x / noise_sd.powi(2) + DMatrix::identity(p, p);
    let cov = precision.try_inverse().unwrap();
    let mean = &cov * x.transpose() * &y / noise_sd.powi(2);

    let target = FnDensity::new(p, |w: &[f64], g: &mut [f64]| {
        let r = &y - &x * DVector::from_column_slice(w);
        let xr = x.transpose() * &r / noise_sd.powi(2);
        let mut lp = -0.5 * r.norm_squared() / noise_sd.powi(2);
        for j in 0..p {
            g[j] = xr[j] - w[j];
            lp -= 0.5 * w[j] * w[j];
        }
        lp
    });
    let draws = hmc_sample(&target, &vec![0.0; p], &HmcConfig { seed: 7, ..Default::default() }).unwrap();
    let mut worst_mean: f64 = 0.0;
    let mut worst_sd: f64 = 0.0;
    for j in 0..p {
        let (m, sd) = mean_sd(&draws.param_values(j));
        let true_sd = cov[(j, j)].sqrt();
        worst_mean = worst_mean.max((m - mean[j]).abs() / true_sd);
        worst_sd = worst_sd.max((sd / true_sd - 1.0).abs());
    }
    let (fast, time) = within(Duration::from_secs(30), started);
    verdict(
        worst_mean < 0.05 && worst_sd < 0.10 && fast,
        format!(
            "max |mean error| {worst_mean:.4} posterior sd (< 0.05), max sd error {:.2}% (< 10%), {time}",
            100.0 * worst_sd
        ),
    )
}

fn gradient_specs() -> Vec<(&'static str, ModelSpec, f64)> {
    let trend = build_trend_model(
        &simulate_trend(&TrendTruth::default(), start(), 120, 119.0, 1),
        &TrendOptions::default(),
    )
    .unwrap();
    let hier = build_hierarchical_model(
        &simulate_stores(&StoresTruth::default(), start(), 40, 2),
        &HierarchicalOptions {
            target_scale: 1000.0,
            ..Default::default()
        },
    )
    .unwrap();
    let (input, _) = simulate_stacking(
        &StackingScenario {
            outlier_fraction: 0.1,
            ..Default::default()
        },
        3,
    );
    let (train, _) = time_split(&input, input.dates()[48]).unwrap();
    let z = train.standardized(&train.fit_scaler().unwrap()).unwrap();
    let stack = build_stacking_model(&z, &StackingOptions::default()).unwrap();
    vec![("trend", trend, 1.5), ("hierarchical", hier, 1.0), ("stacking", stack, 1.5)]
}

/// Analytic gradients against central differences, 20 random points per family.
fn gradient_suite() -> Verdict {
    let specs = gradient_specs();
    let started = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for (k, (name, spec, spread)) in specs.iter().enumerate() {
        let target = log_posterior(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let base = spec.default_init();
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let theta: Vec<f64> = base.iter().map(|b| b + rng.random_range(-*spread..*spread)).collect();
            let finite = target.eval(&theta).0.is_finite();
            let err = check_gradient(&target, &theta, 1e-5).max_error();
            worst = worst.max(if finite { err } else { f64::INFINITY });
        }
        ok &= worst < 1e-5;
        details.push(format!("{name} {worst:.1e}"));
    }
    let (fast, time) = within(Duration::from_secs(5), started);
    verdict(ok && fast, format!("max relative error: {} (< 1e-5), {time}", details.join(", ")))
}

/// 90% intervals of the trend model against the simulated truth.
fn trend_recovery() -> Verdict {
    let started = Instant::now();
    let truth = TrendTruth::default();
    let true_values = truth.as_vec();
    let mut fractions = Vec::new();
    let mut worst_rhat: f64 = 1.0;
    for rep in 0..REPLICATIONS {
        let frame = simulate_trend(&truth, start(), 400, 399.0, 1000 + rep);
        let spec = build_trend_model(&frame, &TrendOptions::default()).unwrap();
        let draws = sample_posterior(&spec, &HmcConfig { seed: rep, ..Default::default() })
            .unwrap()
            .constrained();
        for j in 0..draws.dim() {
            worst_rhat = worst_rhat.max(split_rhat(&draws.param_chains(j)));
        }
        let summary = summarize_posterior(&draws).unwrap();
        let covered = summary
            .parameters
            .iter()
            .zip(&true_values)
            .filter(|(s, v)| s.q05 <= **v && **v <= s.q95)
            .count();
        fractions.push(covered as f64 / true_values.len() as f64);
    }
    let average = fractions.iter().sum::<f64>() / fractions.len() as f64;
    let (fast, time) = within(Duration::from_secs(300), started);
    verdict(
        average >= 0.7 && fast,
        format!(
            "mean coverage {:.3} of {} parameters (>= 0.7), worst replication {:.3}, max R-hat {worst_rhat:.3}, {time}",
            average,
            true_values.len(),
            fractions.iter().copied().fold(1.0, f64::min)
        ),
    )
}

/// A store cut to 5 rows should have the most uncertain intercept.
fn short_history() -> Verdict {
    let started = Instant::now();
    let mut hits = 0;
    for rep in 0..REPLICATIONS {
        let frame = simulate_stores(&StoresTruth::default(), start(), 100, 2000 + rep).truncate_store("3", 5);
        let sales = frame.sales();
        let options = HierarchicalOptions {
            target_scale: sales.iter().sum::<f64>() / sales.len() as f64,
            ..Default::default()
        };
        let spec = build_hierarchical_model(&frame, &options).unwrap();
        let draws = sample_posterior(&spec, &HmcConfig { seed: rep, ..Default::default() })
            .unwrap()
            .constrained();
        let sds: Vec<f64> = (0..5).map(|g| mean_sd(&draws.block_values("alpha", g).unwrap()).1).collect();
        let widest = (0..5).max_by(|&a, &b| sds[a].total_cmp(&sds[b])).unwrap();
        if spec.group_labels[widest] == "3" {
            hits += 1;
        }
    }
    let (fast, time) = within(Duration::from_secs(300), started);
    verdict(
        hits >= 18 && fast,
        format!("truncated store widest in {hits}/{REPLICATIONS} (>= 18), {time}"),
    )
}

fn stacking_split(input: &bayes_stack::StackingInput) -> NaiveDate {
    input.dates()[48]
}

/// Student-t against Gaussian stacking when 5% of training targets are gross outliers.
fn robustness() -> Verdict {
    let scenario = StackingScenario {
        outlier_fraction: 0.05,
        ..Default::default()
    };
    let mut wins = 0;
    let mut ratios = Vec::new();
    for rep in 0..REPLICATIONS {
        let (input, _) = simulate_stacking(&scenario, 3000 + rep);
        let hmc = HmcConfig { seed: rep, ..Default::default() };
        let test_rmse = |likelihood| {
            let options = StackingOptions {
                likelihood,
                ..Default::default()
            };
            fit_stack_input(&input, stacking_split(&input), &[], &options, &hmc)
                .unwrap()
                .report(Split::Test)
                .rmse
        };
        let t = test_rmse(StackingLikelihood::StudentT);
        let g = test_rmse(StackingLikelihood::Gaussian);
        if t <= g {
            wins += 1;
        }
        ratios.push(t / g);
    }
    ratios.sort_by(f64::total_cmp);
    verdict(
        wins >= 16,
        format!(
            "student-t test RMSE <= gaussian in {wins}/{REPLICATIONS} (>= 16), median ratio {:.3}",
            ratios[ratios.len() / 2]
        ),
    )
}

/// Positive stacking weights: all draws positive, test RMAE close to the free fit.
fn positivity() -> Verdict {
    let (input, _) = simulate_stacking(&StackingScenario::default(), 4000);
    let hmc = HmcConfig { seed: 11, ..Default::default() };
    let fit = |positive_coefficients| {
        let options = StackingOptions {
            positive_coefficients,
            ..Default::default()
        };
        fit_stack_input(&input, stacking_split(&input), &[], &options, &hmc).unwrap()
    };
    let free = fit(false);
    let positive = fit(true);
    let all_positive = (0..input.n_models()).all(|j| positive.draws.block_values("beta", j).unwrap().iter().all(|&b| b > 0.0));
    let a = free.report(Split::Test).rmae_percent;
    let b = positive.report(Split::Test).rmae_percent;
    verdict(
        all_positive && (a - b).abs() <= 1.5,
        format!("all beta draws > 0: {all_positive}; test RMAE {a:.2}% free vs {b:.2}% positive (gap <= 1.5 pp)"),
    )
}

/// Share of held-out actuals under the 5% predictive quantile, via the CLI.
fn var_calibration() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let frame = simulate_trend(&TrendTruth::default(), start(), 400, 299.0, 5000);
    let input = write_frame(root.path(), "sales.csv", &frame);
    let out_dir = root.path().join("trend");
    let split = frame.rows()[300].date.to_string();
    run_ok(&[
        "fit-trend",
        "--input",
        path_str(&input),
        "--output-dir",
        path_str(&out_dir),
        "--split-date",
        &split,
        "--seed",
        "3",
    ]);
    let test: Vec<_> = read_forecast(&out_dir.join("forecast.csv"))
        .into_iter()
        .filter(|r| r.0 == "test")
        .collect();
    let below = test.iter().filter(|r| r.1 < r.3).count();
    let share = below as f64 / test.len() as f64;
    verdict(
        (0.01..=0.12).contains(&share),
        format!("{below}/{} held-out actuals below VaR = {share:.3} (in [0.01, 0.12])", test.len()),
    )
}

fn metric_examples() -> Verdict {
    let draws: Vec<f64> = (1..=100).map(f64::from).collect();
    let checks = [
        ("rmae", rmae(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(), 50.0),
        ("rmae exact", rmae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0),
        ("rmse", rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 12.5_f64.sqrt()),
        ("VaR", value_at_risk(&draws, 0.05).unwrap(), 5.95),
        ("median", value_at_risk(&[5.0, 1.0, 3.0], 0.5).unwrap(), 3.0),
        ("|v|", coef_variation_abs(&[-3.0, -1.0]).unwrap(), 0.5_f64.sqrt()),
        ("|v| constant", coef_variation_abs(&[5.0; 4]).unwrap(), 0.0),
    ];
    let failed: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| !((got - want).abs() <= 1e-9))
        .map(|(name, got, want)| format!("{name}: {got} vs {want}"))
        .collect();
    verdict(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} hand examples within 1e-9", checks.len())
        } else {
            failed.join("; ")
        },
    )
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

/// Every command twice with one seed, under different thread caps.
fn determinism() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    let trend_frame = simulate_trend(&TrendTruth::default(), start(), 400, 299.0, 6000);
    let trend_split = trend_frame.rows()[300].date.to_string();
    let trend = write_frame(r, "trend.csv", &trend_frame);
    let stores = write_frame(r, "stores.csv", &simulate_stores(&StoresTruth::default(), start(), 229, 6001));
    let (stack_input, _) = simulate_stacking(&StackingScenario::default(), 6002);
    let preds = write_stacking(r, "preds.csv", &stack_input);
    let hmc = ["--chains", "2", "--warmup", "400", "--samples", "300", "--seed", "17"];

    let commands: Vec<(&str, Vec<String>)> = vec![
        ("fit-trend", vec!["fit-trend", "--input", path_str(&trend), "--split-date", &trend_split]),
        (
            "fit-hier",
            vec!["fit-hier", "--input", path_str(&stores), "--split-date", "2015-07-01", "--truncate-store", "2", "5"],
        ),
        (
            "fit-stack (sales)",
            vec![
                "fit-stack",
                "--input",
                path_str(&stores),
                "--validation-start",
                "2015-05-12",
                "--split-date",
                "2015-06-29",
            ],
        ),
        (
            "fit-stack (predictions)",
            vec!["fit-stack", "--predictions", path_str(&preds), "--split-date", "2015-06-18", "--fixed-nu", "10"],
        ),
    ]
    .into_iter()
    .map(|(name, args)| (name, args.into_iter().map(String::from).collect()))
    .collect();

    let mut mismatched = Vec::new();
    let mut compared = 0;
    for (k, (name, base)) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for (attempt, threads) in ["1", "3"].iter().enumerate() {
            let dir = r.join(format!("cmd{k}_{attempt}"));
            let mut args: Vec<String> = base.clone();
            args.extend(["--output-dir".into(), path_str(&dir).into()]);
            args.extend(hmc.iter().map(|s| s.to_string()));
            let out = std::process::Command::new(BIN)
                .args(&args)
                .env("BAYES_STACK_THREADS", threads)
                .env("RUST_LOG", "warn")
                .output()
                .unwrap();
            if !out.status.success() {
                return verdict(
                    false,
                    format!("{name} failed: {}", String::from_utf8_lossy(&out.stderr).trim()),
                );
            }
            outputs.push(files(&dir));
        }
        compared += outputs[0].iter().filter(|(n, _)| n.ends_with(".csv")).count();
        if outputs[0] != outputs[1] {
            mismatched.push(*name);
        }
    }

    let eval_dirs: Vec<_> = (0..2).map(|i| r.join(format!("eval{i}"))).collect();
    for dir in &eval_dirs {
        run_ok(&[
            "evaluate",
            "--predictions",
            path_str(&r.join("cmd3_0/predictions.csv")),
            "--output-dir",
            path_str(dir),
        ]);
    }
    if files(&eval_dirs[0]) != files(&eval_dirs[1]) {
        mismatched.push("evaluate");
    }
    verdict(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("5 commands, {compared} CSV artifacts plus JSON byte-identical across reruns and thread caps 1/3")
        } else {
            format!("differences in: {}", mismatched.join(", "))
        },
    )
}

/// Twelve training rows with nu fixed at 10.
fn small_data() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let scenario = StackingScenario {
        n_rows: 62,
        ..Default::default()
    };
    let (input, _) = simulate_stacking(&scenario, 7000);
    let preds = write_stacking(root.path(), "preds.csv", &input);
    let out_dir = root.path().join("small");
    let split = input.dates()[12].to_string();
    let out = run(&[
        "fit-stack",
        "--predictions",
        path_str(&preds),
        "--output-dir",
        path_str(&out_dir),
        "--split-date",
        &split,
        "--fixed-nu",
        "10",
        "--seed",
        "12",
    ]);
    if !out.status.success() {
        return verdict(
            false,
            format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr).trim()),
        );
    }
    let metrics = read_json(&out_dir.join("metrics.json"));
    let reports = metrics.as_array().unwrap();
    let n: Vec<u64> = reports.iter().map(|r| r["n"].as_u64().unwrap()).collect();
    let finite = reports
        .iter()
        .all(|r| r["rmse"].as_f64().is_some_and(f64::is_finite) && r["rmae_percent"].as_f64().is_some_and(f64::is_finite));
    let test = reports.iter().find(|r| r["split"] == "test").unwrap();
    verdict(
        finite && n == [12, 50],
        format!(
            "exit 0, rows train/test {n:?}, test RMAE {:.2}%, test RMSE {:.1}",
            test["rmae_percent"].as_f64().unwrap_or(f64::NAN),
            test["rmse"].as_f64().unwrap_or(f64::NAN)
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("conjugate oracle", conjugate_oracle),
        ("gradient suite", gradient_suite),
        ("trend parameter recovery", trend_recovery),
        ("short-history intercept dispersion", short_history),
        ("student-t robustness to outliers", robustness),
        ("positive stacking weights", positivity),
        ("VaR calibration", var_calibration),
        ("metric hand examples", metric_examples),
        ("CLI determinism", determinism),
        ("small-data stacking", small_data),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        let started = Instant::now();
        let v = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.passed {
            failed += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {} [{:.1}s]",
            if v.passed { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
