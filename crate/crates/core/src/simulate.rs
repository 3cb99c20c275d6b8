//! Seeded synthetic data drawn from the model families, for demos and
//! recovery checks.

use chrono::{Datelike, Days, NaiveDate};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::baselearners::StackingInput;
use crate::features::{Observation, TimeSeriesFrame};
use crate::rng::stream_rng;

/// Parameters of the saturating log-trend, on the model's time axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTruth {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub beta_promo: f64,
    pub beta_time: f64,
    /// Monday first.
    pub beta_wd: [f64; 7],
    pub sigma: f64,
}

impl Default for TrendTruth {
    fn default() -> Self {
        Self {
            a: 3.0,
            b: -8.0,
            c: 4.0,
            beta_promo: 0.4,
            beta_time: 0.3,
            beta_wd: [0.5, 0.4, 0.45, 0.5, 0.6, 0.8, -0.5],
            sigma: 0.1,
        }
    }
}

impl TrendTruth {
    /// Mean of `log(sales)` at model time `t`.
    pub fn log_mean(&self, t: f64, promo: bool, date: NaiveDate) -> f64 {
        let wd = date.weekday().num_days_from_monday() as usize;
        self.a / (1.0 + (self.b * t + self.c).exp())
            + self.beta_promo * f64::from(u8::from(promo))
            + self.beta_time * t
            + self.beta_wd[wd]
    }

    /// In the model's parameter order `a, b, c, beta_promo, beta_time, beta_wd[1..7], sigma`.
    pub fn as_vec(&self) -> Vec<f64> {
        let mut v = vec![self.a, self.b, self.c, self.beta_promo, self.beta_time];
        v.extend(self.beta_wd);
        v.push(self.sigma);
        v
    }
}

/// Daily single-store series from `start`; day `i` sits at model time
/// `i / span_days`. Promotions run on about 30% of days.
pub fn simulate_trend(truth: &TrendTruth, start: NaiveDate, n_days: u64, span_days: f64, seed: u64) -> TimeSeriesFrame {
    let mut rng = stream_rng(seed, 0);
    let rows = (0..n_days)
        .map(|i| {
            let date = start + Days::new(i);
            let promo = rng.random_bool(0.3);
            let z: f64 = StandardNormal.sample(&mut rng);
            let log_sales = truth.log_mean(i as f64 / span_days, promo, date) + truth.sigma * z;
            Observation {
                date,
                store: "1".into(),
                sales: log_sales.exp(),
                promo,
            }
        })
        .collect();
    TimeSeriesFrame::new(rows).expect("dates are unique")
}

/// Per-store levels plus shared effects, in sales units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoresTruth {
    pub levels: Vec<f64>,
    pub beta_promo: f64,
    /// Change over the whole simulated window.
    pub beta_time: f64,
    /// Tuesday through Sunday relative to Monday.
    pub beta_wd: [f64; 6],
    pub sigma: f64,
}

impl StoresTruth {
    pub fn identical(n_stores: usize) -> Self {
        Self {
            levels: vec![1000.0; n_stores],
            ..Self::default()
        }
    }
}

impl Default for StoresTruth {
    fn default() -> Self {
        Self {
            levels: vec![800.0, 1000.0, 1200.0, 900.0, 1100.0],
            beta_promo: 150.0,
            beta_time: 50.0,
            beta_wd: [20.0, 10.0, 30.0, 80.0, 120.0, -300.0],
            sigma: 60.0,
        }
    }
}

/// Panel of stores `"1"`, `"2"`, ... over the same `n_days` dates.
pub fn simulate_stores(truth: &StoresTruth, start: NaiveDate, n_days: u64, seed: u64) -> TimeSeriesFrame {
    let mut rng = stream_rng(seed, 0);
    let span = (n_days.max(2) - 1) as f64;
    let mut rows = Vec::new();
    for (s, level) in truth.levels.iter().enumerate() {
        for i in 0..n_days {
            let date = start + Days::new(i);
            let promo = rng.random_bool(0.3);
            let wd = date.weekday().num_days_from_monday() as usize;
            let z: f64 = StandardNormal.sample(&mut rng);
            let sales = level
                + truth.beta_promo * f64::from(u8::from(promo))
                + truth.beta_time * i as f64 / span
                + if wd == 0 { 0.0 } else { truth.beta_wd[wd - 1] }
                + truth.sigma * z;
            rows.push(Observation {
                date,
                store: (s + 1).to_string(),
                sales,
                promo,
            });
        }
    }
    TimeSeriesFrame::new(rows).expect("keys are unique")
}

/// First-level predictions of a sales-like series by models of decreasing
/// quality: model `m1` is the truth plus small noise, later models are
/// noisier or biased.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingScenario {
    pub n_rows: usize,
    /// Gross outliers hit this fraction of the first `contaminated_rows` targets.
    pub outlier_fraction: f64,
    pub contaminated_rows: usize,
    pub start: NaiveDate,
}

impl Default for StackingScenario {
    fn default() -> Self {
        Self {
            n_rows: 98,
            outlier_fraction: 0.0,
            contaminated_rows: 48,
            start: NaiveDate::from_ymd_opt(2015, 5, 1).expect("valid date"),
        }
    }
}

/// `(noise sd, multiplicative bias, additive bias)` per model.
const STACK_MODELS: [(&str, f64, f64, f64); 4] = [
    ("m1", 40.0, 1.0, 0.0),
    ("m2", 90.0, 1.0, 30.0),
    ("m3", 120.0, 0.8, 150.0),
    ("m4", 200.0, 1.1, -60.0),
];

/// Returns the predictions with the (possibly contaminated) target, plus the
/// clean target.
pub fn simulate_stacking(scenario: &StackingScenario, seed: u64) -> (StackingInput, Vec<f64>) {
    let mut rng = stream_rng(seed, 0);
    let n = scenario.n_rows;
    let dates: Vec<NaiveDate> = (0..n as u64).map(|i| scenario.start + Days::new(i)).collect();
    let noise = Normal::new(0.0, 50.0).expect("valid sd");
    let signal: Vec<f64> = dates
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let wd = d.weekday().num_days_from_monday() as f64;
            1000.0 + 150.0 * (wd * std::f64::consts::TAU / 7.0).sin() + 2.0 * i as f64 + 100.0 * f64::from(u8::from(rng.random_bool(0.3)))
        })
        .collect();
    let clean: Vec<f64> = signal.iter().map(|s| s + noise.sample(&mut rng)).collect();
    let mut target = clean.clone();
    for y in target.iter_mut().take(scenario.contaminated_rows) {
        if rng.random_bool(scenario.outlier_fraction.clamp(0.0, 1.0)) {
            *y += 2000.0 + 1000.0 * rng.random::<f64>();
        }
    }
    let predictions = DMatrix::from_fn(n, STACK_MODELS.len(), |i, j| {
        let (_, sd, mult, add) = STACK_MODELS[j];
        let z: f64 = StandardNormal.sample(&mut stream_rng(seed, 1 + (i * STACK_MODELS.len() + j) as u64));
        mult * signal[i] + add + sd * z
    });
    let names = STACK_MODELS.iter().map(|m| m.0.to_string()).collect();
    let input = StackingInput::new(predictions, names, target, dates).expect("finite by construction");
    (input, clean)
}
