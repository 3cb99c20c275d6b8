#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bayes_stack::{StackingInput, TimeSeriesFrame};

pub const BIN: &str = env!("CARGO_BIN_EXE_bayes-stack");

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} exited with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn write_frame(dir: &Path, name: &str, frame: &TimeSeriesFrame) -> PathBuf {
    let path = dir.join(name);
    frame.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    path
}

pub fn write_stacking(dir: &Path, name: &str, input: &StackingInput) -> PathBuf {
    let path = dir.join(name);
    input.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    path
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// `(split, actual, mean, var05)` per row of a forecast or predictions file.
pub fn read_forecast(path: &Path) -> Vec<(String, f64, f64, f64)> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (s, a, m, v) = (col("split"), col("actual"), col("mean"), col("var05"));
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[s].to_string(), r[a].parse().unwrap(), r[m].parse().unwrap(), r[v].parse().unwrap())
        })
        .collect()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
