#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// Three weeks of a light synthetic city with fast model settings.
pub const SMALL_RUN: &str = r#"
seed = 11
out = "out"

[train]
cv_folds = 3

[forest]
n_trees = 8

[boost]
rounds = 30

[lstm]
hidden = 4
lookback = 4
epochs = 2

[synth]
start = "2017-05-01"
end = "2017-05-22"
base_trips_per_day = 150.0
"#;

pub fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

pub fn run(config: &Path, args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_velotrace"));
    cmd.arg("--config").arg(config).args(args);
    match threads {
        Some(n) => cmd.env("VELOTRACE_THREADS", n.to_string()),
        None => cmd.env_remove("VELOTRACE_THREADS"),
    };
    cmd.output().expect("binary runs")
}

pub const PIPELINE: [&[&str]; 8] = [
    &["synth"],
    &["ingest"],
    &["describe"],
    &["spatial"],
    &["covariates"],
    &["features", "--width", "30"],
    &["train", "--width", "30", "--model", "all"],
    &["predict", "--model", "linear", "--horizon", "30"],
];

/// Runs every stage and returns each exit code with its stderr.
pub fn run_pipeline(config: &Path, threads: Option<usize>) -> Vec<(String, Option<i32>, String)> {
    PIPELINE
        .iter()
        .map(|args| {
            let out = run(config, args, threads);
            (args[0].to_string(), out.status.code(), String::from_utf8_lossy(&out.stderr).into_owned())
        })
        .collect()
}
