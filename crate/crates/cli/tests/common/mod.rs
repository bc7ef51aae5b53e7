//! Shared helpers for driving the `selfid` binary in tests.
#![allow(dead_code)] // not every test file uses every helper

use std::path::Path;
use std::process::{Command, Output};

pub fn selfid(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfid"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("selfid binary runs")
}

pub fn assert_exit(output: &Output, expected: i32) {
    let code = output.status.code().expect("exit code");
    assert_eq!(
        code,
        expected,
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

/// Config for the small constant-target task: 100 memories, 4 attributes,
/// rank-2 adapter, plain gradient descent at 0.05 for up to 2000 steps.
pub fn toy_config(seed: u64, out_dir: &str) -> String {
    format!(
        r#"{{
  "seed": {seed},
  "output_dir": "{out_dir}",
  "generator": {{"n_samples": 10, "memories_per_sample": 10, "k_c": 16, "step_sigma": 0.005, "time_stride": 1.0, "emotion_range": [1.0, 1.0]}},
  "recognizer": {{"n": 4, "rank_r": 2, "scaling_alpha": 8.0, "init_sigma": 0.02, "time_scale": 1e-4, "emotion_scale": 2.0}},
  "train": {{"learning_rate": 0.05, "epochs": 2000, "batch_size": 100, "grad_accum_steps": 1, "clip_max_norm": 1e9, "weight_decay": 0.0, "optimizer": "plain_gd", "eval_every_epochs": 500}},
  "target": {{"s_star": [0.6, -0.4, 0.8, 0.3], "noise_sigma": 0.0}},
  "measure_path": "measure.json",
  "tau": 0.1,
  "threshold_b": 0.8,
  "delta_s": 0.05,
  "epsilon": "mst-auto"
}}"#
    )
}

/// Two-atom measure: the toy target plus a decoy at distance 2.
pub const TOY_MEASURE: &str =
    r#"{"atoms": [[0.6, -0.4, 0.8, 0.3], [2.6, -0.4, 0.8, 0.3]], "weights": [1.0, 1.0]}"#;

pub fn write(dir: &Path, name: &str, contents: &str) {
    std::fs::write(dir.join(name), contents).expect("write test file");
}

pub fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}
