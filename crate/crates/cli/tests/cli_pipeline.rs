//! Command-level behavior: file layouts, reruns, exit codes and the
//! cross-command consistency checks.

mod common;

use common::*;
use selfid_core::spaces::MemorySet;
use selfid_core::trainer::TrainSummary;

#[test]
fn generate_default_config_writes_full_dataset() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "config.json", r#"{"output_dir": "run"}"#);
    let out = selfid(dir.path(), &["generate", "--config", "config.json"]);
    assert_exit(&out, 0);
    let set = MemorySet::from_json(&read(dir.path(), "run/dataset.json")).unwrap();
    assert_eq!(set.memories.len(), 500 * 10);
    assert_eq!(set.k_c, 16);
    for name in ["labels.json", "manifest.json", "resolved_config.json"] {
        assert!(dir.path().join("run").join(name).exists(), "missing {name}");
    }
}

#[test]
fn generate_rerun_with_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "config.json", &toy_config(9, "run"));
    assert_exit(&selfid(dir.path(), &["generate", "--config", "config.json"]), 0);
    let first = read(dir.path(), "run/dataset.json");
    let first_manifest = read(dir.path(), "run/manifest.json");
    assert_exit(&selfid(dir.path(), &["generate", "--config", "config.json"]), 0);
    assert_eq!(first, read(dir.path(), "run/dataset.json"));
    assert_eq!(first_manifest, read(dir.path(), "run/manifest.json"));
}

#[test]
fn generate_rejects_zero_samples_with_usage_exit() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "config.json", r#"{"generator": {"n_samples": 0}}"#);
    let out = selfid(dir.path(), &["generate", "--config", "config.json"]);
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_samples"));
}

#[test]
fn train_rejects_zero_epochs_at_validation() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "config.json", r#"{"train": {"epochs": 0}}"#);
    let out = selfid(dir.path(), &["train", "--config", "config.json"]);
    assert_exit(&out, 2);
}

#[test]
fn train_requires_a_generated_dataset() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "config.json", &toy_config(1, "run"));
    let out = selfid(dir.path(), &["train", "--config", "config.json"]);
    assert_exit(&out, 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing dataset"));
}

#[test]
fn toy_pipeline_trains_to_tiny_loss_and_reports_consistent_percent() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "config.json", &toy_config(42, "run"));
    write(dir.path(), "measure.json", TOY_MEASURE);
    assert_exit(&selfid(dir.path(), &["generate", "--config", "config.json"]), 0);
    assert_exit(&selfid(dir.path(), &["train", "--config", "config.json"]), 0);

    let summary: TrainSummary =
        serde_json::from_str(&read(dir.path(), "run/summary.json")).unwrap();
    assert!(summary.final_loss <= 1e-6 * summary.initial_loss);
    let expected =
        selfid_core::textmetrics::percent_change(summary.initial_loss, summary.final_loss)
            .unwrap();
    assert_eq!(summary.percent_change, Some(expected));

    // Checkpoints at every eval epoch plus the final snapshot.
    for name in [
        "checkpoint_epoch_0500.json",
        "checkpoint_epoch_1000.json",
        "checkpoint_epoch_1500.json",
        "checkpoint_epoch_2000.json",
        "checkpoint_final.json",
        "trace.csv",
    ] {
        assert!(dir.path().join("run").join(name).exists(), "missing {name}");
    }
    let trace = read(dir.path(), "run/trace.csv");
    assert!(trace.starts_with("step,epoch,loss,grad_norm_preclip,update_norm"));
}

#[test]
fn verify_trained_passes_and_untrained_fails_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "config.json", &toy_config(42, "run"));
    write(dir.path(), "measure.json", TOY_MEASURE);
    assert_exit(&selfid(dir.path(), &["generate", "--config", "config.json"]), 0);
    assert_exit(&selfid(dir.path(), &["train", "--config", "config.json"]), 0);

    let trained = selfid(
        dir.path(),
        &["verify", "--config", "config.json", "--checkpoint", "run/checkpoint_final.json"],
    );
    assert_exit(&trained, 0);
    assert!(String::from_utf8_lossy(&trained.stdout).contains("s_star: atom 0"));
    let verdict: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "run/verdict.json")).unwrap();
    assert_eq!(verdict["overall"], serde_json::Value::Bool(true));

    // An untrained checkpoint with a tight tolerance must fail condition 2
    // and name the failing memories.
    write(dir.path(), "untrained.json", {
        let rec = selfid_core::recognition::AdaptedRecognizer::seeded(
            4,
            16,
            2,
            8.0,
            0.02,
            selfid_core::recognition::FeatureScaling {
                time_scale: 1e-4,
                emotion_scale: 2.0,
            },
            777,
        )
        .unwrap();
        &rec.to_json().unwrap()
    });
    let tight = toy_config(42, "run").replace("\"delta_s\": 0.05", "\"delta_s\": 0.01");
    write(dir.path(), "config_tight.json", &tight);
    let untrained = selfid(
        dir.path(),
        &["verify", "--config", "config_tight.json", "--checkpoint", "untrained.json"],
    );
    assert_exit(&untrained, 1);
    let stdout = String::from_utf8_lossy(&untrained.stdout);
    assert!(stdout.contains("failing memories"), "{stdout}");
    let verdict: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "run/verdict.json")).unwrap();
    assert_eq!(verdict["condition2"], serde_json::Value::Bool(false));
    assert_eq!(verdict["overall"], serde_json::Value::Bool(false));
}

#[test]
fn textmetrics_on_identical_corpora_reports_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = concat!(
        r#"{"prompt_id": 1, "epoch": 0, "response_text": "I think therefore I am", "score": 1.0}"#,
        "\n",
        r#"{"prompt_id": 2, "epoch": 0, "response_text": "no comment", "score": 0.0}"#,
        "\n"
    );
    write(dir.path(), "a.jsonl", corpus);
    let out = selfid(
        dir.path(),
        &["textmetrics", "--before", "a.jsonl", "--after", "a.jsonl", "--out", "tm"],
    );
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "tm/improvement_report.json")).unwrap();
    assert_eq!(report["mean_word_count"]["delta"], serde_json::json!(0.0));
    assert_eq!(report["mean_score"]["delta"], serde_json::json!(0.0));
    let freq = read(dir.path(), "tm/frequency_comparison.csv");
    for line in freq.lines().skip(1) {
        assert!(line.ends_with(",0"), "non-zero change in {line}");
    }
    assert!(dir.path().join("tm/prompt_scores.csv").exists());
}

#[test]
fn textmetrics_reports_malformed_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.jsonl",
        "{\"prompt_id\": 1, \"epoch\": 0, \"response_text\": \"ok\"}\nnot-json\n",
    );
    write(dir.path(), "good.jsonl", "{\"prompt_id\": 1, \"epoch\": 0, \"response_text\": \"ok\"}\n");
    let out = selfid(
        dir.path(),
        &["textmetrics", "--before", "bad.jsonl", "--after", "good.jsonl"],
    );
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn report_aggregates_available_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "config.json", &toy_config(5, "run"));
    assert_exit(&selfid(dir.path(), &["generate", "--config", "config.json"]), 0);
    let out = selfid(dir.path(), &["report", "--out", "run"]);
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "run/report.json")).unwrap();
    assert!(report["dataset"].is_object());
    assert!(report["config"].is_object());
    assert!(report["training"].is_null());

    let empty = tempfile::tempdir().unwrap();
    let out = selfid(empty.path(), &["report", "--out", "."]);
    assert_exit(&out, 3);
}

#[test]
fn rerunning_from_the_echoed_config_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "config.json", &toy_config(77, "run"));
    assert_exit(&selfid(dir.path(), &["generate", "--config", "config.json"]), 0);
    let dataset = read(dir.path(), "run/dataset.json");
    let echoed = read(dir.path(), "run/resolved_config.json");
    write(dir.path(), "echo.json", &echoed);
    assert_exit(
        &selfid(dir.path(), &["generate", "--config", "echo.json", "--out", "run2"]),
        0,
    );
    assert_eq!(dataset, read(dir.path(), "run2/dataset.json"));
}
