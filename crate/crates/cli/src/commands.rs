//! Subcommand implementations. Every command resolves its configuration,
//! runs the corresponding pipeline stage, and persists results under the
//! output directory.

use std::fs;
use std::path::{Path, PathBuf};

use selfid_core::belief::{BeliefThreshold, IdentityMeasure};
use selfid_core::continuum::minimal_connecting_epsilon;
use selfid_core::recognition::AdaptedRecognizer;
use selfid_core::spaces::{pairwise_distance_matrix, MemorySet};
use selfid_core::synthdata::{generate, label_with_target, to_memory_set, LabelsFile};
use selfid_core::textmetrics::{
    corpus_stats, frequency_comparison, improvement_report, per_prompt_changes,
    prompt_epoch_table, read_jsonl, write_prompt_epoch_csv, ResponseRecord,
};
use selfid_core::trainer::{train, verify_self_possession};
use selfid_core::{CoreError, SelfIdentity};

use crate::config::{EpsilonPolicy, ExperimentConfig};
use crate::CliError;

fn runtime(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{context}: {e}"))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| runtime(&format!("writing {}", path.display()), e))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| runtime(&format!("reading {}", path.display()), e))
}

fn resolve_out_dir(cfg: &ExperimentConfig, out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir))
}

fn load_dataset(dir: &Path) -> Result<MemorySet, CliError> {
    let path = dir.join("dataset.json");
    if !path.exists() {
        return Err(CliError::Runtime(format!(
            "missing dataset {}; run `selfid generate` first",
            path.display()
        )));
    }
    MemorySet::from_json(&read_file(&path)?).map_err(|e| runtime("parsing dataset", e))
}

pub fn cmd_generate(config: &Path, out: &Option<PathBuf>) -> Result<u8, CliError> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = resolve_out_dir(&cfg, out);
    fs::create_dir_all(&dir).map_err(|e| runtime(&format!("creating {}", dir.display()), e))?;

    let gen_cfg = cfg.generator_config();
    let (samples, mut manifest) = generate(&gen_cfg).map_err(|e| runtime("generating", e))?;
    let s_star = SelfIdentity::new(cfg.target.s_star.clone());
    let labeled = label_with_target(&samples, &s_star, cfg.target.noise_sigma, cfg.label_seed());

    let set = to_memory_set(&samples, gen_cfg.k_c).map_err(|e| runtime("flattening", e))?;
    let labels = LabelsFile::from_labeled(&labeled, cfg.recognizer.n);
    manifest.dataset_path = Some("dataset.json".into());
    manifest.labels_path = Some("labels.json".into());

    write_file(&dir, "dataset.json", &set.to_json().map_err(|e| runtime("dataset json", e))?)?;
    write_file(&dir, "labels.json", &labels.to_json().map_err(|e| runtime("labels json", e))?)?;
    write_file(
        &dir,
        "manifest.json",
        &serde_json::to_string_pretty(&manifest).map_err(|e| runtime("manifest json", e))?,
    )?;
    write_file(&dir, "resolved_config.json", &cfg.to_pretty_json())?;

    println!(
        "generated {} samples x {} memories (guaranteed epsilon {:.6}) -> {}",
        gen_cfg.n_samples,
        gen_cfg.memories_per_sample,
        manifest.guaranteed_epsilon,
        dir.display()
    );
    Ok(0)
}

pub fn cmd_train(config: &Path, out: &Option<PathBuf>) -> Result<u8, CliError> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = resolve_out_dir(&cfg, out);
    let set = load_dataset(&dir)?;
    let labels_text = read_file(&dir.join("labels.json"))?;
    let labels = LabelsFile::from_json(&labels_text).map_err(|e| runtime("parsing labels", e))?;
    let data = labels.join(&set.memories).map_err(|e| runtime("joining labels", e))?;

    let rec0 = AdaptedRecognizer::seeded(
        cfg.recognizer.n,
        set.k_c,
        cfg.recognizer.rank_r,
        cfg.recognizer.scaling_alpha,
        cfg.recognizer.init_sigma,
        cfg.recognizer.feature_scaling(),
        cfg.recognizer_seed(),
    )
    .map_err(|e| runtime("initializing recognizer", e))?;

    let (trained, trace) = train(&rec0, &data, &cfg.train_config()).map_err(|e| runtime("training", e))?;

    let mut csv_bytes = Vec::new();
    trace.write_csv(&mut csv_bytes).map_err(|e| runtime("trace csv", e))?;
    write_file(&dir, "trace.csv", &String::from_utf8(csv_bytes).expect("csv is utf-8"))?;
    let summary = trace.summary();
    write_file(
        &dir,
        "summary.json",
        &serde_json::to_string_pretty(&summary).map_err(|e| runtime("summary json", e))?,
    )?;
    for (epoch, rec) in &trace.checkpoints {
        write_file(
            &dir,
            &format!("checkpoint_epoch_{epoch:04}.json"),
            &rec.to_json().map_err(|e| runtime("checkpoint json", e))?,
        )?;
    }
    write_file(
        &dir,
        "checkpoint_final.json",
        &trained.to_json().map_err(|e| runtime("checkpoint json", e))?,
    )?;

    match summary.percent_change {
        Some(pct) => println!(
            "trained: loss {:.6e} -> {:.6e} ({pct:+.1}%)",
            summary.initial_loss, summary.final_loss
        ),
        None => println!(
            "trained: loss {:.6e} -> {:.6e}",
            summary.initial_loss, summary.final_loss
        ),
    }
    Ok(0)
}

pub fn cmd_verify(config: &Path, checkpoint: &Path, out: &Option<PathBuf>) -> Result<u8, CliError> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = resolve_out_dir(&cfg, out);
    let set = load_dataset(&dir)?;
    let rec = AdaptedRecognizer::from_json(&read_file(checkpoint)?)
        .map_err(|e| runtime("parsing checkpoint", e))?;
    let mu = IdentityMeasure::from_json(&read_file(Path::new(&cfg.measure_path))?)
        .map_err(|e| runtime("parsing measure", e))?;

    let epsilon = match cfg.epsilon {
        EpsilonPolicy::Explicit(e) => e,
        EpsilonPolicy::MstAuto => {
            let d = pairwise_distance_matrix(&set.memories, &cfg.memory_metric)
                .map_err(|e| runtime("distances", e))?;
            minimal_connecting_epsilon(&d)
        }
    };
    let threshold = BeliefThreshold::new(cfg.threshold_b).map_err(|e| runtime("threshold", e))?;
    let verdict = verify_self_possession(
        &rec,
        &set.memories,
        &cfg.memory_metric,
        epsilon,
        &mu,
        cfg.tau,
        threshold,
        cfg.delta_s,
    )
    .map_err(|e| runtime("verifying", e))?;

    write_file(
        &dir,
        "verdict.json",
        &verdict.to_json().map_err(|e| runtime("verdict json", e))?,
    )?;

    println!(
        "condition1 (continuum): {}  condition2 (recognition+belief): {}  overall: {}",
        verdict.condition1, verdict.condition2, verdict.overall
    );
    if let (Some(idx), Some(s)) = (&verdict.s_star_index, &verdict.s_star) {
        println!("s_star: atom {idx} = {:?}", s.attributes);
    }
    if !verdict.overall {
        let failing: Vec<&str> = verdict
            .rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.memory_id.as_str())
            .collect();
        if !failing.is_empty() {
            let shown = failing.len().min(10);
            println!(
                "failing memories ({} total): {}{}",
                failing.len(),
                failing[..shown].join(", "),
                if failing.len() > shown { ", ..." } else { "" }
            );
        }
        return Ok(1);
    }
    Ok(0)
}

fn read_records(path: &Path) -> Result<Vec<ResponseRecord>, CliError> {
    let file = fs::File::open(path).map_err(|e| runtime(&format!("opening {}", path.display()), e))?;
    read_jsonl(std::io::BufReader::new(file)).map_err(|e| match e {
        CoreError::MalformedRecord { .. } => {
            CliError::Input(format!("{}: {e}", path.display()))
        }
        other => runtime(&format!("reading {}", path.display()), other),
    })
}

pub fn cmd_textmetrics(
    before: &Path,
    after: &Path,
    top_n: usize,
    out: &Path,
) -> Result<u8, CliError> {
    let before_records = read_records(before)?;
    let after_records = read_records(after)?;
    fs::create_dir_all(out).map_err(|e| runtime(&format!("creating {}", out.display()), e))?;

    let base_stats = corpus_stats(&before_records).map_err(|e| runtime("before stats", e))?;
    let final_stats = corpus_stats(&after_records).map_err(|e| runtime("after stats", e))?;
    let mut report = improvement_report(&base_stats, &final_stats);
    let prompt_changes = per_prompt_changes(&before_records, &after_records);
    if !prompt_changes.is_empty() {
        report.per_prompt = Some(prompt_changes);
    }

    let comparison = frequency_comparison(&before_records, &after_records, top_n)
        .map_err(|e| runtime("frequency comparison", e))?;

    let all_records: Vec<ResponseRecord> = before_records
        .iter()
        .chain(&after_records)
        .cloned()
        .collect();
    let prompt_rows = prompt_epoch_table(&all_records);

    write_file(
        out,
        "improvement_report.json",
        &serde_json::to_string_pretty(&report).map_err(|e| runtime("report json", e))?,
    )?;
    let mut freq_csv = Vec::new();
    comparison.write_csv(&mut freq_csv).map_err(|e| runtime("frequency csv", e))?;
    write_file(out, "frequency_comparison.csv", &String::from_utf8(freq_csv).expect("utf-8"))?;
    let mut prompt_csv = Vec::new();
    write_prompt_epoch_csv(&prompt_rows, &mut prompt_csv).map_err(|e| runtime("prompt csv", e))?;
    write_file(out, "prompt_scores.csv", &String::from_utf8(prompt_csv).expect("utf-8"))?;

    match (&report.mean_score, &report.mean_word_count.percent) {
        (Some(score), _) => println!(
            "mean score {:.3} -> {:.3}; word count {:.1} -> {:.1}; reports in {}",
            score.before,
            score.after,
            report.mean_word_count.before,
            report.mean_word_count.after,
            out.display()
        ),
        _ => println!(
            "word count {:.1} -> {:.1}; reports in {}",
            report.mean_word_count.before,
            report.mean_word_count.after,
            out.display()
        ),
    }
    Ok(0)
}

pub fn cmd_report(out: &Path) -> Result<u8, CliError> {
    let load = |name: &str| -> Option<serde_json::Value> {
        let path = out.join(name);
        let text = fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    };
    let config = load("resolved_config.json");
    let manifest = load("manifest.json");
    let summary = load("summary.json");
    let verdict = load("verdict.json");
    let textmetrics = load("improvement_report.json");
    if config.is_none()
        && manifest.is_none()
        && summary.is_none()
        && verdict.is_none()
        && textmetrics.is_none()
    {
        return Err(CliError::Runtime(format!(
            "nothing to aggregate in {}",
            out.display()
        )));
    }
    let report = serde_json::json!({
        "config": config,
        "dataset": manifest,
        "training": summary,
        "verdict": verdict,
        "textmetrics": textmetrics,
    });
    write_file(
        out,
        "report.json",
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    println!("aggregated report -> {}", out.join("report.json").display());
    Ok(0)
}
