//! Response-corpus statistics: score aggregates, response length,
//! vocabulary diversity and word-frequency comparison tables.
//!
//! Scores arrive in the input files (one JSON record per line); this
//! module never judges text itself.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// One generated response with an optional externally assigned score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub prompt_id: u32,
    pub epoch: u32,
    pub response_text: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score: Option<f64>,
}

impl ResponseRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(1..=7).contains(&self.prompt_id) {
            return Err(format!("prompt_id must lie in 1..=7, got {}", self.prompt_id));
        }
        if let Some(s) = self.score {
            if s != 0.0 && s != 1.0 {
                return Err(format!("score must be exactly 0.0 or 1.0, got {s}"));
            }
        }
        Ok(())
    }
}

/// Read one record per line; errors carry the 1-based line number.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<ResponseRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ResponseRecord =
            serde_json::from_str(&line).map_err(|e| CoreError::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })?;
        record.validate().map_err(|reason| CoreError::MalformedRecord {
            line: i + 1,
            reason,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Lowercase and split on maximal runs of non-alphanumeric characters,
/// dropping empty tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordCount {
    pub word: String,
    pub count: u64,
}

/// Aggregate statistics for one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Mean and population standard deviation over the records that carry
    /// scores; absent when no record does.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score_std: Option<f64>,
    pub mean_word_count: f64,
    pub mean_unique_words: f64,
    /// Mean over responses of unique words / total words. Responses with
    /// no tokens are skipped; a corpus with only empty responses reports
    /// 1.0 (vacuously every word is unique).
    pub unique_ratio: f64,
    /// Counts aggregated over all responses, ranked by count descending,
    /// ties lexicographic.
    pub word_frequencies: Vec<WordCount>,
}

fn population_std(values: &[f64], mean: f64) -> f64 {
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

pub fn corpus_stats(records: &[ResponseRecord]) -> Result<CorpusStats> {
    if records.is_empty() {
        return Err(CoreError::EmptyInput("response records"));
    }
    let scores: Vec<f64> = records.iter().filter_map(|r| r.score).collect();
    let (mean_score, score_std) = if scores.is_empty() {
        (None, None)
    } else {
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        (Some(mean), Some(population_std(&scores, mean)))
    };

    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut total_words = 0.0;
    let mut total_unique = 0.0;
    let mut ratio_sum = 0.0;
    let mut ratio_n = 0usize;
    for r in records {
        let tokens = tokenize(&r.response_text);
        let unique: std::collections::BTreeSet<&str> =
            tokens.iter().map(|t| t.as_str()).collect();
        total_words += tokens.len() as f64;
        total_unique += unique.len() as f64;
        if !tokens.is_empty() {
            ratio_sum += unique.len() as f64 / tokens.len() as f64;
            ratio_n += 1;
        }
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    let n = records.len() as f64;
    let mut word_frequencies: Vec<WordCount> = counts
        .into_iter()
        .map(|(word, count)| WordCount { word, count })
        .collect();
    word_frequencies.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));

    Ok(CorpusStats {
        mean_score,
        score_std,
        mean_word_count: total_words / n,
        mean_unique_words: total_unique / n,
        unique_ratio: if ratio_n > 0 { ratio_sum / ratio_n as f64 } else { 1.0 },
        word_frequencies,
    })
}

/// Signed percent change `100 * (after - before) / before`.
///
/// Not antisymmetric: swapping the arguments does not negate the result
/// (the baseline changes), so reports always state which side was the
/// baseline.
pub fn percent_change(before: f64, after: f64) -> Result<f64> {
    if before == 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "before",
            reason: "percent change is undefined for a zero baseline".into(),
        });
    }
    Ok(100.0 * (after - before) / before)
}

/// Round half away from zero to one decimal, the convention used in
/// report tables.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub word: String,
    pub before_count: u64,
    pub after_count: u64,
    /// Rounded to one decimal; absent for words unseen in the before
    /// corpus (change from zero is undefined).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub percent_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyComparison {
    pub rows: Vec<FrequencyRow>,
}

impl FrequencyComparison {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["word", "before_count", "after_count", "percent_change"])?;
        for r in &self.rows {
            w.write_record([
                r.word.clone(),
                r.before_count.to_string(),
                r.after_count.to_string(),
                r.percent_change.map(|p| p.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Top `top_n` words by combined count across both corpora (ties
/// lexicographic), with per-word counts and percent change.
pub fn frequency_comparison(
    before: &[ResponseRecord],
    after: &[ResponseRecord],
    top_n: usize,
) -> Result<FrequencyComparison> {
    if before.is_empty() || after.is_empty() {
        return Err(CoreError::EmptyInput("frequency comparison corpora"));
    }
    if top_n == 0 {
        return Err(CoreError::InvalidParameter {
            name: "top_n",
            reason: "must be at least 1".into(),
        });
    }
    let count_corpus = |records: &[ResponseRecord]| -> HashMap<String, u64> {
        let mut counts = HashMap::new();
        for r in records {
            for t in tokenize(&r.response_text) {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
        counts
    };
    let before_counts = count_corpus(before);
    let after_counts = count_corpus(after);
    let mut words: std::collections::BTreeSet<&String> =
        before_counts.keys().collect();
    words.extend(after_counts.keys());

    let mut ranked: Vec<(&String, u64)> = words
        .into_iter()
        .map(|w| {
            let combined = before_counts.get(w).copied().unwrap_or(0)
                + after_counts.get(w).copied().unwrap_or(0);
            (w, combined)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(top_n);

    let rows = ranked
        .into_iter()
        .map(|(word, _)| {
            let b = before_counts.get(word).copied().unwrap_or(0);
            let a = after_counts.get(word).copied().unwrap_or(0);
            let pct = if b > 0 {
                Some(round1(percent_change(b as f64, a as f64).expect("nonzero baseline")))
            } else {
                None
            };
            FrequencyRow {
                word: word.clone(),
                before_count: b,
                after_count: a,
                percent_change: pct,
            }
        })
        .collect();
    Ok(FrequencyComparison { rows })
}

/// Before/after pair with its absolute delta and rounded percent change
/// (absent when the baseline is zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricChange {
    pub before: f64,
    pub after: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub percent: Option<f64>,
}

impl MetricChange {
    pub fn new(before: f64, after: f64) -> Self {
        MetricChange {
            before,
            after,
            delta: after - before,
            percent: if before != 0.0 {
                Some(round1(100.0 * (after - before) / before))
            } else {
                None
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptScoreChange {
    pub prompt_id: u32,
    pub before_mean: f64,
    pub after_mean: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_score: Option<MetricChange>,
    /// The standard-deviation change reports both values and the signed
    /// direction; no monotonicity is implied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score_std: Option<MetricChange>,
    pub mean_word_count: MetricChange,
    pub mean_unique_words: MetricChange,
    pub unique_ratio: MetricChange,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_prompt: Option<Vec<PromptScoreChange>>,
}

/// Absolute deltas and percent changes between two corpus summaries.
pub fn improvement_report(baseline: &CorpusStats, finals: &CorpusStats) -> ImprovementReport {
    let opt_change = |b: Option<f64>, a: Option<f64>| match (b, a) {
        (Some(b), Some(a)) => Some(MetricChange::new(b, a)),
        _ => None,
    };
    ImprovementReport {
        mean_score: opt_change(baseline.mean_score, finals.mean_score),
        score_std: opt_change(baseline.score_std, finals.score_std),
        mean_word_count: MetricChange::new(baseline.mean_word_count, finals.mean_word_count),
        mean_unique_words: MetricChange::new(baseline.mean_unique_words, finals.mean_unique_words),
        unique_ratio: MetricChange::new(baseline.unique_ratio, finals.unique_ratio),
        per_prompt: None,
    }
}

/// Mean score per prompt id over the records that carry scores.
pub fn per_prompt_mean_scores(records: &[ResponseRecord]) -> std::collections::BTreeMap<u32, f64> {
    let mut sums: std::collections::BTreeMap<u32, (f64, usize)> = Default::default();
    for r in records {
        if let Some(s) = r.score {
            let e = sums.entry(r.prompt_id).or_insert((0.0, 0));
            e.0 += s;
            e.1 += 1;
        }
    }
    sums.into_iter().map(|(k, (sum, n))| (k, sum / n as f64)).collect()
}

/// Per-prompt score deltas between two corpora, for prompts scored in both.
pub fn per_prompt_changes(
    before: &[ResponseRecord],
    after: &[ResponseRecord],
) -> Vec<PromptScoreChange> {
    let b = per_prompt_mean_scores(before);
    let a = per_prompt_mean_scores(after);
    b.into_iter()
        .filter_map(|(prompt_id, before_mean)| {
            a.get(&prompt_id).map(|&after_mean| PromptScoreChange {
                prompt_id,
                before_mean,
                after_mean,
                delta: after_mean - before_mean,
            })
        })
        .collect()
}

/// Score consistency per prompt per epoch: count, mean and population
/// standard deviation of the scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptEpochRow {
    pub prompt_id: u32,
    pub epoch: u32,
    pub n: usize,
    pub mean_score: f64,
    pub score_std: f64,
}

pub fn prompt_epoch_table(records: &[ResponseRecord]) -> Vec<PromptEpochRow> {
    let mut groups: std::collections::BTreeMap<(u32, u32), Vec<f64>> = Default::default();
    for r in records {
        if let Some(s) = r.score {
            groups.entry((r.prompt_id, r.epoch)).or_default().push(s);
        }
    }
    groups
        .into_iter()
        .map(|((prompt_id, epoch), scores)| {
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            PromptEpochRow {
                prompt_id,
                epoch,
                n: scores.len(),
                mean_score: mean,
                score_std: population_std(&scores, mean),
            }
        })
        .collect()
}

pub fn write_prompt_epoch_csv<W: Write>(rows: &[PromptEpochRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["prompt_id", "epoch", "n", "mean_score", "score_std"])?;
    for r in rows {
        w.write_record([
            r.prompt_id.to_string(),
            r.epoch.to_string(),
            r.n.to_string(),
            r.mean_score.to_string(),
            r.score_std.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
