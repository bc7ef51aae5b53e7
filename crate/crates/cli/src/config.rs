//! Experiment configuration: one JSON document, every field optional with
//! documented defaults, unknown fields rejected. A single top-level seed
//! deterministically derives the per-stage seeds, so the nested sections
//! deliberately carry no seed fields of their own.

use std::path::Path;

use serde::{Deserialize, Serialize};
use selfid_core::recognition::FeatureScaling;
use selfid_core::spaces::{ContentMetric, MemoryMetricConfig, SelfMetricConfig};
use selfid_core::synthdata::GeneratorConfig;
use selfid_core::trainer::{OptimizerKind, TrainConfig};

use crate::CliError;

fn fnv1a(label: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stage seed derived from the root seed and a stage label.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    splitmix64(root ^ fnv1a(label))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub n_samples: usize,
    pub memories_per_sample: usize,
    pub k_c: usize,
    pub step_sigma: f64,
    pub time_stride: f64,
    pub emotion_range: [f64; 2],
}

impl Default for GeneratorSection {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        GeneratorSection {
            n_samples: g.n_samples,
            memories_per_sample: g.memories_per_sample,
            k_c: g.k_c,
            step_sigma: g.step_sigma,
            time_stride: g.time_stride,
            emotion_range: g.emotion_range,
        }
    }
}

impl GeneratorSection {
    pub fn to_config(&self, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n_samples: self.n_samples,
            memories_per_sample: self.memories_per_sample,
            k_c: self.k_c,
            step_sigma: self.step_sigma,
            time_stride: self.time_stride,
            emotion_range: self.emotion_range,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecognizerSection {
    pub n: usize,
    pub rank_r: usize,
    pub scaling_alpha: f64,
    pub init_sigma: f64,
    pub time_scale: f64,
    pub emotion_scale: f64,
}

impl Default for RecognizerSection {
    fn default() -> Self {
        RecognizerSection {
            // The default rank is 8, so the self dimension must allow it.
            n: 8,
            rank_r: 8,
            scaling_alpha: 8.0,
            init_sigma: 0.02,
            time_scale: 1.0,
            emotion_scale: 1.0,
        }
    }
}

impl RecognizerSection {
    pub fn feature_scaling(&self) -> FeatureScaling {
        FeatureScaling {
            time_scale: self.time_scale,
            emotion_scale: self.emotion_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub grad_accum_steps: usize,
    pub clip_max_norm: f64,
    pub weight_decay: f64,
    pub optimizer: OptimizerKind,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub eval_every_epochs: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            grad_accum_steps: t.grad_accum_steps,
            clip_max_norm: t.clip_max_norm,
            weight_decay: t.weight_decay,
            optimizer: t.optimizer,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            eval_every_epochs: t.eval_every_epochs,
        }
    }
}

impl TrainSection {
    pub fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            grad_accum_steps: self.grad_accum_steps,
            clip_max_norm: self.clip_max_norm,
            weight_decay: self.weight_decay,
            optimizer: self.optimizer,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            eval_every_epochs: self.eval_every_epochs,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    /// Ground-truth identity for labeling. Empty means "all ones" at the
    /// recognizer dimension, resolved at load time.
    pub s_star: Vec<f64>,
    pub noise_sigma: f64,
}

impl Default for TargetSection {
    fn default() -> Self {
        TargetSection {
            s_star: Vec::new(),
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonPolicy {
    /// Use the largest edge of a minimum spanning tree over the dataset:
    /// the smallest radius that connects everything.
    MstAuto,
    Explicit(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: String,
    pub generator: GeneratorSection,
    pub memory_metric: MemoryMetricConfig,
    pub self_metric: SelfMetricConfig,
    pub recognizer: RecognizerSection,
    pub train: TrainSection,
    pub target: TargetSection,
    pub measure_path: String,
    pub tau: f64,
    pub threshold_b: f64,
    pub delta_s: f64,
    pub epsilon: EpsilonPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: "out".into(),
            generator: GeneratorSection::default(),
            memory_metric: MemoryMetricConfig {
                w_t: 1.0,
                w_c: 1.0,
                w_e: 1.0,
                content_metric: ContentMetric::Euclidean,
            },
            self_metric: SelfMetricConfig::default(),
            recognizer: RecognizerSection::default(),
            train: TrainSection::default(),
            target: TargetSection::default(),
            measure_path: "measure.json".into(),
            tau: 0.1,
            threshold_b: 0.8,
            delta_s: 0.05,
            epsilon: EpsilonPolicy::MstAuto,
        }
    }
}

impl ExperimentConfig {
    /// Parse, resolve defaults (including the target vector) and validate,
    /// collecting every violation into one message.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        cfg.resolve();
        let violations = cfg.violations();
        if !violations.is_empty() {
            return Err(CliError::Config(format!(
                "invalid config {}:\n  - {}",
                path.display(),
                violations.join("\n  - ")
            )));
        }
        Ok(cfg)
    }

    /// Fill derived defaults in place.
    pub fn resolve(&mut self) {
        if self.target.s_star.is_empty() {
            self.target.s_star = vec![1.0; self.recognizer.n];
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.generator.to_config(0).validate() {
            out.push(format!("generator: {e}"));
        }
        if let Err(e) = self.memory_metric.validate() {
            out.push(format!("memory_metric: {e}"));
        }
        if let Err(e) = self.self_metric.validate() {
            out.push(format!("self_metric: {e}"));
        }
        if let Err(e) = self.train.to_config(0).validate() {
            out.push(format!("train: {e}"));
        }
        let r = &self.recognizer;
        if r.n == 0 {
            out.push("recognizer: n must be at least 1".into());
        }
        let k = r.k_c_features(&self.generator);
        if r.rank_r == 0 || r.rank_r > r.n.min(k) {
            out.push(format!(
                "recognizer: rank_r must satisfy 1 <= r <= min(n, k_c + 2) = {}",
                r.n.min(k)
            ));
        }
        if !(r.init_sigma.is_finite() && r.init_sigma >= 0.0) {
            out.push(format!("recognizer: init_sigma must be nonnegative, got {}", r.init_sigma));
        }
        if !(r.scaling_alpha.is_finite() && r.scaling_alpha > 0.0) {
            out.push(format!("recognizer: scaling_alpha must be positive, got {}", r.scaling_alpha));
        }
        if self.target.s_star.len() != r.n {
            out.push(format!(
                "target: s_star has dimension {} but recognizer n is {}",
                self.target.s_star.len(),
                r.n
            ));
        }
        if !(self.target.noise_sigma.is_finite() && self.target.noise_sigma >= 0.0) {
            out.push(format!("target: noise_sigma must be nonnegative, got {}", self.target.noise_sigma));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            out.push(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.threshold_b.is_finite() && self.threshold_b > 0.0 && self.threshold_b <= 1.0) {
            out.push(format!("threshold_b must lie in (0, 1], got {}", self.threshold_b));
        }
        if !(self.delta_s.is_finite() && self.delta_s >= 0.0) {
            out.push(format!("delta_s must be nonnegative, got {}", self.delta_s));
        }
        if let EpsilonPolicy::Explicit(e) = self.epsilon {
            if !(e.is_finite() && e > 0.0) {
                out.push(format!("epsilon: explicit radius must be positive, got {e}"));
            }
        }
        out
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        self.generator.to_config(derive_seed(self.seed, "generator"))
    }

    pub fn train_config(&self) -> TrainConfig {
        self.train.to_config(derive_seed(self.seed, "train"))
    }

    pub fn label_seed(&self) -> u64 {
        derive_seed(self.seed, "labels")
    }

    pub fn recognizer_seed(&self) -> u64 {
        derive_seed(self.seed, "recognizer")
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

impl RecognizerSection {
    fn k_c_features(&self, generator: &GeneratorSection) -> usize {
        generator.k_c + 2
    }
}
