//! Identity recognition: a frozen affine base map with an additive
//! low-rank adapter.
//!
//! The effective map is `m -> (W0 + (alpha/r) * A * B) * x(m) + bias`,
//! where `x(m)` is the memory's feature vector (content with scaled time
//! and emotion appended). The base `W0`/`bias` never trains; only the
//! factors `A` (n x r) and `B` (r x k) do.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::Matrix;
use crate::spaces::{memory_distance, self_distance_l2, Memory, MemoryMetricConfig, SelfIdentity};

/// Multiplicative scalings applied to time and emotion before they are
/// appended to the content embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureScaling {
    pub time_scale: f64,
    pub emotion_scale: f64,
}

impl Default for FeatureScaling {
    fn default() -> Self {
        FeatureScaling {
            time_scale: 1.0,
            emotion_scale: 1.0,
        }
    }
}

/// `[content..., t * time_scale, e * emotion_scale]`; always `k_c + 2` long.
pub fn feature_vector(m: &Memory, scaling: &FeatureScaling) -> Vec<f64> {
    let mut x = Vec::with_capacity(m.content.len() + 2);
    x.extend_from_slice(&m.content);
    x.push(m.time * scaling.time_scale);
    x.push(m.emotion * scaling.emotion_scale);
    x
}

/// Frozen base map plus trainable low-rank adapter factors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedRecognizer {
    theta0_weights: Matrix,
    theta0_bias: Vec<f64>,
    adapter_a: Matrix,
    adapter_b: Matrix,
    rank_r: usize,
    scaling_alpha: f64,
    feature_scaling: FeatureScaling,
    init_seed: u64,
}

impl AdaptedRecognizer {
    /// Assemble from explicit parts. `theta0_weights` is n x k,
    /// `adapter_a` n x r, `adapter_b` r x k, with `r <= min(n, k)`.
    pub fn from_parts(
        theta0_weights: Matrix,
        theta0_bias: Vec<f64>,
        adapter_a: Matrix,
        adapter_b: Matrix,
        scaling_alpha: f64,
        feature_scaling: FeatureScaling,
    ) -> Result<Self> {
        let n = theta0_weights.rows();
        let k = theta0_weights.cols();
        let r = adapter_a.cols();
        if theta0_bias.len() != n {
            return Err(CoreError::DimensionMismatch {
                context: "recognizer bias",
                left: n,
                right: theta0_bias.len(),
            });
        }
        if adapter_a.rows() != n {
            return Err(CoreError::DimensionMismatch {
                context: "adapter A rows",
                left: n,
                right: adapter_a.rows(),
            });
        }
        if adapter_b.rows() != r || adapter_b.cols() != k {
            return Err(CoreError::DimensionMismatch {
                context: "adapter B shape",
                left: r * k,
                right: adapter_b.rows() * adapter_b.cols(),
            });
        }
        if r == 0 || r > n.min(k) {
            return Err(CoreError::InvalidParameter {
                name: "rank_r",
                reason: format!("rank must satisfy 1 <= r <= min(n, k) = {}, got {r}", n.min(k)),
            });
        }
        if !(scaling_alpha.is_finite() && scaling_alpha > 0.0) {
            return Err(CoreError::InvalidParameter {
                name: "scaling_alpha",
                reason: format!("must be a positive finite real, got {scaling_alpha}"),
            });
        }
        if !theta0_weights.is_finite()
            || !adapter_a.is_finite()
            || !adapter_b.is_finite()
            || theta0_bias.iter().any(|v| !v.is_finite())
        {
            return Err(CoreError::NonFinite("recognizer parameters".into()));
        }
        Ok(AdaptedRecognizer {
            theta0_weights,
            theta0_bias,
            adapter_a,
            adapter_b,
            rank_r: r,
            scaling_alpha,
            feature_scaling,
            init_seed: 0,
        })
    }

    /// Fresh recognizer with a zero base map: `A` entries drawn from a
    /// seeded centered Gaussian (sigma `init_sigma`), `B` zero, so the
    /// map starts exactly at the base.
    pub fn seeded(
        n: usize,
        k_c: usize,
        rank_r: usize,
        scaling_alpha: f64,
        init_sigma: f64,
        feature_scaling: FeatureScaling,
        seed: u64,
    ) -> Result<Self> {
        let k = k_c + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, init_sigma).map_err(|e| CoreError::InvalidParameter {
            name: "init_sigma",
            reason: e.to_string(),
        })?;
        let mut a = Matrix::zeros(n, rank_r);
        for i in 0..n {
            for j in 0..rank_r {
                a.set(i, j, normal.sample(&mut rng));
            }
        }
        let mut rec = AdaptedRecognizer::from_parts(
            Matrix::zeros(n, k),
            vec![0.0; n],
            a,
            Matrix::zeros(rank_r, k),
            scaling_alpha,
            feature_scaling,
        )?;
        rec.init_seed = seed;
        Ok(rec)
    }

    pub fn n(&self) -> usize {
        self.theta0_weights.rows()
    }

    pub fn k(&self) -> usize {
        self.theta0_weights.cols()
    }

    pub fn k_c(&self) -> usize {
        self.k() - 2
    }

    pub fn rank(&self) -> usize {
        self.rank_r
    }

    pub fn alpha(&self) -> f64 {
        self.scaling_alpha
    }

    /// Adapter scale `alpha / r`.
    pub fn adapter_scale(&self) -> f64 {
        self.scaling_alpha / self.rank_r as f64
    }

    pub fn feature_scaling(&self) -> &FeatureScaling {
        &self.feature_scaling
    }

    pub fn adapter_a(&self) -> &Matrix {
        &self.adapter_a
    }

    pub fn adapter_b(&self) -> &Matrix {
        &self.adapter_b
    }

    pub fn theta0_weights(&self) -> &Matrix {
        &self.theta0_weights
    }

    pub fn theta0_bias(&self) -> &[f64] {
        &self.theta0_bias
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub(crate) fn adapter_mut(&mut self) -> (&mut Matrix, &mut Matrix) {
        (&mut self.adapter_a, &mut self.adapter_b)
    }

    /// Materialized `W0 + (alpha/r) A B`.
    pub fn effective_weights(&self) -> Matrix {
        let mut w = self.adapter_a.matmul(&self.adapter_b);
        w.scale(self.adapter_scale());
        w.add_assign_scaled(&self.theta0_weights, 1.0);
        w
    }

    pub fn features(&self, m: &Memory) -> Vec<f64> {
        feature_vector(m, &self.feature_scaling)
    }

    fn check_input(&self, m: &Memory) -> Result<()> {
        if m.content.len() + 2 != self.k() {
            return Err(CoreError::DimensionMismatch {
                context: "recognizer input features",
                left: self.k(),
                right: m.content.len() + 2,
            });
        }
        Ok(())
    }

    /// Apply the adapted map to one memory.
    pub fn recognize(&self, m: &Memory) -> Result<SelfIdentity> {
        self.check_input(m)?;
        let x = self.features(m);
        let mut y = self.theta0_weights.matvec(&x);
        let bx = self.adapter_b.matvec(&x);
        let abx = self.adapter_a.matvec(&bx);
        let s = self.adapter_scale();
        for (yi, (ai, bi)) in y.iter_mut().zip(abx.iter().zip(&self.theta0_bias)) {
            *yi += s * ai + bi;
        }
        Ok(SelfIdentity::new(y))
    }

    /// The frozen base map alone: `W0 x + bias`.
    pub fn base_output(&self, m: &Memory) -> Result<SelfIdentity> {
        self.check_input(m)?;
        let x = self.features(m);
        let mut y = self.theta0_weights.matvec(&x);
        for (yi, bi) in y.iter_mut().zip(&self.theta0_bias) {
            *yi += bi;
        }
        Ok(SelfIdentity::new(y))
    }

    /// Checkpoint serialization: dimensions, seed, scaling constants and
    /// flattened row-major matrices. Round-trips bit-exactly for finite
    /// doubles.
    pub fn to_json(&self) -> Result<String> {
        let file = CheckpointFile {
            n: self.n(),
            k_c: self.k_c(),
            rank_r: self.rank_r,
            seed: self.init_seed,
            scaling_alpha: self.scaling_alpha,
            time_scale: self.feature_scaling.time_scale,
            emotion_scale: self.feature_scaling.emotion_scale,
            theta0_weights: self.theta0_weights.data().to_vec(),
            theta0_bias: self.theta0_bias.clone(),
            adapter_a: self.adapter_a.data().to_vec(),
            adapter_b: self.adapter_b.data().to_vec(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(s)?;
        let k = file.k_c + 2;
        let mut rec = AdaptedRecognizer::from_parts(
            Matrix::from_flat(file.n, k, file.theta0_weights)?,
            file.theta0_bias,
            Matrix::from_flat(file.n, file.rank_r, file.adapter_a)?,
            Matrix::from_flat(file.rank_r, k, file.adapter_b)?,
            file.scaling_alpha,
            FeatureScaling {
                time_scale: file.time_scale,
                emotion_scale: file.emotion_scale,
            },
        )?;
        rec.init_seed = file.seed;
        Ok(rec)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    n: usize,
    k_c: usize,
    rank_r: usize,
    seed: u64,
    scaling_alpha: f64,
    time_scale: f64,
    emotion_scale: f64,
    theta0_weights: Vec<f64>,
    theta0_bias: Vec<f64>,
    adapter_a: Vec<f64>,
    adapter_b: Vec<f64>,
}

/// Empirical continuity diagnostic: the largest observed ratio
/// `d_S(I(m1), I(m2)) / d_M(m1, m2)` over sampled pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityDiagnostic {
    pub lipschitz_estimate: f64,
    pub sample_pairs: usize,
}

/// Sample `pairs` distinct index pairs (seeded) and report the maximum
/// distance-ratio. Pairs at zero memory distance are skipped; a set whose
/// pairwise distances are all zero is rejected as degenerate.
pub fn estimate_lipschitz(
    rec: &AdaptedRecognizer,
    memories: &[Memory],
    cfg: &MemoryMetricConfig,
    pairs: usize,
    seed: u64,
) -> Result<ContinuityDiagnostic> {
    if memories.len() < 2 {
        return Err(CoreError::EmptyInput("need at least two memories"));
    }
    if pairs == 0 {
        return Err(CoreError::InvalidParameter {
            name: "pairs",
            reason: "must sample at least one pair".into(),
        });
    }
    let nontrivial_pair = |i: usize, j: usize| -> Result<Option<f64>> {
        let dm = memory_distance(&memories[i], &memories[j], cfg)?;
        if dm == 0.0 {
            return Ok(None);
        }
        let si = rec.recognize(&memories[i])?;
        let sj = rec.recognize(&memories[j])?;
        Ok(Some(self_distance_l2(&si, &sj)? / dm))
    };

    // Degeneracy scan: early-out on the first positive distance.
    let mut degenerate = true;
    'scan: for i in 0..memories.len() {
        for j in (i + 1)..memories.len() {
            if memory_distance(&memories[i], &memories[j], cfg)? > 0.0 {
                degenerate = false;
                break 'scan;
            }
        }
    }
    if degenerate {
        return Err(CoreError::DegenerateSet);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = memories.len();
    let mut max_ratio = 0.0_f64;
    let mut used = 0;
    for _ in 0..pairs {
        let i = rand::Rng::random_range(&mut rng, 0..n);
        let mut j = rand::Rng::random_range(&mut rng, 0..n - 1);
        if j >= i {
            j += 1;
        }
        if let Some(ratio) = nontrivial_pair(i, j)? {
            max_ratio = max_ratio.max(ratio);
            used += 1;
        }
    }
    if used == 0 {
        // All sampled pairs were coincident; fall back to the first
        // separated pair found by the scan.
        'fallback: for i in 0..n {
            for j in (i + 1)..n {
                if let Some(ratio) = nontrivial_pair(i, j)? {
                    max_ratio = ratio;
                    used = 1;
                    break 'fallback;
                }
            }
        }
    }
    Ok(ContinuityDiagnostic {
        lipschitz_estimate: max_ratio,
        sample_pairs: used,
    })
}
