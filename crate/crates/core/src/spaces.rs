//! Memory and self spaces.
//!
//! A [`Memory`] is a timestamped feature record (time, content vector,
//! emotional intensity) and lives in a metric space whose distance blends
//! the three components:
//!
//! ```text
//! d_M(m1, m2) = sqrt(w_t |t1 - t2|^2 + w_c d_c(m1, m2)^2 + w_e |e1 - e2|^2)
//! ```
//!
//! A [`SelfIdentity`] is an n-dimensional attribute vector compared with an
//! L^p norm. Both metrics are pure functions over immutable values and are
//! safe to call concurrently.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// A single episodic memory record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Memory {
    pub id: String,
    #[serde(rename = "t")]
    pub time: f64,
    pub content: Vec<f64>,
    #[serde(rename = "e")]
    pub emotion: f64,
}

impl Memory {
    pub fn new(id: impl Into<String>, time: f64, content: Vec<f64>, emotion: f64) -> Self {
        Memory {
            id: id.into(),
            time,
            content,
            emotion,
        }
    }

    fn check_finite(&self) -> Result<()> {
        if !self.time.is_finite() {
            return Err(CoreError::NonFinite(format!("memory `{}` time", self.id)));
        }
        if !self.emotion.is_finite() {
            return Err(CoreError::NonFinite(format!(
                "memory `{}` emotion",
                self.id
            )));
        }
        if self.content.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::NonFinite(format!(
                "memory `{}` content",
                self.id
            )));
        }
        Ok(())
    }
}

/// How the content component of the memory metric is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentMetric {
    Euclidean,
    /// `1 - cos(angle)`, in `[0, 2]`. Not a true metric (the triangle
    /// inequality can fail), so triangle-inequality guarantees apply to
    /// the Euclidean choice only.
    CosineDistance,
}

/// Weights for the composite memory metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryMetricConfig {
    pub w_t: f64,
    pub w_c: f64,
    pub w_e: f64,
    pub content_metric: ContentMetric,
}

impl Default for MemoryMetricConfig {
    fn default() -> Self {
        MemoryMetricConfig {
            w_t: 1.0,
            w_c: 1.0,
            w_e: 1.0,
            content_metric: ContentMetric::Euclidean,
        }
    }
}

impl MemoryMetricConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("w_t", self.w_t), ("w_c", self.w_c), ("w_e", self.w_e)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(CoreError::InvalidParameter {
                    name: "memory metric weight",
                    reason: format!("{name} must be a positive finite real, got {w}"),
                });
            }
        }
        Ok(())
    }
}

/// An identity attribute vector in the self space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SelfIdentity {
    pub attributes: Vec<f64>,
}

impl SelfIdentity {
    pub fn new(attributes: Vec<f64>) -> Self {
        SelfIdentity { attributes }
    }

    pub fn dim(&self) -> usize {
        self.attributes.len()
    }
}

/// L^p exponent for the self metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfMetricConfig {
    pub p: f64,
}

impl Default for SelfMetricConfig {
    fn default() -> Self {
        SelfMetricConfig { p: 2.0 }
    }
}

impl SelfMetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p >= 1.0) {
            return Err(CoreError::InvalidParameter {
                name: "p",
                reason: format!("L^p exponent must satisfy p >= 1, got {}", self.p),
            });
        }
        Ok(())
    }
}

/// Distance between content vectors under the chosen metric.
pub fn content_distance(c1: &[f64], c2: &[f64], kind: ContentMetric) -> Result<f64> {
    if c1.len() != c2.len() {
        return Err(CoreError::DimensionMismatch {
            context: "content vectors",
            left: c1.len(),
            right: c2.len(),
        });
    }
    match kind {
        ContentMetric::Euclidean => {
            let sum: f64 = c1.iter().zip(c2).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(sum.sqrt())
        }
        ContentMetric::CosineDistance => {
            let mut dot = 0.0;
            let mut n1 = 0.0;
            let mut n2 = 0.0;
            for (a, b) in c1.iter().zip(c2) {
                dot += a * b;
                n1 += a * a;
                n2 += b * b;
            }
            if n1 == 0.0 || n2 == 0.0 {
                return Err(CoreError::ZeroVectorCosine);
            }
            let cos = dot / (n1 * n2).sqrt();
            Ok((1.0 - cos).max(0.0))
        }
    }
}

/// Composite memory-space distance.
pub fn memory_distance(m1: &Memory, m2: &Memory, cfg: &MemoryMetricConfig) -> Result<f64> {
    cfg.validate()?;
    m1.check_finite()?;
    m2.check_finite()?;
    if m1.content.len() != m2.content.len() {
        return Err(CoreError::DimensionMismatch {
            context: "memory content",
            left: m1.content.len(),
            right: m2.content.len(),
        });
    }
    let dt = m1.time - m2.time;
    let de = m1.emotion - m2.emotion;
    let dc = content_distance(&m1.content, &m2.content, cfg.content_metric)?;
    Ok((cfg.w_t * dt * dt + cfg.w_c * dc * dc + cfg.w_e * de * de).sqrt())
}

/// L^p distance between self-identities.
pub fn self_distance(s1: &SelfIdentity, s2: &SelfIdentity, cfg: &SelfMetricConfig) -> Result<f64> {
    cfg.validate()?;
    if s1.dim() != s2.dim() {
        return Err(CoreError::DimensionMismatch {
            context: "self identity attributes",
            left: s1.dim(),
            right: s2.dim(),
        });
    }
    let p = cfg.p;
    if p == 2.0 {
        let sum: f64 = s1
            .attributes
            .iter()
            .zip(&s2.attributes)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum.sqrt())
    } else if p == 1.0 {
        Ok(s1
            .attributes
            .iter()
            .zip(&s2.attributes)
            .map(|(a, b)| (a - b).abs())
            .sum())
    } else {
        let sum: f64 = s1
            .attributes
            .iter()
            .zip(&s2.attributes)
            .map(|(a, b)| (a - b).abs().powf(p))
            .sum();
        Ok(sum.powf(1.0 / p))
    }
}

/// Euclidean self distance, the `p = 2` special case used throughout the
/// belief and trainer modules.
pub fn self_distance_l2(s1: &SelfIdentity, s2: &SelfIdentity) -> Result<f64> {
    self_distance(s1, s2, &SelfMetricConfig { p: 2.0 })
}

/// Symmetric matrix of pairwise memory distances, indexed like the input.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Build from explicit rows; shape is validated, symmetry is not
    /// (consumers that require symmetry check it themselves).
    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(CoreError::EmptyInput("distance matrix ids"));
        }
        if rows.len() != n {
            return Err(CoreError::DimensionMismatch {
                context: "distance matrix rows",
                left: n,
                right: rows.len(),
            });
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(CoreError::DimensionMismatch {
                    context: "distance matrix row",
                    left: n,
                    right: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(DistanceMatrix { ids, n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// CSV export: a header row of memory ids followed by one row of
    /// distances per memory.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.ids.iter())?;
        for i in 0..self.n {
            w.write_record((0..self.n).map(|j| self.get(i, j).to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pairwise distance matrix over a homogeneous memory list.
pub fn pairwise_distance_matrix(
    memories: &[Memory],
    cfg: &MemoryMetricConfig,
) -> Result<DistanceMatrix> {
    if memories.is_empty() {
        return Err(CoreError::EmptyInput("memory list"));
    }
    let n = memories.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = memory_distance(&memories[i], &memories[j], cfg).map_err(|e| {
                CoreError::PairwiseDistance {
                    i,
                    j,
                    source: Box::new(e),
                }
            })?;
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix {
        ids: memories.iter().map(|m| m.id.clone()).collect(),
        n,
        data,
    })
}

/// On-disk form of a memory set: `{"k_c": ..., "memories": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemorySet {
    pub k_c: usize,
    pub memories: Vec<Memory>,
}

impl MemorySet {
    pub fn new(k_c: usize, memories: Vec<Memory>) -> Result<Self> {
        for m in &memories {
            if m.content.len() != k_c {
                return Err(CoreError::DimensionMismatch {
                    context: "memory set content",
                    left: k_c,
                    right: m.content.len(),
                });
            }
        }
        Ok(MemorySet { k_c, memories })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let set: MemorySet = serde_json::from_str(s)?;
        MemorySet::new(set.k_c, set.memories)
    }
}
