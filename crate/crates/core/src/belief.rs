//! Belief distributions over a finite identity measure.
//!
//! Belief in atom `s_j` at memory `m` is a temperature softmax over the
//! recognizer's distance to each atom,
//!
//! ```text
//! p_j = w_j exp(-d(I(m), s_j) / tau) / sum_j' w_j' exp(-d(I(m), s_j') / tau)
//! ```
//!
//! computed in log space with a max shift so small temperatures stay
//! finite. The measure weights `w_j` are the atom masses of mu; they need
//! not sum to one because the softmax renormalizes.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::recognition::AdaptedRecognizer;
use crate::spaces::{self_distance_l2, Memory, SelfIdentity};

/// Finite measure on the self space: atoms with strictly positive masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureFile", into = "MeasureFile")]
pub struct IdentityMeasure {
    atoms: Vec<SelfIdentity>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureFile {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<MeasureFile> for IdentityMeasure {
    type Error = CoreError;

    fn try_from(f: MeasureFile) -> Result<Self> {
        IdentityMeasure::new(f.atoms.into_iter().map(SelfIdentity::new).collect(), f.weights)
    }
}

impl From<IdentityMeasure> for MeasureFile {
    fn from(m: IdentityMeasure) -> Self {
        MeasureFile {
            atoms: m.atoms.into_iter().map(|a| a.attributes).collect(),
            weights: m.weights,
        }
    }
}

impl IdentityMeasure {
    pub fn new(atoms: Vec<SelfIdentity>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(CoreError::EmptyInput("identity measure atoms"));
        }
        if weights.len() != atoms.len() {
            return Err(CoreError::DimensionMismatch {
                context: "measure weights",
                left: atoms.len(),
                right: weights.len(),
            });
        }
        let dim = atoms[0].dim();
        for a in &atoms {
            if a.dim() != dim {
                return Err(CoreError::DimensionMismatch {
                    context: "measure atom dimensions",
                    left: dim,
                    right: a.dim(),
                });
            }
            if a.attributes.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::NonFinite("measure atom".into()));
            }
        }
        for w in &weights {
            if !(w.is_finite() && *w > 0.0) {
                return Err(CoreError::InvalidParameter {
                    name: "measure weight",
                    reason: format!("atom masses must be positive finite reals, got {w}"),
                });
            }
        }
        Ok(IdentityMeasure { atoms, weights })
    }

    /// Unit mass on every atom.
    pub fn uniform(atoms: Vec<SelfIdentity>) -> Result<Self> {
        let w = vec![1.0; atoms.len()];
        IdentityMeasure::new(atoms, w)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn atoms(&self) -> &[SelfIdentity] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atom(&self, index: usize) -> Result<&SelfIdentity> {
        self.atoms.get(index).ok_or(CoreError::AtomIndexOutOfRange {
            index,
            len: self.atoms.len(),
        })
    }

    /// Index of the atom nearest to `point` (Euclidean), ties broken by
    /// the lowest index.
    pub fn nearest_atom(&self, point: &SelfIdentity) -> Result<usize> {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, a) in self.atoms.iter().enumerate() {
            let d = self_distance_l2(point, a)?;
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        Ok(best)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Normalized belief weights aligned with the measure's atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefDistribution {
    probabilities: Vec<f64>,
    temperature_tau: f64,
}

impl BeliefDistribution {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn tau(&self) -> f64 {
        self.temperature_tau
    }

    /// Probability of a subset of atoms. Indices are treated as a set
    /// (duplicates collapse); summation runs in ascending index order.
    pub fn probability_of(&self, atom_subset: &[usize]) -> Result<f64> {
        let mut indices: Vec<usize> = atom_subset.to_vec();
        indices.sort_unstable();
        indices.dedup();
        let mut total = 0.0;
        for &i in &indices {
            let p = self.probabilities.get(i).ok_or(CoreError::AtomIndexOutOfRange {
                index: i,
                len: self.probabilities.len(),
            })?;
            total += p;
        }
        Ok(total)
    }
}

fn validate_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "tau",
            reason: format!("temperature must be a positive finite real, got {tau}"),
        });
    }
    Ok(())
}

/// Softmax over distances from a known point in the self space.
pub fn belief_from_point(
    point: &SelfIdentity,
    mu: &IdentityMeasure,
    tau: f64,
) -> Result<BeliefDistribution> {
    validate_tau(tau)?;
    let mut distances = Vec::with_capacity(mu.len());
    for a in mu.atoms() {
        distances.push(self_distance_l2(point, a)?);
    }
    Ok(belief_from_distances(&distances, mu.weights(), tau))
}

fn belief_from_distances(distances: &[f64], weights: &[f64], tau: f64) -> BeliefDistribution {
    // log-space scores with max shift: z_j = ln w_j - d_j / tau.
    let z: Vec<f64> = distances
        .iter()
        .zip(weights)
        .map(|(d, w)| w.ln() - d / tau)
        .collect();
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|zi| (zi - zmax).exp()).collect();
    let sum: f64 = exps.iter().sum();
    BeliefDistribution {
        probabilities: exps.iter().map(|e| e / sum).collect(),
        temperature_tau: tau,
    }
}

/// Belief of the recognizer's output for memory `m` over the measure.
pub fn belief_distribution(
    rec: &AdaptedRecognizer,
    m: &Memory,
    mu: &IdentityMeasure,
    tau: f64,
) -> Result<BeliefDistribution> {
    let point = rec.recognize(m)?;
    belief_from_point(&point, mu, tau)
}

/// Strictly positive belief threshold, at most one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BeliefThreshold(f64);

impl BeliefThreshold {
    pub fn new(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0 && b <= 1.0) {
            return Err(CoreError::InvalidParameter {
                name: "b",
                reason: format!("belief threshold must lie in (0, 1], got {b}"),
            });
        }
        Ok(BeliefThreshold(b))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for BeliefThreshold {
    type Error = CoreError;

    fn try_from(b: f64) -> Result<Self> {
        BeliefThreshold::new(b)
    }
}

impl From<BeliefThreshold> for f64 {
    fn from(b: BeliefThreshold) -> f64 {
        b.0
    }
}

/// Per-memory diagnostics for the condition-2 check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryBeliefRow {
    pub memory_id: String,
    pub distance_to_s_star: f64,
    pub belief_at_s_star: f64,
    pub pass: bool,
}

/// Result of checking constancy-of-recognition plus sufficient belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition2Verdict {
    pub s_star_index: usize,
    pub s_star: SelfIdentity,
    pub constancy_ok: bool,
    pub belief_ok: bool,
    pub overall: bool,
    pub rows: Vec<MemoryBeliefRow>,
}

/// Condition 2 over a memory continuum:
///
/// 1. pick as candidate `s*` the mu-atom nearest to the mean recognizer
///    output (ties to the lowest atom index),
/// 2. require `d_S(I(m), s*) <= delta_s` for every memory, and
/// 3. require belief mass at `s*` of at least `b` for every memory.
pub fn check_condition_2(
    rec: &AdaptedRecognizer,
    memories: &[Memory],
    mu: &IdentityMeasure,
    tau: f64,
    threshold: BeliefThreshold,
    delta_s: f64,
) -> Result<Condition2Verdict> {
    if memories.is_empty() {
        return Err(CoreError::EmptyInput("condition-2 memory list"));
    }
    validate_tau(tau)?;
    if !(delta_s.is_finite() && delta_s >= 0.0) {
        return Err(CoreError::InvalidParameter {
            name: "delta_s",
            reason: format!("constancy tolerance must be nonnegative, got {delta_s}"),
        });
    }

    let outputs: Vec<SelfIdentity> = memories
        .iter()
        .map(|m| rec.recognize(m))
        .collect::<Result<_>>()?;
    let n = rec.n();
    let mut mean = vec![0.0; n];
    for o in &outputs {
        for (acc, v) in mean.iter_mut().zip(&o.attributes) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= outputs.len() as f64;
    }
    let mean = SelfIdentity::new(mean);
    let s_star_index = mu.nearest_atom(&mean)?;
    let s_star = mu.atom(s_star_index)?.clone();

    let mut rows = Vec::with_capacity(memories.len());
    let mut constancy_ok = true;
    let mut belief_ok = true;
    for (m, out) in memories.iter().zip(&outputs) {
        let d = self_distance_l2(out, &s_star)?;
        let belief = belief_from_point(out, mu, tau)?.probabilities()[s_star_index];
        let near = d <= delta_s;
        let believed = belief >= threshold.value();
        constancy_ok &= near;
        belief_ok &= believed;
        rows.push(MemoryBeliefRow {
            memory_id: m.id.clone(),
            distance_to_s_star: d,
            belief_at_s_star: belief,
            pass: near && believed,
        });
    }
    Ok(Condition2Verdict {
        s_star_index,
        s_star,
        constancy_ok,
        belief_ok,
        overall: constancy_ok && belief_ok,
        rows,
    })
}

/// Outcome of temperature calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauCalibration {
    Feasible(f64),
    Infeasible,
}

const TAU_MIN: f64 = 1e-6;
const TAU_MAX: f64 = 1e6;

/// Largest temperature in `[1e-6, 1e6]` at which every memory still holds
/// belief at least `b` in the atom `s_star_index`.
///
/// The minimum belief over memories is nonincreasing in tau whenever
/// `s*` is the nearest atom for every memory; that is verified on a
/// coarse grid before bisecting. When even the coldest temperature fails
/// (some memory sits strictly nearer to a different atom) the calibration
/// is infeasible.
pub fn calibrate_tau(
    rec: &AdaptedRecognizer,
    memories: &[Memory],
    mu: &IdentityMeasure,
    target_b: BeliefThreshold,
    s_star_index: usize,
) -> Result<TauCalibration> {
    if memories.is_empty() {
        return Err(CoreError::EmptyInput("calibration memory list"));
    }
    if s_star_index >= mu.len() {
        return Err(CoreError::AtomIndexOutOfRange {
            index: s_star_index,
            len: mu.len(),
        });
    }

    // Distances from every recognized output to every atom, computed once.
    let mut dist_rows: Vec<Vec<f64>> = Vec::with_capacity(memories.len());
    for m in memories {
        let out = rec.recognize(m)?;
        let mut row = Vec::with_capacity(mu.len());
        for a in mu.atoms() {
            row.push(self_distance_l2(&out, a)?);
        }
        dist_rows.push(row);
    }
    let min_belief = |tau: f64| -> f64 {
        dist_rows
            .iter()
            .map(|row| belief_from_distances(row, mu.weights(), tau).probabilities()[s_star_index])
            .fold(f64::INFINITY, f64::min)
    };

    let b = target_b.value();
    if min_belief(TAU_MIN) < b {
        return Ok(TauCalibration::Infeasible);
    }

    // Numerical monotonicity check across the search range.
    let grid = 13;
    let mut previous = f64::INFINITY;
    for g in 0..grid {
        let t = (g as f64) / (grid - 1) as f64;
        let tau = TAU_MIN * (TAU_MAX / TAU_MIN).powf(t);
        let v = min_belief(tau);
        if v > previous + 1e-9 {
            return Err(CoreError::CalibrationNotMonotone);
        }
        previous = v;
    }

    if min_belief(TAU_MAX) >= b {
        return Ok(TauCalibration::Feasible(TAU_MAX));
    }
    let mut lo = TAU_MIN.ln();
    let mut hi = TAU_MAX.ln();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if min_belief(mid.exp()) >= b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TauCalibration::Feasible(lo.exp()))
}
