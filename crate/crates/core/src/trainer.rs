//! Adapter training and the end-to-end self-possession check.
//!
//! Only the low-rank factors `A` and `B` receive gradients; the base map
//! stays frozen. One optimizer step accumulates the mean-squared-error
//! gradient over a group of micro-batches, averages, clips the global
//! norm, and applies either plain gradient descent or AdamW, both with
//! decoupled weight decay on the adapter factors.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{
    check_condition_2, BeliefThreshold, IdentityMeasure, MemoryBeliefRow,
};
use crate::continuum::{check_condition_1, ContinuumReport};
use crate::error::{CoreError, Result};
use crate::linalg::Matrix;
use crate::recognition::AdaptedRecognizer;
use crate::spaces::{Memory, MemoryMetricConfig, SelfIdentity};

/// A memory paired with its ground-truth self-identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMemory {
    pub memory: Memory,
    pub target: SelfIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    PlainGd,
    AdamW,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
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
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 20,
            batch_size: 5,
            grad_accum_steps: 4,
            clip_max_norm: 0.3,
            weight_decay: 0.01,
            optimizer: OptimizerKind::AdamW,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            eval_every_epochs: 2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        fn fail(name: &'static str, reason: String) -> Result<()> {
            Err(CoreError::InvalidParameter { name, reason })
        }
        // A zero learning rate is allowed: it runs the full loop and
        // leaves the adapter bit-identical, which is useful as a control.
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return fail(
                "learning_rate",
                format!("must be a nonnegative finite real, got {}", self.learning_rate),
            );
        }
        if self.epochs == 0 {
            return fail("epochs", "must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size", "must be at least 1".into());
        }
        if self.grad_accum_steps == 0 {
            return fail("grad_accum_steps", "must be at least 1".into());
        }
        if self.eval_every_epochs == 0 {
            return fail("eval_every_epochs", "must be at least 1".into());
        }
        if !(self.clip_max_norm.is_finite() && self.clip_max_norm > 0.0) {
            return fail(
                "clip_max_norm",
                format!("must be a positive finite real, got {}", self.clip_max_norm),
            );
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return fail(
                "weight_decay",
                format!("must be a nonnegative finite real, got {}", self.weight_decay),
            );
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return fail(
                "adam_eps",
                format!("must be a positive finite real, got {}", self.adam_eps),
            );
        }
        if !(self.adam_beta1.is_finite() && (0.0..1.0).contains(&self.adam_beta1)) {
            return fail("adam_beta1", format!("must lie in [0, 1), got {}", self.adam_beta1));
        }
        if !(self.adam_beta2.is_finite() && (0.0..1.0).contains(&self.adam_beta2)) {
            return fail("adam_beta2", format!("must lie in [0, 1), got {}", self.adam_beta2));
        }
        Ok(())
    }
}

fn eval_batch(
    rec: &AdaptedRecognizer,
    items: &[&LabeledMemory],
) -> Result<(f64, Matrix, Matrix)> {
    let n = rec.n();
    let k = rec.k();
    let r = rec.rank();
    let s = rec.adapter_scale();
    let count = items.len() as f64;
    let mut loss_acc = 0.0;
    let mut grad_a = Matrix::zeros(n, r);
    let mut grad_b = Matrix::zeros(r, k);
    for item in items {
        if item.target.dim() != n {
            return Err(CoreError::DimensionMismatch {
                context: "loss target",
                left: n,
                right: item.target.dim(),
            });
        }
        let x = rec.features(&item.memory);
        if x.len() != k {
            return Err(CoreError::DimensionMismatch {
                context: "recognizer input features",
                left: k,
                right: x.len(),
            });
        }
        let bx = rec.adapter_b().matvec(&x);
        let abx = rec.adapter_a().matvec(&bx);
        let base = rec.theta0_weights().matvec(&x);
        // residual = W0 x + s A B x + bias - y
        let mut residual = Vec::with_capacity(n);
        for i in 0..n {
            residual.push(base[i] + s * abx[i] + rec.theta0_bias()[i] - item.target.attributes[i]);
        }
        loss_acc += residual.iter().map(|v| v * v).sum::<f64>();
        let c = 2.0 * s / count;
        grad_a.add_outer(&residual, &bx, c);
        let at_r = rec.adapter_a().transpose_matvec(&residual);
        grad_b.add_outer(&at_r, &x, c);
    }
    Ok((loss_acc / count, grad_a, grad_b))
}

/// Mean squared Euclidean error of the recognizer over a batch.
pub fn loss(rec: &AdaptedRecognizer, batch: &[LabeledMemory]) -> Result<f64> {
    if batch.is_empty() {
        return Err(CoreError::EmptyInput("loss batch"));
    }
    let refs: Vec<&LabeledMemory> = batch.iter().collect();
    Ok(eval_batch(rec, &refs)?.0)
}

/// Analytic gradients of the batch loss with respect to the adapter
/// factors; the frozen base receives none.
pub fn gradients(rec: &AdaptedRecognizer, batch: &[LabeledMemory]) -> Result<(Matrix, Matrix)> {
    if batch.is_empty() {
        return Err(CoreError::EmptyInput("gradient batch"));
    }
    let refs: Vec<&LabeledMemory> = batch.iter().collect();
    let (_, ga, gb) = eval_batch(rec, &refs)?;
    Ok((ga, gb))
}

/// One row of the step-level training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub grad_norm_preclip: f64,
    pub update_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Signed percent change of the full-data loss; negative means the
    /// loss went down.
    pub percent_change: Option<f64>,
    pub convergence_step: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainingTrace {
    pub steps: Vec<StepRecord>,
    pub epoch_mean_loss: Vec<f64>,
    /// Snapshots taken every `eval_every_epochs`, keyed by epoch.
    pub checkpoints: Vec<(usize, AdaptedRecognizer)>,
    /// First optimizer step whose parameter update norm fell below 1e-8.
    pub convergence_step: Option<usize>,
    /// Full-data loss of the starting recognizer.
    pub initial_loss: f64,
    /// Full-data loss of the trained recognizer.
    pub final_loss: f64,
}

impl TrainingTrace {
    pub fn summary(&self) -> TrainSummary {
        let percent_change = if self.initial_loss != 0.0 {
            Some(100.0 * (self.final_loss - self.initial_loss) / self.initial_loss)
        } else {
            None
        };
        TrainSummary {
            initial_loss: self.initial_loss,
            final_loss: self.final_loss,
            percent_change,
            convergence_step: self.convergence_step,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "epoch", "loss", "grad_norm_preclip", "update_norm"])?;
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                s.epoch.to_string(),
                s.loss.to_string(),
                s.grad_norm_preclip.to_string(),
                s.update_norm.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

const CONVERGENCE_UPDATE_NORM: f64 = 1e-8;

struct AdamState {
    m_a: Matrix,
    v_a: Matrix,
    m_b: Matrix,
    v_b: Matrix,
    t: u32,
}

/// Apply one optimizer step in place; returns the parameter update norm.
///
/// Decoupled weight decay multiplies each factor by `1 - lr * wd` before
/// the gradient-driven update, so a zero-gradient AdamW step shrinks the
/// factors by exactly that factor.
fn apply_step(
    rec: &mut AdaptedRecognizer,
    grad_a: &Matrix,
    grad_b: &Matrix,
    cfg: &TrainConfig,
    adam: &mut AdamState,
) -> f64 {
    let lr = cfg.learning_rate;
    let decay = 1.0 - lr * cfg.weight_decay;
    let mut update_sq = 0.0;

    let mut apply = |param: &mut Matrix, grad: &Matrix, m: &mut Matrix, v: &mut Matrix, t: u32| {
        for i in 0..param.rows() {
            for j in 0..param.cols() {
                let old = param.get(i, j);
                let g = grad.get(i, j);
                let step = match cfg.optimizer {
                    OptimizerKind::PlainGd => lr * g,
                    OptimizerKind::AdamW => {
                        let mi = cfg.adam_beta1 * m.get(i, j) + (1.0 - cfg.adam_beta1) * g;
                        let vi = cfg.adam_beta2 * v.get(i, j) + (1.0 - cfg.adam_beta2) * g * g;
                        m.set(i, j, mi);
                        v.set(i, j, vi);
                        let m_hat = mi / (1.0 - cfg.adam_beta1.powi(t as i32));
                        let v_hat = vi / (1.0 - cfg.adam_beta2.powi(t as i32));
                        lr * m_hat / (v_hat.sqrt() + cfg.adam_eps)
                    }
                };
                let new = old * decay - step;
                update_sq += (new - old) * (new - old);
                param.set(i, j, new);
            }
        }
    };

    adam.t += 1;
    let t = adam.t;
    let (a, b) = rec.adapter_mut();
    apply(a, grad_a, &mut adam.m_a, &mut adam.v_a, t);
    apply(b, grad_b, &mut adam.m_b, &mut adam.v_b, t);
    update_sq.sqrt()
}

/// Train the adapter on labeled memories.
///
/// Per epoch the items are reshuffled (seeded), chunked into micro-batches
/// of `batch_size` (remainder kept), and consumed in groups of
/// `grad_accum_steps` micro-batches per optimizer step. An incomplete
/// trailing group still steps, averaged over the micro-batches it has.
pub fn train(
    rec0: &AdaptedRecognizer,
    data: &[LabeledMemory],
    cfg: &TrainConfig,
) -> Result<(AdaptedRecognizer, TrainingTrace)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(CoreError::EmptyInput("training data"));
    }
    let initial_loss = loss(rec0, data)?;

    let mut rec = rec0.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState {
        m_a: Matrix::zeros(rec.n(), rec.rank()),
        v_a: Matrix::zeros(rec.n(), rec.rank()),
        m_b: Matrix::zeros(rec.rank(), rec.k()),
        v_b: Matrix::zeros(rec.rank(), rec.k()),
        t: 0,
    };

    let mut steps: Vec<StepRecord> = Vec::new();
    let mut epoch_mean_loss = Vec::with_capacity(cfg.epochs);
    let mut checkpoints = Vec::new();
    let mut convergence_step = None;
    let mut step = 0usize;

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let micro_batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        let mut epoch_losses = Vec::new();

        for group in micro_batches.chunks(cfg.grad_accum_steps) {
            let mut acc_a = Matrix::zeros(rec.n(), rec.rank());
            let mut acc_b = Matrix::zeros(rec.rank(), rec.k());
            let mut acc_loss = 0.0;
            for micro in group {
                let items: Vec<&LabeledMemory> = micro.iter().map(|&i| &data[i]).collect();
                let (l, ga, gb) = eval_batch(&rec, &items)?;
                if !l.is_finite() {
                    return Err(CoreError::NonFiniteTraining {
                        step: step + 1,
                        quantity: "loss",
                    });
                }
                if !ga.is_finite() || !gb.is_finite() {
                    return Err(CoreError::NonFiniteTraining {
                        step: step + 1,
                        quantity: "gradient",
                    });
                }
                acc_loss += l;
                acc_a.add_assign_scaled(&ga, 1.0);
                acc_b.add_assign_scaled(&gb, 1.0);
            }
            let inv = 1.0 / group.len() as f64;
            acc_a.scale(inv);
            acc_b.scale(inv);
            let step_loss = acc_loss * inv;

            let grad_norm_preclip = (acc_a.frobenius_sq() + acc_b.frobenius_sq()).sqrt();
            if grad_norm_preclip > cfg.clip_max_norm {
                let scale = cfg.clip_max_norm / grad_norm_preclip;
                acc_a.scale(scale);
                acc_b.scale(scale);
            }

            step += 1;
            let update_norm = apply_step(&mut rec, &acc_a, &acc_b, cfg, &mut adam);
            if convergence_step.is_none() && update_norm < CONVERGENCE_UPDATE_NORM {
                convergence_step = Some(step);
            }
            epoch_losses.push(step_loss);
            steps.push(StepRecord {
                step,
                epoch,
                loss: step_loss,
                grad_norm_preclip,
                update_norm,
            });
        }

        epoch_mean_loss.push(epoch_losses.iter().sum::<f64>() / epoch_losses.len() as f64);
        if epoch % cfg.eval_every_epochs == 0 {
            checkpoints.push((epoch, rec.clone()));
        }
    }

    let final_loss = loss(&rec, data)?;
    Ok((
        rec,
        TrainingTrace {
            steps,
            epoch_mean_loss,
            checkpoints,
            convergence_step,
            initial_loss,
            final_loss,
        },
    ))
}

/// Combined verdict of the two theorem conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfVerdict {
    pub condition1: bool,
    pub condition2: bool,
    pub overall: bool,
    pub epsilon: f64,
    pub s_star_index: Option<usize>,
    pub s_star: Option<SelfIdentity>,
    pub continuum: ContinuumReport,
    pub rows: Vec<MemoryBeliefRow>,
}

impl SelfVerdict {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Check both conditions end to end: the ε-chain continuum over all
/// memories, then constancy and belief on the largest component. The
/// overall verdict is true only when a single continuum covers every
/// memory and condition 2 holds on it.
///
/// The argument list mirrors the experiment parameters one for one.
#[allow(clippy::too_many_arguments)]
pub fn verify_self_possession(
    rec: &AdaptedRecognizer,
    memories: &[Memory],
    metric_cfg: &MemoryMetricConfig,
    epsilon: f64,
    mu: &IdentityMeasure,
    tau: f64,
    threshold: BeliefThreshold,
    delta_s: f64,
) -> Result<SelfVerdict> {
    if memories.is_empty() {
        return Err(CoreError::EmptyInput("verification memory list"));
    }
    let continuum = check_condition_1(memories, metric_cfg, epsilon)?;
    let condition1 = continuum.is_single_continuum;

    // Largest component; ties go to the one with the smallest leading id
    // (components are already in canonical order).
    let mut largest = &continuum.components[0];
    for c in &continuum.components[1..] {
        if c.len() > largest.len() {
            largest = c;
        }
    }
    let member: std::collections::BTreeSet<&str> = largest.iter().map(|s| s.as_str()).collect();
    let subset: Vec<Memory> = memories
        .iter()
        .filter(|m| member.contains(m.id.as_str()))
        .cloned()
        .collect();

    let c2 = check_condition_2(rec, &subset, mu, tau, threshold, delta_s)?;
    Ok(SelfVerdict {
        condition1,
        condition2: c2.overall,
        overall: condition1 && c2.overall,
        epsilon,
        s_star_index: Some(c2.s_star_index),
        s_star: Some(c2.s_star),
        continuum,
        rows: c2.rows,
    })
}
