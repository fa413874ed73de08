//! Multi-task training: next-item cross-entropy plus the contrastive
//! item-representation loss, combined with Adam updates, coupled L2 and
//! gradient clipping.
//!
//! Determinism: three independent seeded streams drive shuffling, dropout
//! and contrastive sampling, parameter tensors update in key order, and all
//! reductions run sequentially, so a fixed seed reproduces runs bit for bit.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Tape, Var, LOSS_CLAMP};
use crate::error::{Error, Result};
use crate::eval::ScoreVector;
use crate::graph::{build_union_graph, connected_components, sample_cl_pairs, CLBatch};
use crate::ingest::{Session, TrainingSample};
use crate::model::{DropoutMode, ModelParams, SessionForward};

/// Training hyperparameters. Defaults follow the evaluated configuration:
/// d = 100, dropout 0.2, batches of 100, Adam at 3e-4 with L2 1e-5, one
/// propagation step, contrastive weight 0.1 with beta 0.2 and temperature
/// 0.2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub d: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub lambda_cl: f64,
    pub beta: f64,
    pub temperature: f64,
    pub ggnn_steps: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            d: 100,
            dropout: 0.2,
            batch_size: 100,
            learning_rate: 3e-4,
            l2: 1e-5,
            lambda_cl: 0.1,
            beta: 0.2,
            temperature: 0.2,
            ggnn_steps: 1,
            epochs: 10,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.batch_size == 0 || self.ggnn_steps == 0 || self.epochs == 0 {
            return Err(Error::config(
                "d, batch_size, ggnn_steps and epochs must be positive".to_string(),
            ));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::config("learning rate must be positive".to_string()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout must lie in [0, 1)".to_string()));
        }
        if self.lambda_cl < 0.0 {
            return Err(Error::config("lambda_cl must be >= 0".to_string()));
        }
        if self.lambda_cl > 0.0 && !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::config("beta must satisfy 0 < beta <= 1".to_string()));
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(Error::config("temperature must be positive".to_string()));
        }
        Ok(())
    }
}

/// Per-batch (or per-epoch mean) loss components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_rec: f64,
    pub l_cl: f64,
    pub l_total: f64,
}

/// Next-item cross-entropy on a probability vector: `-ln(p_label)`, capped
/// where the probability underflows 1e-12.
pub fn loss_rec(scores: &ScoreVector, label: usize) -> f64 {
    (-scores.0[label].max(1e-12).ln()).min(LOSS_CLAMP)
}

/// Combine the recommendation and contrastive terms.
pub fn loss_total(l_rec: f64, l_cl: f64, lambda_cl: f64) -> f64 {
    l_rec + lambda_cl * l_cl
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + 1e-12;
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt() + 1e-12;
    dot / (na * nb)
}

/// Contrastive loss over item embeddings.
///
/// Per component: the mean over its sampled (anchor, positive) entries of
/// `-log( exp(cos(e_x, e_y)/tau) / sum over {y} and the negatives of
/// exp(cos(e_x, e_x')/tau) )`; component values are then summed. An empty
/// batch contributes zero.
pub fn loss_cl(batch: &CLBatch, embedding: &Matrix, temperature: f64) -> Result<f64> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::config(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let mut per_component: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for e in &batch.entries {
        let anchor = embedding.row(e.anchor).to_vec();
        let pos_sim = cosine(&anchor, &embedding.row(e.positive).to_vec());
        // log-sum-exp over the positive plus negatives, max-subtracted.
        let mut sims = Vec::with_capacity(1 + e.negatives.len());
        sims.push(pos_sim / temperature);
        for &n in &e.negatives {
            sims.push(cosine(&anchor, &embedding.row(n).to_vec()) / temperature);
        }
        let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = sims.iter().map(|s| (s - max).exp()).sum::<f64>().ln() + max;
        let term = -(pos_sim / temperature - lse);
        let slot = per_component.entry(e.component).or_insert((0.0, 0));
        slot.0 += term;
        slot.1 += 1;
    }
    Ok(per_component
        .values()
        .map(|(sum, count)| sum / *count as f64)
        .sum())
}

/// Tape version of [`loss_cl`], differentiable w.r.t. the embedding table.
pub fn loss_cl_on_tape(
    tape: &mut Tape,
    embedding: Var,
    batch: &CLBatch,
    temperature: f64,
) -> Option<Var> {
    if batch.is_empty() {
        return None;
    }
    let mut component_terms: BTreeMap<usize, Vec<Var>> = BTreeMap::new();
    for e in &batch.entries {
        let anchor = tape.gather_rows(embedding, &[e.anchor]);
        let mut cand_idx = Vec::with_capacity(1 + e.negatives.len());
        cand_idx.push(e.positive);
        cand_idx.extend_from_slice(&e.negatives);
        let cands = tape.gather_rows(embedding, &cand_idx);
        let anchor_n = tape.normalize_rows(anchor);
        let cands_n = tape.normalize_rows(cands);
        let sims = tape.matmul_transb(anchor_n, cands_n);
        let logits = tape.scale(sims, 1.0 / temperature);
        let term = tape.neg_log_softmax(logits, 0);
        component_terms.entry(e.component).or_default().push(term);
    }
    let mut component_means = Vec::with_capacity(component_terms.len());
    for terms in component_terms.values() {
        component_means.push(tape.mean_scalars(terms));
    }
    Some(tape.add_n(&component_means))
}

/// Adam optimizer state over named tensors.
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: BTreeMap<String, Matrix>,
    v: BTreeMap<String, Matrix>,
}

impl Adam {
    pub fn new() -> Adam {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// One update over every parameter tensor, in key order.
    pub fn step(&mut self, params: &mut ModelParams, grads: &BTreeMap<String, Matrix>, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, tensor) in params.tensors.iter_mut() {
            let Some(g) = grads.get(name) else { continue };
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| Matrix::zeros(tensor.dim()));
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| Matrix::zeros(tensor.dim()));
            for ((t, g), (m, v)) in tensor
                .iter_mut()
                .zip(g.iter())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *t -= lr * mhat / (vhat.sqrt() + self.epsilon);
            }
        }
    }
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new()
    }
}

/// Scale all gradients so their global L2 norm stays within `max_norm`.
pub fn clip_global_norm(grads: &mut BTreeMap<String, Matrix>, max_norm: f64) {
    let total: f64 = grads
        .values()
        .map(|g| g.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if total > max_norm {
        let scale = max_norm / total;
        for g in grads.values_mut() {
            g.mapv_inplace(|x| x * scale);
        }
    }
}

/// Per-epoch statistics; formats as the machine-parsable epoch log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean: LossBreakdown,
    pub secs: f64,
    pub batches: usize,
    pub samples: usize,
    /// How many batch union graphs were constructed (zero when the
    /// contrastive term is disabled).
    pub union_graphs_built: usize,
}

impl std::fmt::Display for EpochStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "epoch={} l_rec={:.6} l_cl={:.6} l_total={:.6} secs={:.3}",
            self.epoch, self.mean.l_rec, self.mean.l_cl, self.mean.l_total, self.secs
        )
    }
}

const GRAD_CLIP_NORM: f64 = 5.0;

/// Owns the parameters, the optimizer state and the RNG streams of one
/// training run. Exactly one writer of the parameters.
pub struct Trainer {
    pub params: ModelParams,
    pub hp: HyperParams,
    adam: Adam,
    shuffle_rng: ChaCha8Rng,
    dropout_rng: ChaCha8Rng,
    cl_rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer {
    pub fn new(params: ModelParams, hp: HyperParams) -> Result<Trainer> {
        hp.validate()?;
        params.validate()?;
        if params.config.d != hp.d || params.config.steps != hp.ggnn_steps {
            return Err(Error::config(format!(
                "model built for d={} steps={} but hyperparameters say d={} steps={}",
                params.config.d, params.config.steps, hp.d, hp.ggnn_steps
            )));
        }
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(hp.seed);
        shuffle_rng.set_stream(1);
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(hp.seed);
        dropout_rng.set_stream(2);
        let mut cl_rng = ChaCha8Rng::seed_from_u64(hp.seed);
        cl_rng.set_stream(3);
        Ok(Trainer {
            params,
            hp,
            adam: Adam::new(),
            shuffle_rng,
            dropout_rng,
            cl_rng,
            epoch: 0,
        })
    }

    /// Compute a batch's loss on a fresh tape. Returns (tape, total-loss var,
    /// rec component, cl component, whether a union graph was built).
    fn batch_loss(
        &mut self,
        batch: &[&TrainingSample],
    ) -> Result<(Tape, Var, f64, f64, bool)> {
        let mut tape = Tape::new();
        let mut rec_terms = Vec::with_capacity(batch.len());
        for sample in batch {
            let fwd = SessionForward::new(&self.params, &sample.prefix);
            let dropout = if self.hp.dropout > 0.0 {
                DropoutMode::Sample {
                    rate: self.hp.dropout,
                    rng: &mut self.dropout_rng,
                }
            } else {
                DropoutMode::Off
            };
            let out = fwd.run(&mut tape, dropout)?;
            rec_terms.push(tape.neg_log_softmax(out.logits, sample.label_item));
        }
        let l_rec_var = tape.mean_scalars(&rec_terms);
        let l_rec = tape.scalar(l_rec_var);

        let mut l_cl = 0.0;
        let mut built_union = false;
        let mut total_var = l_rec_var;
        if self.hp.lambda_cl > 0.0 {
            let prefix_sessions: Vec<Session> = batch
                .iter()
                .map(|s| Session {
                    session_id: String::new(),
                    behaviors: s.prefix.clone(),
                })
                .collect();
            let union = build_union_graph(&prefix_sessions, self.params.config.n_types);
            built_union = true;
            let partition = connected_components(&union);
            let cl_batch = sample_cl_pairs(&partition, self.hp.beta, &mut self.cl_rng)?;
            let embedding = tape.param("embedding", self.params.get("embedding"));
            if let Some(cl_var) = loss_cl_on_tape(&mut tape, embedding, &cl_batch, self.hp.temperature)
            {
                l_cl = tape.scalar(cl_var);
                let weighted = tape.scale(cl_var, self.hp.lambda_cl);
                total_var = tape.add(l_rec_var, weighted);
            }
        }
        Ok((tape, total_var, l_rec, l_cl, built_union))
    }

    /// One pass over the samples: shuffle, batch, forward, backpropagate,
    /// clip, apply Adam with coupled L2. Aborts on a non-finite loss naming
    /// the batch.
    pub fn train_epoch(&mut self, samples: &[TrainingSample]) -> Result<EpochStats> {
        if samples.is_empty() {
            return Err(Error::data("cannot train on zero samples".to_string()));
        }
        let started = Instant::now();
        self.epoch += 1;

        let mut order: Vec<usize> = (0..samples.len()).collect();
        // Fisher-Yates off the dedicated shuffle stream.
        for i in (1..order.len()).rev() {
            let j = self.shuffle_rng.random_range(0..=i);
            order.swap(i, j);
        }

        let mut sum = LossBreakdown {
            l_rec: 0.0,
            l_cl: 0.0,
            l_total: 0.0,
        };
        let mut batches = 0usize;
        let mut union_graphs_built = 0usize;

        for (batch_idx, chunk) in order.chunks(self.hp.batch_size).enumerate() {
            let batch: Vec<&TrainingSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (tape, total_var, l_rec, l_cl, built) = self.batch_loss(&batch)?;
            let l_total = tape.scalar(total_var);
            if !l_total.is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite loss in epoch {} batch {batch_idx} (l_rec={l_rec}, l_cl={l_cl})",
                    self.epoch
                )));
            }

            let mut grads = tape.backward(total_var);
            drop(tape);
            // Coupled L2: the objective carries l2 * ||params||^2.
            if self.hp.l2 > 0.0 {
                for (name, tensor) in &self.params.tensors {
                    let reg = tensor.mapv(|x| 2.0 * self.hp.l2 * x);
                    match grads.get_mut(name) {
                        Some(g) => *g += &reg,
                        None => {
                            grads.insert(name.clone(), reg);
                        }
                    }
                }
            }
            clip_global_norm(&mut grads, GRAD_CLIP_NORM);
            self.adam.step(&mut self.params, &grads, self.hp.learning_rate);

            sum.l_rec += l_rec;
            sum.l_cl += l_cl;
            sum.l_total += l_total;
            batches += 1;
            if built {
                union_graphs_built += 1;
            }
        }

        let n = batches as f64;
        Ok(EpochStats {
            epoch: self.epoch,
            mean: LossBreakdown {
                l_rec: sum.l_rec / n,
                l_cl: sum.l_cl / n,
                l_total: sum.l_total / n,
            },
            secs: started.elapsed().as_secs_f64(),
            batches,
            samples: samples.len(),
            union_graphs_built,
        })
    }
}
