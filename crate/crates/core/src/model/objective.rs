//! The combined objective `L_rec + λ·L_seq + β·L_item` and its gradient.

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{sample_negatives, SequenceDataset, TrainExample, PAD};
use crate::error::{Error, Result};
use crate::linalg::{dot, smoothing_loss_with_grad, Matrix};
use crate::model::config::{ItemScope, ModelConfig, Regularizer};
use crate::model::encoder::{backward_sequence, forward, ForwardOutput, Mode};
use crate::model::loss::{cos_reg_with_grad, euclid_reg_with_grad, sampled_ce_with_grad};
use crate::model::params::ModelParams;

/// Sequences per backward work unit. Gradients are reduced chunk by chunk in
/// a fixed order so results do not depend on thread count.
const BACKWARD_CHUNK: usize = 16;

/// Inputs, shifted targets and per-position negatives for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    pub inputs: Vec<Vec<u32>>,
    pub targets: Vec<Vec<u32>>,
    /// `negatives[b][t]` is empty where `targets[b][t]` is padding.
    pub negatives: Vec<Vec<Vec<u32>>>,
}

impl TrainBatch {
    /// Draws `count` negatives for every labelled position.
    pub fn sample<R: Rng + ?Sized>(
        ds: &SequenceDataset,
        examples: &[&TrainExample],
        count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut negatives = Vec::with_capacity(examples.len());
        for ex in examples {
            let mut per_pos = Vec::with_capacity(ex.targets.len());
            for &t in &ex.targets {
                per_pos.push(if t == PAD {
                    Vec::new()
                } else {
                    sample_negatives(ds, ex.user, count, rng)?
                });
            }
            negatives.push(per_pos);
        }
        Ok(TrainBatch {
            inputs: examples.iter().map(|e| e.input.clone()).collect(),
            targets: examples.iter().map(|e| e.targets.clone()).collect(),
            negatives,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn labelled_positions(&self) -> usize {
        self.targets.iter().flatten().filter(|&&t| t != PAD).count()
    }

    /// Distinct non-padding items referenced anywhere in the batch.
    pub fn items(&self) -> Vec<u32> {
        let mut set = BTreeSet::new();
        set.extend(self.inputs.iter().flatten().copied());
        set.extend(self.targets.iter().flatten().copied());
        set.extend(self.negatives.iter().flatten().flatten().copied());
        set.remove(&PAD);
        set.into_iter().collect()
    }
}

/// Loss terms of one step. Regulariser terms are reported unweighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossComponents {
    #[serde(rename = "L_rec")]
    pub rec: f64,
    #[serde(rename = "L_seq")]
    pub seq: f64,
    #[serde(rename = "L_item")]
    pub item: f64,
    pub total: f64,
}

/// Value and gradient of the configured regulariser on `m`.
pub fn regularizer_with_grad(kind: Regularizer, m: &Matrix) -> Result<(f64, Matrix)> {
    match kind {
        Regularizer::Smoothing => smoothing_loss_with_grad(m),
        Regularizer::Cosine => cos_reg_with_grad(m),
        Regularizer::Euclidean => Ok(euclid_reg_with_grad(m)),
    }
}

fn item_rows(params: &ModelParams, cfg: &ModelConfig, batch: &TrainBatch) -> Vec<u32> {
    match cfg.item_scope {
        ItemScope::All => (1..=params.num_items as u32).collect(),
        ItemScope::Batch => batch.items(),
    }
}

fn item_matrix(params: &ModelParams, rows: &[u32]) -> Matrix {
    let d = params.dim;
    Matrix::from_fn(rows.len(), d, |i, j| params.item_row(rows[i])[j])
}

/// A regulariser with zero weight is still evaluated for logging, but a
/// failure there must not abort training.
fn weighted_term(
    weight: f64,
    kind: Regularizer,
    m: &Matrix,
    want_grad: bool,
) -> Result<(f64, Option<Matrix>)> {
    match regularizer_with_grad(kind, m) {
        Ok((v, g)) => Ok((v, (want_grad && weight > 0.0).then_some(g))),
        Err(_) if weight == 0.0 => Ok((f64::NAN, None)),
        Err(e) => Err(e),
    }
}

fn combine(rec: f64, seq: f64, item: f64, cfg: &ModelConfig) -> LossComponents {
    let mut total = rec;
    if cfg.lambda > 0.0 {
        total += cfg.lambda * seq;
    }
    if cfg.beta > 0.0 {
        total += cfg.beta * item;
    }
    LossComponents {
        rec,
        seq,
        item,
        total,
    }
}

/// Mean sampled cross-entropy over labelled positions of an existing forward
/// pass.
fn rec_loss(fwd: &ForwardOutput, params: &ModelParams, batch: &TrainBatch) -> Result<f64> {
    let count = batch.labelled_positions();
    if count == 0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for b in 0..batch.len() {
        for (t, &target) in batch.targets[b].iter().enumerate() {
            if target == PAD {
                continue;
            }
            let h = fwd.h_at(b, t);
            let pos = dot(h, params.item_row(target));
            let negs: Vec<f64> = batch.negatives[b][t]
                .iter()
                .map(|&v| dot(h, params.item_row(v)))
                .collect();
            sum += sampled_ce_with_grad(pos, &negs)?.loss;
        }
    }
    Ok(sum / count as f64)
}

/// Evaluates the objective on an existing forward pass.
pub fn total_loss(
    fwd: &ForwardOutput,
    params: &ModelParams,
    cfg: &ModelConfig,
    batch: &TrainBatch,
) -> Result<LossComponents> {
    let rec = rec_loss(fwd, params, batch)?;
    let (seq, _) = weighted_term(cfg.lambda, cfg.regularizer, &fwd.h_last(), false)?;
    let items = item_matrix(params, &item_rows(params, cfg, batch));
    let (item, _) = weighted_term(cfg.beta, cfg.regularizer, &items, false)?;
    Ok(combine(rec, seq, item, cfg))
}

/// Runs forward and backward, returning the loss terms and the gradient of
/// the total with respect to every parameter.
pub fn loss_and_grad(
    params: &ModelParams,
    cfg: &ModelConfig,
    batch: &TrainBatch,
    mode: Mode,
) -> Result<(LossComponents, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let fwd = forward(params, &batch.inputs, mode)?;
    let d = params.dim;
    let n = params.max_len;
    let mut grads = params.zeros_like();

    let count = batch.labelled_positions();
    let inv = if count == 0 { 0.0 } else { 1.0 / count as f64 };
    let mut rec = 0.0;
    let mut d_out: Vec<Vec<f64>> = vec![vec![0.0; n * d]; batch.len()];
    for b in 0..batch.len() {
        for (t, &target) in batch.targets[b].iter().enumerate() {
            if target == PAD {
                continue;
            }
            let h = fwd.h_at(b, t);
            let negs = &batch.negatives[b][t];
            let pos = dot(h, params.item_row(target));
            let neg_scores: Vec<f64> = negs.iter().map(|&v| dot(h, params.item_row(v))).collect();
            let term = sampled_ce_with_grad(pos, &neg_scores)?;
            rec += term.loss;
            let dh = &mut d_out[b][t * d..(t + 1) * d];
            let mut push = |item: u32, ds: f64| {
                let ds = ds * inv;
                let row = params.item_row(item);
                for j in 0..d {
                    dh[j] += ds * row[j];
                    grads.item_emb.data[item as usize * d + j] += ds * h[j];
                }
            };
            push(target, term.d_pos);
            for (&v, &g) in negs.iter().zip(&term.d_neg) {
                push(v, g);
            }
        }
    }
    rec *= inv;

    let (seq, seq_grad) = weighted_term(cfg.lambda, cfg.regularizer, &fwd.h_last(), true)?;
    if let Some(g) = seq_grad {
        for (b, out) in d_out.iter_mut().enumerate() {
            for j in 0..d {
                out[(n - 1) * d + j] += cfg.lambda * g[(b, j)];
            }
        }
    }

    let chunk_grads: Vec<ModelParams> = fwd
        .caches
        .par_chunks(BACKWARD_CHUNK)
        .zip(d_out.par_chunks(BACKWARD_CHUNK))
        .map(|(caches, outs)| {
            let mut g = params.zeros_like();
            for (c, o) in caches.iter().zip(outs) {
                backward_sequence(params, c, o, &mut g);
            }
            g
        })
        .collect();
    for g in &chunk_grads {
        grads.add_scaled(g, 1.0);
    }

    let rows = item_rows(params, cfg, batch);
    let (item, item_grad) = weighted_term(cfg.beta, cfg.regularizer, &item_matrix(params, &rows), true)?;
    if let Some(g) = item_grad {
        for (i, &v) in rows.iter().enumerate() {
            for j in 0..d {
                grads.item_emb.data[v as usize * d + j] += cfg.beta * g[(i, j)];
            }
        }
    }
    grads.zero_padding_row();
    Ok((combine(rec, seq, item, cfg), grads))
}
