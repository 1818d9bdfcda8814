//! Adam updates and the epoch loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{SequenceDataset, TrainExample};
use crate::error::{Error, Result};
use crate::linalg::ausc;
use crate::model::config::ModelConfig;
use crate::model::encoder::{forward, Mode};
use crate::model::init_params;
use crate::model::objective::{loss_and_grad, LossComponents, TrainBatch};
use crate::model::params::ModelParams;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Stream of the training generator; initialisation uses stream 0.
const TRAIN_STREAM: u64 = 1;

#[derive(Debug, Clone)]
pub struct Adam {
    m: ModelParams,
    v: ModelParams,
    t: i32,
    lr: f64,
}

impl Adam {
    pub fn new(params: &ModelParams, lr: f64) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            lr,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// Applies one bias-corrected update, then restores the storage
    /// invariants: `f32` values and a zero padding row.
    pub fn update(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let step = self.lr * c2.sqrt() / c1;
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for (((p, g), m), v) in tensors {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = ADAM_BETA1 * m.data[i] + (1.0 - ADAM_BETA1) * gi;
                v.data[i] = ADAM_BETA2 * v.data[i] + (1.0 - ADAM_BETA2) * gi * gi;
                p.data[i] -= step * m.data[i] / (v.data[i].sqrt() + ADAM_EPS * c2.sqrt());
            }
        }
        params.round_to_f32();
        params.zero_padding_row();
    }
}

fn check_gradients(grads: &ModelParams) -> Result<()> {
    for (name, t) in grads.named_tensors() {
        if t.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!("non-finite gradient in {name}")));
        }
    }
    Ok(())
}

/// One optimisation step. Dropout masks are seeded from `rng`.
pub fn train_step<R: Rng + ?Sized>(
    params: &mut ModelParams,
    opt: &mut Adam,
    batch: &TrainBatch,
    cfg: &ModelConfig,
    rng: &mut R,
) -> Result<LossComponents> {
    let seed = rng.random::<u64>();
    let mode = if cfg.dropout > 0.0 {
        Mode::Train {
            dropout: cfg.dropout,
            seed,
        }
    } else {
        Mode::Eval
    };
    let (loss, grads) = loss_and_grad(params, cfg, batch, mode)?;
    if !loss.total.is_finite() {
        return Err(Error::NumericalFailure("non-finite training loss".into()));
    }
    check_gradients(&grads)?;
    opt.update(params, &grads);
    Ok(loss)
}

/// One line of the per-epoch metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub schema_version: u32,
    pub epoch: usize,
    #[serde(rename = "L_rec")]
    pub rec: f64,
    #[serde(rename = "L_seq")]
    pub seq: f64,
    #[serde(rename = "L_item")]
    pub item: f64,
    pub total: f64,
    pub ausc_item: f64,
    pub ausc_seq: f64,
    pub wall_time_s: f64,
}

/// Model, optimizer state and the seeded generator driving shuffling,
/// negative sampling and dropout.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub cfg: ModelConfig,
    pub params: ModelParams,
    opt: Adam,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl Trainer {
    pub fn new(cfg: &ModelConfig, num_items: usize) -> Result<Self> {
        cfg.validate()?;
        let params = init_params(cfg, num_items, cfg.seed);
        Ok(Self::from_params(cfg, params))
    }

    pub fn from_params(cfg: &ModelConfig, params: ModelParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(TRAIN_STREAM);
        Trainer {
            cfg: cfg.clone(),
            opt: Adam::new(&params, cfg.learning_rate),
            params,
            rng,
            epoch: 0,
        }
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn step(&mut self, batch: &TrainBatch) -> Result<LossComponents> {
        train_step(&mut self.params, &mut self.opt, batch, &self.cfg, &mut self.rng)
    }

    /// Samples a batch from `examples` with the trainer's generator.
    pub fn sample_batch(
        &mut self,
        ds: &SequenceDataset,
        examples: &[&TrainExample],
    ) -> Result<TrainBatch> {
        TrainBatch::sample(ds, examples, self.cfg.negatives, &mut self.rng)
    }

    /// One shuffled pass over `train`. Loss terms are batch means averaged
    /// over the epoch; `ausc_seq` uses the last batch's final-position
    /// outputs.
    pub fn run_epoch(
        &mut self,
        ds: &SequenceDataset,
        train: &[TrainExample],
    ) -> Result<EpochMetrics> {
        if train.is_empty() {
            return Err(Error::EmptyDataset("splitting (no training sequences)".into()));
        }
        let start = Instant::now();
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut sums = [0.0; 4];
        let mut batches = 0usize;
        let mut last_inputs = Vec::new();
        for chunk in order.chunks(self.cfg.batch_size) {
            let examples: Vec<&TrainExample> = chunk.iter().map(|&i| &train[i]).collect();
            let batch = self.sample_batch(ds, &examples)?;
            let c = self.step(&batch)?;
            for (s, v) in sums.iter_mut().zip([c.rec, c.seq, c.item, c.total]) {
                *s += v;
            }
            batches += 1;
            last_inputs = batch.inputs;
        }
        self.epoch += 1;
        let mean = |s: f64| s / batches as f64;
        let h = forward(&self.params, &last_inputs, Mode::Eval)?.h_last();
        Ok(EpochMetrics {
            schema_version: crate::SCHEMA_VERSION,
            epoch: self.epoch,
            rec: mean(sums[0]),
            seq: mean(sums[1]),
            item: mean(sums[2]),
            total: mean(sums[3]),
            ausc_item: ausc(&self.params.active_items()).unwrap_or(f64::NAN),
            ausc_seq: ausc(&h).unwrap_or(f64::NAN),
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }
}
