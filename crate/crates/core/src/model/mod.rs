//! Causal self-attention sequence encoder and its training objective.

pub mod checkpoint;
pub mod config;
pub mod encoder;
pub mod loss;
pub mod objective;
pub mod params;
pub mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{ItemScope, ModelConfig, Regularizer};
pub use encoder::{forward, score_all, score_items, ForwardOutput, Mode};
pub use loss::{cos_reg, euclid_reg, sampled_ce_loss};
pub use objective::{loss_and_grad, regularizer_with_grad, total_loss, LossComponents, TrainBatch};
pub use params::{LayerParams, ModelParams, Tensor};
pub use train::{train_step, Adam, EpochMetrics, Trainer};

/// Deterministic initialisation from `seed`.
pub fn init_params(cfg: &ModelConfig, num_items: usize, seed: u64) -> ModelParams {
    ModelParams::init(cfg, num_items, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn init_params_zeroed(cfg: &ModelConfig, num_items: usize) -> ModelParams {
    init_params(cfg, num_items, 0).zeros_like()
}
