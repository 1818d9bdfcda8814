//! Finite-difference gradient checks shared by several test targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specsmooth::model::{
    forward, init_params, loss_and_grad, total_loss, ModelConfig, ModelParams, Mode,
    Regularizer, TrainBatch,
};

pub fn tiny_cfg(reg: Regularizer) -> ModelConfig {
    ModelConfig {
        dim: 6,
        max_len: 4,
        num_layers: 1,
        num_heads: 1,
        dropout: 0.0,
        lambda: 0.1,
        beta: 0.1,
        regularizer: reg,
        ..ModelConfig::default()
    }
}

pub fn batch() -> TrainBatch {
    TrainBatch {
        inputs: vec![
            vec![0, 1, 2, 3],
            vec![4, 5, 6, 7],
            vec![0, 0, 9, 10],
            vec![11, 3, 8, 2],
            vec![0, 12, 1, 5],
            vec![6, 6, 4, 9],
            vec![0, 0, 0, 7],
        ],
        targets: vec![
            vec![0, 2, 3, 4],
            vec![5, 6, 7, 8],
            vec![0, 0, 10, 11],
            vec![3, 8, 2, 1],
            vec![0, 1, 5, 12],
            vec![6, 4, 9, 10],
            vec![0, 0, 0, 3],
        ],
        negatives: vec![
            vec![vec![], vec![7], vec![8], vec![9]],
            vec![vec![1], vec![2], vec![3], vec![12]],
            vec![vec![], vec![], vec![1], vec![5]],
            vec![vec![4], vec![6], vec![7], vec![9]],
            vec![vec![], vec![2], vec![3], vec![8]],
            vec![vec![1], vec![2], vec![3], vec![5]],
            vec![vec![], vec![], vec![], vec![11]],
        ],
    }
}

/// Parameters at a scale where attention is far from uniform, so every
/// tensor's gradient is well above finite-difference noise.
pub fn spread_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    let mut p = init_params(cfg, 12, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    p.for_each_tensor_mut(|name, t| {
        let base = if name.ends_with("_gain") { 1.0 } else { 0.0 };
        for v in &mut t.data {
            *v = base + rng.random_range(-0.6..0.6);
        }
    });
    p.zero_padding_row();
    p
}

pub fn objective(p: &ModelParams, cfg: &ModelConfig, b: &TrainBatch) -> f64 {
    let fwd = forward(p, &b.inputs, Mode::Eval).unwrap();
    total_loss(&fwd, p, cfg, b).unwrap().total
}

/// Largest per-tensor relative error `‖g - g_fd‖ / max(‖g‖, ‖g_fd‖)`.
pub fn worst_relative_error(cfg: &ModelConfig, seed: u64) -> (String, f64) {
    let params = spread_params(cfg, seed);
    let b = batch();
    let (_, grads) = loss_and_grad(&params, cfg, &b, Mode::Eval).unwrap();
    let h = 1e-4;
    let names = params.names();
    let mut worst = (String::new(), 0.0);
    for (ti, name) in names.iter().enumerate() {
        let analytic = &grads.tensors()[ti].data;
        let mut num = vec![0.0; analytic.len()];
        for (k, slot) in num.iter_mut().enumerate() {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].data[k] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].data[k] -= h;
            *slot = (objective(&plus, cfg, &b) - objective(&minus, cfg, &b)) / (2.0 * h);
        }
        let diff: f64 = analytic.iter().zip(&num).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn = num.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = na.max(nn);
        let rel = if scale < 1e-10 { diff } else { diff / scale };
        if rel > worst.1 {
            worst = (name.clone(), rel);
        }
    }
    worst
}

