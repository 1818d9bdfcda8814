mod common;

use common::{tiny_cfg, worst_relative_error};
use specsmooth::model::{ItemScope, ModelConfig, Regularizer};

#[test]
fn smoothing_objective_gradients() {
    let (name, err) = worst_relative_error(&tiny_cfg(Regularizer::Smoothing), 5);
    assert!(err <= 1e-3, "{name}: {err}");
}

#[test]
fn baseline_regularizer_gradients() {
    for reg in [Regularizer::Cosine, Regularizer::Euclidean] {
        let (name, err) = worst_relative_error(&tiny_cfg(reg), 8);
        assert!(err <= 1e-3, "{reg:?} {name}: {err}");
    }
}

#[test]
fn multi_head_two_layer_gradients() {
    let cfg = ModelConfig {
        num_layers: 2,
        num_heads: 2,
        item_scope: ItemScope::Batch,
        ..tiny_cfg(Regularizer::Smoothing)
    };
    let (name, err) = worst_relative_error(&cfg, 13);
    assert!(err <= 1e-3, "{name}: {err}");
}
