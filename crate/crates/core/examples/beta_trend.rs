//! β sweep on the default synthetic dataset.
//!
//! ```sh
//! cargo run --release -p specsmooth --example beta_trend
//! ```

use std::time::Instant;

use specsmooth::data::{build_sequences, five_core_filter, generate_synthetic, split_leave_one_out, SynthConfig};
use specsmooth::eval::{evaluate, EvalOptions};
use specsmooth::experiment::{train_model, TrainOptions};
use specsmooth::model::{ItemScope, ModelConfig};

fn env<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() -> specsmooth::Result<()> {
    let log = generate_synthetic(&SynthConfig::default())?;
    let max_len = env("MAX_LEN", 20);
    let ds = build_sequences(&five_core_filter(log.events)?, max_len);
    let split = split_leave_one_out(&ds);
    let base = ModelConfig {
        dim: env("DIM", 32),
        max_len,
        num_layers: env("LAYERS", 1),
        num_heads: 1,
        dropout: env("DROPOUT", 0.2),
        lambda: env("LAMBDA", 0.0),
        learning_rate: env("LR", 1e-3),
        batch_size: env("BATCH", 128),
        seed: env("SEED", 7),
        item_scope: if env("BATCH_ITEMS", 0) == 1 { ItemScope::Batch } else { ItemScope::All },
        ..ModelConfig::default()
    };
    let opts = TrainOptions {
        epochs: env("EPOCHS", 20),
        patience: env("PATIENCE", 50),
        eval_every: env("EVAL_EVERY", 1),
    };
    let betas: Vec<f64> = std::env::var("BETAS")
        .unwrap_or_else(|_| "0,1e-5,1e-4,1e-3,1e-1".into())
        .split(',')
        .map(|s| s.parse().expect("beta"))
        .collect();
    println!("beta,ndcg@10,recall@10,ild@10,ausc_item,ausc_seq,best_epoch,secs");
    for beta in betas {
        let start = Instant::now();
        let cfg = ModelConfig { beta, ..base.clone() };
        let out = train_model(&ds, &split, &cfg, &opts, |m, v| {
            if std::env::var("VERBOSE").is_ok() {
                eprintln!("  ep {} total {:.4} rec {:.4} valid {:?} {:.2}s", m.epoch, m.total, m.rec, v, m.wall_time_s);
            }
        })?;
        let r = evaluate(&out.params, &ds, &split.test, &EvalOptions::default())?;
        println!(
            "{beta},{:.5},{:.5},{:.5},{:.4},{:.4},{},{:.1}",
            r.ndcg(10).unwrap(),
            r.recall(10).unwrap(),
            r.ild,
            r.ausc_item,
            r.ausc_seq,
            out.best_epoch,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
