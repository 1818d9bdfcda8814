//! End-to-end pipelines: dataset preparation, training with early stopping,
//! evaluation, λ/β sweeps and determinant-based re-ranking.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    build_sequences, five_core_filter, ingest, split_leave_one_out, write_bundle, DatasetStats,
    InputFormat, SequenceDataset, Split, SplitExample,
};
use crate::dpp::{gram_kernel, greedy_select};
use crate::error::{Error, Result};
use crate::eval::{encode_last, evaluate, intra_list_diversity, rank_all_items, EvalOptions, EvalReport};
use crate::linalg::{norm, Matrix};
use crate::model::{EpochMetrics, ModelConfig, ModelParams, Trainer};

/// File names used inside an output directory.
pub const BUNDLE_FILE: &str = "dataset.ssqb";
pub const STATS_FILE: &str = "stats.json";
pub const CHECKPOINT_FILE: &str = "model.ssck";

#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: SequenceDataset,
    pub stats: DatasetStats,
    pub malformed: usize,
    pub bundle_path: PathBuf,
    pub stats_path: PathBuf,
}

/// Ingests a log, applies the 5-core filter, builds sequences and writes the
/// bundle plus its stats sidecar into `out_dir`.
pub fn prepare(
    input: &Path,
    format: InputFormat,
    has_header: bool,
    max_len: usize,
    out_dir: &Path,
) -> Result<Prepared> {
    if max_len == 0 {
        return Err(Error::InvalidInput("max_len must be at least 1".into()));
    }
    let report = ingest(input, format, has_header)?;
    let events = five_core_filter(report.interactions)?;
    let dataset = build_sequences(&events, max_len);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let bundle_path = out_dir.join(BUNDLE_FILE);
    write_bundle(&dataset, &bundle_path)?;
    let stats = DatasetStats::of(&dataset);
    let stats_path = out_dir.join(STATS_FILE);
    let json = serde_json::to_string_pretty(&stats).expect("stats serialise");
    std::fs::write(&stats_path, json + "\n").map_err(|e| Error::io(&stats_path, e))?;
    Ok(Prepared {
        dataset,
        stats,
        malformed: report.malformed,
        bundle_path,
        stats_path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Epochs without a validation NDCG@10 improvement before stopping.
    pub patience: usize,
    /// Validate every this many epochs.
    pub eval_every: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 200,
            patience: 50,
            eval_every: 1,
        }
    }
}

/// Validation cutoff driving early stopping.
pub const EARLY_STOP_CUTOFF: usize = 10;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validated epoch.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub best_valid_ndcg: f64,
    pub epochs_run: usize,
    pub history: Vec<EpochMetrics>,
}

/// Trains from scratch, keeping the parameters with the best validation
/// NDCG@10. `on_epoch` sees each epoch's metrics and, on validation epochs,
/// the validation NDCG@10.
pub fn train_model(
    ds: &SequenceDataset,
    split: &Split,
    cfg: &ModelConfig,
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochMetrics, Option<f64>),
) -> Result<TrainOutcome> {
    if ds.max_len != cfg.max_len {
        return Err(Error::InvalidInput(format!(
            "dataset was prepared with max_len {}, model uses {}",
            ds.max_len, cfg.max_len
        )));
    }
    if opts.epochs == 0 || opts.eval_every == 0 {
        return Err(Error::InvalidInput("epochs and eval_every must be positive".into()));
    }
    let mut trainer = Trainer::new(cfg, ds.num_items())?;
    let valid_opts = EvalOptions {
        cutoffs: vec![EARLY_STOP_CUTOFF],
        ..EvalOptions::default()
    };
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut history = Vec::new();
    let mut since_best = 0;
    for epoch in 1..=opts.epochs {
        let m = trainer.run_epoch(ds, &split.train)?;
        let mut valid = None;
        if epoch % opts.eval_every == 0 || epoch == opts.epochs {
            let v = validation_ndcg(&trainer.params, &split.valid, &valid_opts)?;
            valid = Some(v);
            if best.as_ref().is_none_or(|(b, _, _)| v > *b) {
                best = Some((v, epoch, trainer.params.clone()));
                since_best = 0;
            } else {
                since_best += opts.eval_every;
            }
        }
        on_epoch(&m, valid);
        history.push(m);
        if since_best >= opts.patience {
            break;
        }
    }
    let (best_valid_ndcg, best_epoch, params) = best.expect("at least one validation");
    Ok(TrainOutcome {
        params,
        best_epoch,
        best_valid_ndcg,
        epochs_run: history.len(),
        history,
    })
}

fn validation_ndcg(params: &ModelParams, valid: &[SplitExample], opts: &EvalOptions) -> Result<f64> {
    if valid.is_empty() {
        return Err(Error::EmptyDataset("splitting (no validation users)".into()));
    }
    let inputs: Vec<Vec<u32>> = valid.iter().map(|e| e.input.clone()).collect();
    let h = encode_last(params, &inputs)?;
    let ranked = rank_all_items(params, valid, &h, opts);
    Ok(ranked
        .iter()
        .map(|r| crate::eval::ndcg_at(r.rank, EARLY_STOP_CUTOFF))
        .sum::<f64>()
        / ranked.len() as f64)
}

/// One trained-and-evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub beta: f64,
    #[serde(rename = "ndcg@10")]
    pub ndcg10: f64,
    #[serde(rename = "ild@10")]
    pub ild10: f64,
    pub ausc_item: f64,
    pub ausc_seq: f64,
    pub best_epoch: usize,
}

pub const SWEEP_HEADER: &str = "lambda,beta,ndcg@10,ild@10,ausc_item,ausc_seq,best_epoch";

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.lambda, self.beta, self.ndcg10, self.ild10, self.ausc_item, self.ausc_seq, self.best_epoch
        )
    }
}

/// Grid points sorted by `(λ, β)` with duplicates removed.
pub fn sweep_grid(lambdas: &[f64], betas: &[f64]) -> Result<Vec<(f64, f64)>> {
    if lambdas.is_empty() || betas.is_empty() {
        return Err(Error::InvalidInput("sweep grids must be non-empty".into()));
    }
    if lambdas.iter().chain(betas).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput("grid values must be finite and non-negative".into()));
    }
    let mut grid: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| betas.iter().map(move |&b| (l, b)))
        .collect();
    grid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    grid.dedup();
    Ok(grid)
}

/// Trains one model per grid point from the same seed, evaluates each on the
/// test split and writes a CSV row (flushed) as soon as it is ready.
#[allow(clippy::too_many_arguments)]
pub fn sweep<W: Write>(
    ds: &SequenceDataset,
    split: &Split,
    base: &ModelConfig,
    lambdas: &[f64],
    betas: &[f64],
    train_opts: &TrainOptions,
    eval_opts: &EvalOptions,
    out: &mut W,
    mut on_row: impl FnMut(&SweepRow),
) -> Result<Vec<SweepRow>> {
    let grid = sweep_grid(lambdas, betas)?;
    let io = |e| Error::io("<sweep output>", e);
    writeln!(out, "{SWEEP_HEADER}").map_err(io)?;
    out.flush().map_err(io)?;
    let mut rows = Vec::with_capacity(grid.len());
    for (lambda, beta) in grid {
        let cfg = ModelConfig {
            lambda,
            beta,
            ..base.clone()
        };
        let outcome = train_model(ds, split, &cfg, train_opts, |_, _| {})?;
        let report = evaluate(&outcome.params, ds, &split.test, eval_opts)?;
        let row = SweepRow {
            lambda,
            beta,
            ndcg10: report.ndcg(10).unwrap_or(f64::NAN),
            ild10: report.ild,
            ausc_item: report.ausc_item,
            ausc_seq: report.ausc_seq,
            best_epoch: outcome.best_epoch,
        };
        writeln!(out, "{}", row.csv_line()).map_err(io)?;
        out.flush().map_err(io)?;
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

/// Re-ranked list for one user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RerankedUser {
    pub user: String,
    pub before: Vec<String>,
    pub after: Vec<String>,
    pub ild_before: f64,
    pub ild_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RerankSummary {
    pub schema_version: u32,
    pub candidates: usize,
    pub list_size: usize,
    pub ild_before: f64,
    pub ild_after: f64,
    pub users: Vec<RerankedUser>,
}

/// Greedy determinant selection of `k` items among `candidates` (item ids,
/// best first) over their unit-normalised embeddings. If the determinant
/// collapses before `k` picks, the list is completed in candidate order.
pub fn diversify(params: &ModelParams, candidates: &[u32], k: usize) -> Result<Vec<u32>> {
    let k = k.min(candidates.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    let d = params.dim;
    let features = Matrix::from_fn(candidates.len(), d, |i, j| {
        let row = params.item_row(candidates[i]);
        let r = norm(row);
        if r > 0.0 {
            row[j] / r
        } else {
            0.0
        }
    });
    let sel = greedy_select(&gram_kernel(&features)?, k)?;
    let mut out: Vec<u32> = sel.selected.iter().map(|&i| candidates[i]).collect();
    for &c in candidates {
        if out.len() == k {
            break;
        }
        if !out.contains(&c) {
            out.push(c);
        }
    }
    Ok(out)
}

/// Re-ranks each user's top `candidates` items down to `k`.
pub fn rerank(
    params: &ModelParams,
    ds: &SequenceDataset,
    examples: &[SplitExample],
    candidates: usize,
    k: usize,
) -> Result<RerankSummary> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset("splitting (no users to re-rank)".into()));
    }
    if k == 0 || candidates < k {
        return Err(Error::InvalidInput("need 0 < k <= candidates".into()));
    }
    let inputs: Vec<Vec<u32>> = examples.iter().map(|e| e.input.clone()).collect();
    let h = encode_last(params, &inputs)?;
    let ranked = rank_all_items(params, examples, &h, &EvalOptions::default());
    let name = |v: u32| ds.item_ids[v as usize].clone();
    let mut users = Vec::with_capacity(ranked.len());
    for r in &ranked {
        let pool = &r.top[..r.top.len().min(candidates)];
        let before = &pool[..k.min(pool.len())];
        let after = diversify(params, pool, k)?;
        users.push(RerankedUser {
            user: ds.user_ids[r.user].clone(),
            ild_before: intra_list_diversity(before, params)?,
            ild_after: intra_list_diversity(&after, params)?,
            before: before.iter().map(|&v| name(v)).collect(),
            after: after.iter().map(|&v| name(v)).collect(),
        });
    }
    let n = users.len() as f64;
    Ok(RerankSummary {
        schema_version: crate::SCHEMA_VERSION,
        candidates,
        list_size: k,
        ild_before: users.iter().map(|u| u.ild_before).sum::<f64>() / n,
        ild_after: users.iter().map(|u| u.ild_after).sum::<f64>() / n,
        users,
    })
}

/// Convenience: split the dataset, train, and evaluate on the test split.
pub fn train_and_evaluate(
    ds: &SequenceDataset,
    cfg: &ModelConfig,
    train_opts: &TrainOptions,
    eval_opts: &EvalOptions,
) -> Result<(TrainOutcome, EvalReport)> {
    let split = split_leave_one_out(ds);
    let outcome = train_model(ds, &split, cfg, train_opts, |_, _| {})?;
    let report = evaluate(&outcome.params, ds, &split.test, eval_opts)?;
    Ok((outcome, report))
}
