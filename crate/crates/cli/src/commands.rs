use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use specsmooth::data::{
    generate_synthetic, read_bundle, split_leave_one_out, write_tsv, InputFormat, SequenceDataset,
    SynthConfig,
};
use specsmooth::eval::{evaluate_detailed, EvalOptions};
use specsmooth::experiment::{self, TrainOptions, CHECKPOINT_FILE};
use specsmooth::model::{load_checkpoint, save_checkpoint, ItemScope, ModelConfig, ModelParams};
use specsmooth::SCHEMA_VERSION;

use crate::config::ExperimentConfig;
use crate::{
    CliError, EvalArgs, ModelArgs, PrepareArgs, RerankArgs, SpectrumArgs, SweepArgs, SynthArgs,
    TrainArgs,
};

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        num_users: a.users,
        num_items: a.items,
        zipf_s: a.zipf,
        cluster_count: a.clusters,
        seed: a.seed,
        min_len: a.min_len,
        max_len: a.max_len,
        ..SynthConfig::default()
    };
    let log = generate_synthetic(&cfg)?;
    if let Some(parent) = a.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_tsv(&log.events, &a.output)?;
    let share = log.head_share(0.1);
    eprintln!(
        "wrote {} events for {} users; top 10% of items hold {:.1}% of interactions",
        log.events.len(),
        a.users,
        100.0 * share
    );
    print_json(&json!({
        "schema_version": SCHEMA_VERSION,
        "path": a.output,
        "users": a.users,
        "items": a.items,
        "interactions": log.events.len(),
        "head_share_10pct": share,
    }));
    Ok(())
}

pub fn prepare(a: PrepareArgs) -> Result<()> {
    let format = match &a.format {
        Some(f) => f.parse::<InputFormat>()?,
        None => InputFormat::from_path(&a.input),
    };
    let p = experiment::prepare(&a.input, format, a.header, a.max_len, &a.out_dir)?;
    if p.malformed > 0 {
        eprintln!("skipped {} malformed rows", p.malformed);
    }
    eprintln!(
        "{} users, {} items, {} interactions",
        p.stats.users, p.stats.items, p.stats.interactions
    );
    let mut v = serde_json::to_value(&p.stats).expect("json");
    v["bundle"] = json!(p.bundle_path);
    v["stats_path"] = json!(p.stats_path);
    v["malformed_rows"] = json!(p.malformed);
    print_json(&v);
    Ok(())
}

/// Settings after merging defaults, the config file and flags.
struct Resolved {
    file: ExperimentConfig,
    model: ModelConfig,
    train: TrainOptions,
    bundle: PathBuf,
    out_dir: PathBuf,
}

fn resolve(m: &ModelArgs, seed: u64, lambda: Option<f64>, beta: Option<f64>) -> Result<Resolved> {
    let file = match &m.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut model = file.model.clone();
    let mut train = file.train.clone();
    model.seed = seed;
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(model.dim, m.dim);
    set!(model.num_layers, m.layers);
    set!(model.num_heads, m.heads);
    set!(model.dropout, m.dropout);
    set!(model.negatives, m.negatives);
    set!(model.learning_rate, m.lr);
    set!(model.batch_size, m.batch_size);
    set!(model.lambda, lambda);
    set!(model.beta, beta);
    if let Some(r) = &m.regularizer {
        model.regularizer = r.parse()?;
    }
    if m.batch_items {
        model.item_scope = ItemScope::Batch;
    }
    set!(train.epochs, m.epochs);
    set!(train.patience, m.patience);
    set!(train.eval_every, m.eval_every);
    let bundle = m
        .data
        .clone()
        .or_else(|| file.data.bundle.clone())
        .ok_or_else(|| CliError::Usage("no dataset: pass --data or set [data] bundle".into()))?;
    let out_dir = m
        .out_dir
        .clone()
        .or_else(|| file.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Resolved {
        file,
        model,
        train,
        bundle,
        out_dir,
    })
}

/// Loads the bundle and adopts its sequence length.
fn load_dataset(path: &Path, model: &mut ModelConfig) -> Result<SequenceDataset> {
    let ds = read_bundle(path)?;
    model.max_len = ds.max_len;
    model.validate()?;
    Ok(ds)
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut r = resolve(&a.model, a.seed, a.lambda, a.beta)?;
    let ds = load_dataset(&r.bundle, &mut r.model)?;
    let split = split_leave_one_out(&ds);
    ensure_dir(&r.out_dir)?;
    let metrics_path = r.out_dir.join("metrics.jsonl");
    let mut metrics = BufWriter::new(File::create(&metrics_path).map_err(io_err(&metrics_path))?);
    let mut write_err = None;
    let outcome = experiment::train_model(&ds, &split, &r.model, &r.train, |m, valid| {
        let mut v = serde_json::to_value(m).expect("json");
        if let Some(n) = valid {
            v["valid_ndcg@10"] = json!(n);
        }
        if let Err(e) = writeln!(metrics, "{v}").and_then(|_| metrics.flush()) {
            write_err.get_or_insert(e);
        }
        eprintln!(
            "epoch {:>4}  loss {:.5}  rec {:.5}  valid ndcg@10 {}",
            m.epoch,
            m.total,
            m.rec,
            valid.map_or("-".to_owned(), |v| format!("{v:.5}"))
        );
    })?;
    if let Some(e) = write_err {
        return Err(io_err(&metrics_path)(e));
    }
    let ckpt = r.out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&outcome.params, &r.model, &ckpt)?;
    let opts = r.file.eval.options(false);
    let eval = evaluate_detailed(&outcome.params, &ds, &split.test, &opts)?;
    print_json(&json!({
        "schema_version": SCHEMA_VERSION,
        "checkpoint": ckpt,
        "metrics": metrics_path,
        "best_epoch": outcome.best_epoch,
        "epochs_run": outcome.epochs_run,
        "valid_ndcg@10": outcome.best_valid_ndcg,
        "test": eval.report.to_json(),
    }));
    Ok(())
}

fn load_model(checkpoint: &Path, ds: &SequenceDataset) -> Result<(ModelParams, ModelConfig)> {
    let (params, cfg) = load_checkpoint(checkpoint)?;
    if params.num_items != ds.num_items() || params.max_len != ds.max_len {
        return Err(specsmooth::Error::IncompatibleCheckpoint(format!(
            "checkpoint has {} items and length {}, dataset has {} and {}",
            params.num_items,
            params.max_len,
            ds.num_items(),
            ds.max_len
        ))
        .into());
    }
    Ok((params, cfg))
}

fn write_spectra(
    eval: &specsmooth::eval::Evaluation,
    params: &ModelParams,
    out_dir: &Path,
) -> Result<Value> {
    let (item, seq) = eval.degeneration(params)?;
    ensure_dir(out_dir)?;
    let item_path = out_dir.join("spectrum_item.csv");
    let seq_path = out_dir.join("spectrum_seq.csv");
    std::fs::write(&item_path, item.to_csv()).map_err(io_err(&item_path))?;
    std::fs::write(&seq_path, seq.to_csv()).map_err(io_err(&seq_path))?;
    Ok(json!({
        "item": item_path,
        "seq": seq_path,
        "ausc_item": item.ausc,
        "ausc_seq": seq.ausc,
    }))
}

fn eval_options(config: Option<&PathBuf>) -> Result<EvalOptions> {
    let file = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    Ok(file.eval.options(false))
}

pub fn eval(a: EvalArgs) -> Result<()> {
    if a.spectrum_only {
        return spectrum(SpectrumArgs {
            data: a.data,
            checkpoint: a.checkpoint,
            out_dir: a.out_dir,
        });
    }
    let ds = read_bundle(&a.data)?;
    let (params, _) = load_model(&a.checkpoint, &ds)?;
    let split = split_leave_one_out(&ds);
    let mut opts = eval_options(a.config.as_ref())?;
    if let Some(k) = a.topk {
        opts.cutoffs = k;
    }
    opts.groups = a.groups;
    opts.mask_seen |= a.mask_seen;
    let examples = if a.valid { &split.valid } else { &split.test };
    let eval = evaluate_detailed(&params, &ds, examples, &opts)?;
    let mut report = eval.report.to_json();
    if a.spectrum {
        report["spectrum"] = write_spectra(&eval, &params, &a.out_dir)?;
    }
    if a.csv {
        print!("{}", eval.report.to_csv());
    } else {
        print_json(&report);
    }
    Ok(())
}

pub fn spectrum(a: SpectrumArgs) -> Result<()> {
    let ds = read_bundle(&a.data)?;
    let (params, _) = load_model(&a.checkpoint, &ds)?;
    let split = split_leave_one_out(&ds);
    let eval = evaluate_detailed(&params, &ds, &split.test, &EvalOptions::default())?;
    let mut v = write_spectra(&eval, &params, &a.out_dir)?;
    v["schema_version"] = json!(SCHEMA_VERSION);
    print_json(&v);
    Ok(())
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let mut r = resolve(&a.model, a.seed, None, None)?;
    let ds = load_dataset(&r.bundle, &mut r.model)?;
    let split = split_leave_one_out(&ds);
    let lambdas = a.lambdas.unwrap_or_else(|| r.file.sweep.lambdas.clone());
    let betas = a.betas.unwrap_or_else(|| r.file.sweep.betas.clone());
    ensure_dir(&r.out_dir)?;
    let path = a.output.unwrap_or_else(|| r.out_dir.join("sweep.csv"));
    let mut out = File::create(&path).map_err(io_err(&path))?;
    let opts = r.file.eval.options(false);
    let rows = experiment::sweep(
        &ds,
        &split,
        &r.model,
        &lambdas,
        &betas,
        &r.train,
        &opts,
        &mut out,
        |row| {
            eprintln!(
                "lambda {} beta {}: ndcg@10 {:.5} ild@10 {:.5}",
                row.lambda, row.beta, row.ndcg10, row.ild10
            )
        },
    )
    .map_err(|e| match e {
        specsmooth::Error::Io { source, .. } => io_err(&path)(source),
        other => other.into(),
    })?;
    print_json(&json!({
        "schema_version": SCHEMA_VERSION,
        "csv": path,
        "rows": rows,
    }));
    Ok(())
}

pub fn rerank(a: RerankArgs) -> Result<()> {
    let ds = read_bundle(&a.data)?;
    let (params, _) = load_model(&a.checkpoint, &ds)?;
    let split = split_leave_one_out(&ds);
    let mut summary = experiment::rerank(&params, &ds, &split.test, a.candidates, a.k)?;
    eprintln!(
        "ild@{} before {:.5}, after {:.5}",
        a.k, summary.ild_before, summary.ild_after
    );
    if !a.lists {
        summary.users.clear();
    }
    print_json(&serde_json::to_value(&summary).expect("json"));
    Ok(())
}
