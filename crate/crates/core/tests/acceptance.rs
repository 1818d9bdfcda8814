//! Acceptance suite. Runs every criterion in order, prints one line per
//! criterion and exits non-zero if any of them fails.
//!
//! ```sh
//! cargo test --release -p specsmooth --test acceptance
//! ACCEPTANCE_ONLY=1,2,12 cargo test --release -p specsmooth --test acceptance
//! ```

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use specsmooth::data::{
    build_sequences, five_core_filter, generate_synthetic, pad_truncate, split_leave_one_out,
    write_bundle, SequenceDataset, Split, SplitExample, SynthConfig, MIN_USER_EVENTS, PAD,
};
use specsmooth::dpp::{det_after_add, gram_kernel, greedy_select, GreedySelection, KernelMatrix};
use specsmooth::eval::{encode_last, evaluate, rank_all_items, EvalOptions, EvalReport};
use specsmooth::experiment::{sweep, train_model, TrainOptions, SWEEP_HEADER};
use specsmooth::linalg::{ausc, smoothing_loss, smoothing_loss_grad, svd, Matrix};
use specsmooth::model::{forward, init_params, ModelConfig, Mode, Regularizer};

type Outcome = Result<String, String>;

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn orthonormality_error(q: &Matrix) -> f64 {
    let g = q.transpose().matmul(q);
    g.sub(&Matrix::identity(g.rows())).max_abs()
}

/// Determinant by Gaussian elimination with partial pivoting.
fn lu_det(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut m = a.clone();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[(i, c)].abs().total_cmp(&m[(j, c)].abs()))
            .unwrap();
        if m[(p, c)] == 0.0 {
            return 0.0;
        }
        if p != c {
            for j in 0..n {
                let t = m[(p, j)];
                m[(p, j)] = m[(c, j)];
                m[(c, j)] = t;
            }
            det = -det;
        }
        let pivot = m[(c, c)];
        det *= pivot;
        for i in c + 1..n {
            let f = m[(i, c)] / pivot;
            for j in c..n {
                m[(i, j)] -= f * m[(c, j)];
            }
        }
    }
    det
}

fn minor(k: &KernelMatrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(idx.len(), idx.len(), |a, b| k.get(idx[a], idx[b]))
}

fn random_kernel(n: usize, rng: &mut ChaCha8Rng) -> KernelMatrix {
    let f = gaussian(n, n + 4, rng).scale(1.0 / ((n + 4) as f64).sqrt());
    gram_kernel(&f).unwrap()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn svd_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut rec, mut orth) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let m = rng.random_range(1..=64);
        let n = rng.random_range(1..=64);
        let a = gaussian(m, n, &mut rng);
        let d = svd(&a).map_err(|e| e.to_string())?;
        rec = rec.max(d.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm());
        orth = orth.max(orthonormality_error(&d.u)).max(orthonormality_error(&d.v));
        check(d.sigma.windows(2).all(|w| w[0] >= w[1]), || {
            format!("{m}x{n}: singular values not descending")
        })?;
    }
    check(rec <= 1e-10 && orth <= 1e-10, || {
        format!("reconstruction {rec:.2e}, orthonormality {orth:.2e}")
    })?;
    Ok(format!("max reconstruction {rec:.1e}, max orthonormality {orth:.1e}"))
}

fn logdet_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=16);
        let m = n + rng.random_range(0..=16);
        let a = gaussian(m, n, &mut rng);
        let (by_factor, by_spectrum) =
            specsmooth::dpp::logdet_vs_spectrum(&a).map_err(|e| e.to_string())?;
        // Oracle: determinant of the Gram matrix by elimination.
        let direct = lu_det(&a.gram_cols()).ln();
        worst = worst
            .max((by_factor - by_spectrum).abs())
            .max((direct - by_spectrum).abs());
    }
    check(worst <= 1e-8, || format!("max gap {worst:.2e}"))?;
    Ok(format!("max gap {worst:.1e}"))
}

fn central_difference(a: &Matrix, h: f64) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| {
        let mut p = a.clone();
        p[(i, j)] += h;
        let mut q = a.clone();
        q[(i, j)] -= h;
        (smoothing_loss(&p).unwrap() - smoothing_loss(&q).unwrap()) / (2.0 * h)
    })
}

fn smoothing_gradient() -> Outcome {
    let g = smoothing_loss_grad(&Matrix::from_diag(&[3.0, 4.0])).map_err(|e| e.to_string())?;
    let want = Matrix::from_diag(&[-0.032, 0.024]);
    check(g.sub(&want).max_abs() <= 1e-12, || format!("diag(3,4) gave {g:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 20 {
        let a = gaussian(8, 5, &mut rng);
        let sigma = svd(&a).unwrap().sigma;
        if sigma.windows(2).any(|w| w[0] - w[1] < 1e-2) {
            continue;
        }
        let g = smoothing_loss_grad(&a).map_err(|e| e.to_string())?;
        let fd = central_difference(&a, 1e-5);
        worst = worst.max(g.sub(&fd).frobenius_norm() / fd.frobenius_norm());
        done += 1;
    }
    check(worst <= 1e-4, || format!("max relative error {worst:.2e}"))?;
    Ok(format!("diag(3,4) exact, max relative error {worst:.1e}"))
}

fn ausc_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    for i in 0..1000 {
        let m = rng.random_range(1..=20);
        let n = rng.random_range(1..=20);
        let mut a = gaussian(m, n, &mut rng);
        // Every third matrix gets a steeply decaying spectrum.
        if i % 3 == 0 {
            a = Matrix::from_fn(m, n, |r, c| a[(r, c)] * 0.3f64.powi(c as i32));
        }
        let lhs = -smoothing_loss(&a).map_err(|e| e.to_string())?;
        let rhs = ausc(&a).map_err(|e| e.to_string())?;
        if lhs > rhs * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    check(violations == 0, || format!("{violations} violations"))?;
    Ok("0 violations in 1000 matrices".into())
}

fn determinant_lemma() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let k = random_kernel(12, &mut rng);
    let mut worst = 0.0f64;
    let mut checks = 0usize;
    for mask in 0u32..(1 << 12) {
        let idx: Vec<usize> = (0..12).filter(|i| mask & (1 << i) != 0).collect();
        let sel = GreedySelection::from_indices(&k, &idx).map_err(|e| e.to_string())?;
        for j in (0..12).filter(|j| mask & (1 << j) == 0) {
            let fast = det_after_add(&k, &sel, j).map_err(|e| e.to_string())?;
            let mut all = idx.clone();
            all.push(j);
            let direct = lu_det(&minor(&k, &all));
            worst = worst.max((fast - direct).abs() / direct.abs().max(1.0));
            checks += 1;
        }
    }
    check(worst <= 1e-9, || format!("max gap {worst:.2e}"))?;

    let mut pools = 0;
    for n in 2..=10 {
        for _ in 0..5 {
            let k = random_kernel(n, &mut rng);
            let greedy = greedy_select(&k, n).map_err(|e| e.to_string())?;
            let mut chosen: Vec<usize> = Vec::new();
            while chosen.len() < n {
                let mut best: Option<(usize, f64)> = None;
                for j in (0..n).filter(|j| !chosen.contains(j)) {
                    let mut all = chosen.clone();
                    all.push(j);
                    let det = lu_det(&minor(&k, &all));
                    if best.is_none_or(|(_, b)| det > b) {
                        best = Some((j, det));
                    }
                }
                chosen.push(best.unwrap().0);
            }
            check(greedy.selected == chosen, || {
                format!("pool {n}: greedy {:?}, exhaustive {chosen:?}", greedy.selected)
            })?;
            pools += 1;
        }
    }
    Ok(format!(
        "{checks} additions within {worst:.1e}; {pools} pools match exhaustive argmax"
    ))
}

fn full_model_gradient() -> Outcome {
    let (name, err) = common::worst_relative_error(&common::tiny_cfg(Regularizer::Smoothing), 5);
    check(err <= 1e-3, || format!("{name}: {err:.2e}"))?;
    Ok(format!("worst tensor {name} at {err:.1e}"))
}

fn causality() -> Outcome {
    let cfg = ModelConfig {
        dim: 16,
        max_len: 12,
        num_layers: 2,
        num_heads: 2,
        ..ModelConfig::default()
    };
    let items = 40;
    let params = init_params(&cfg, items, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let batch: Vec<Vec<u32>> = (0..4)
            .map(|_| {
                let pad = rng.random_range(0..cfg.max_len);
                (0..cfg.max_len)
                    .map(|t| if t < pad { PAD } else { rng.random_range(1..=items as u32) })
                    .collect()
            })
            .collect();
        let t = rng.random_range(0..cfg.max_len - 1);
        let mut changed = batch.clone();
        for seq in &mut changed {
            for v in &mut seq[t + 1..] {
                *v = rng.random_range(1..=items as u32);
            }
        }
        let a = forward(&params, &batch, Mode::Eval).map_err(|e| e.to_string())?;
        let b = forward(&params, &changed, Mode::Eval).map_err(|e| e.to_string())?;
        for s in 0..batch.len() {
            for p in 0..=t {
                check(a.h_at(s, p) == b.h_at(s, p), || {
                    format!("position {p} moved after changing positions > {t}")
                })?;
            }
        }
    }
    Ok("50 batches, outputs bit-identical".into())
}

fn ranking_oracle() -> Outcome {
    let cfg = ModelConfig {
        dim: 8,
        max_len: 6,
        num_layers: 1,
        ..ModelConfig::default()
    };
    let items = 100;
    let mut params = init_params(&cfg, items, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // Items 51..=100 copy items 1..=50 so that tied scores actually occur.
    let d = cfg.dim;
    let (head, tail) = params.item_emb.data.split_at_mut(51 * d);
    tail.copy_from_slice(&head[d..]);
    let examples: Vec<SplitExample> = (0..50)
        .map(|user| {
            let seq: Vec<u32> = (0..rng.random_range(1..=6))
                .map(|_| rng.random_range(1..=items as u32))
                .collect();
            SplitExample {
                user,
                input: pad_truncate(&seq, cfg.max_len),
                target: rng.random_range(1..=items as u32),
                role: specsmooth::data::Role::Test,
            }
        })
        .collect();
    let inputs: Vec<Vec<u32>> = examples.iter().map(|e| e.input.clone()).collect();
    let h = encode_last(&params, &inputs).map_err(|e| e.to_string())?;
    let opts = EvalOptions::default();
    let ranked = rank_all_items(&params, &examples, &h, &opts);
    let mut ties = 0;
    for (i, (ex, r)) in examples.iter().zip(&ranked).enumerate() {
        let scores: Vec<f64> = (1..=items as u32)
            .map(|v| {
                let row = params.item_row(v);
                h.row(i).iter().zip(row).map(|(a, b)| a * b).sum()
            })
            .collect();
        let t = ex.target as usize - 1;
        let ahead = (0..items)
            .filter(|&j| scores[j] > scores[t] || (scores[j] == scores[t] && j < t))
            .count();
        ties += (0..items).filter(|&j| j != t && scores[j] == scores[t]).count();
        check(r.rank == ahead + 1, || {
            format!("user {i}: rank {} vs brute force {}", r.rank, ahead + 1)
        })?;
        for n in [5, 10, 40] {
            let hit = ahead < n;
            let recall = if hit { 1.0 } else { 0.0 };
            let ndcg = if hit { 1.0 / ((ahead + 2) as f64).log2() } else { 0.0 };
            check(
                specsmooth::eval::recall_at(r.rank, n) == recall
                    && specsmooth::eval::ndcg_at(r.rank, n) == ndcg,
                || format!("user {i}: metrics at {n} disagree"),
            )?;
        }
    }
    Ok(format!("50 users x 100 items exact ({ties} tied scores)"))
}

/// The synthetic setup shared by the trend criteria.
struct TrendSetup {
    ds: SequenceDataset,
    split: Split,
    base: ModelConfig,
    opts: TrainOptions,
}

const TREND_MAX_LEN: usize = 20;
const TREND_BETAS: [f64; 4] = [0.0, 1e-5, 1e-4, 1e-3];
const TREND_LARGE_BETA: f64 = 1e-1;

fn trend_setup() -> TrendSetup {
    let log = generate_synthetic(&SynthConfig::default()).expect("synthetic log");
    let ds = build_sequences(&five_core_filter(log.events).expect("5-core"), TREND_MAX_LEN);
    let split = split_leave_one_out(&ds);
    let base = ModelConfig {
        dim: 32,
        max_len: TREND_MAX_LEN,
        num_layers: 1,
        num_heads: 1,
        dropout: 0.2,
        lambda: 0.01,
        learning_rate: 1e-3,
        batch_size: 128,
        seed: 7,
        ..ModelConfig::default()
    };
    let opts = TrainOptions {
        epochs: 40,
        patience: 40,
        eval_every: 40,
    };
    TrendSetup {
        ds,
        split,
        base,
        opts,
    }
}

struct TrendRun {
    beta: f64,
    valid_ndcg: f64,
    report: EvalReport,
}

fn run_trend(setup: &TrendSetup) -> specsmooth::Result<Vec<TrendRun>> {
    let mut runs = Vec::new();
    for beta in TREND_BETAS.iter().copied().chain([TREND_LARGE_BETA]) {
        let cfg = ModelConfig {
            beta,
            ..setup.base.clone()
        };
        let out = train_model(&setup.ds, &setup.split, &cfg, &setup.opts, |_, _| {})?;
        let report = evaluate(&out.params, &setup.ds, &setup.split.test, &EvalOptions::default())?;
        println!(
            "    beta {beta:<7} ndcg@10 {:.5}  ild@10 {:.5}  ausc_item {:.3}  ausc_seq {:.3}",
            report.ndcg(10).unwrap(),
            report.ild,
            report.ausc_item,
            report.ausc_seq
        );
        runs.push(TrendRun {
            beta,
            valid_ndcg: out.best_valid_ndcg,
            report,
        });
    }
    Ok(runs)
}

fn diversity_trend(runs: &[TrendRun]) -> Outcome {
    let grid = &runs[..TREND_BETAS.len()];
    let base = runs[0].report.ndcg(10).unwrap();
    let ild: Vec<f64> = grid.iter().map(|r| r.report.ild).collect();
    check(ild.windows(2).all(|w| w[1] > w[0]), || {
        format!("ild@10 not strictly increasing: {ild:?}")
    })?;
    let balanced = grid[1..]
        .iter()
        .filter(|r| r.report.ndcg(10).unwrap() >= 0.95 * base)
        .count();
    check(balanced > 0, || "no beta > 0 keeps 95% of baseline ndcg@10".into())?;
    let large = runs.last().unwrap();
    let large_ndcg = large.report.ndcg(10).unwrap();
    check(large_ndcg < base, || {
        format!(
            "beta {} ndcg@10 {large_ndcg:.5} is not below baseline {base:.5}",
            large.beta
        )
    })?;
    Ok(format!(
        "ild@10 {:.4} -> {:.4}; {balanced} balanced points; beta {} ndcg@10 {large_ndcg:.4} < {base:.4}",
        ild[0],
        ild[ild.len() - 1],
        large.beta
    ))
}

fn spectrum_trend(runs: &[TrendRun]) -> Outcome {
    let base = &runs[0].report;
    // Best grid point by validation accuracy, so the test split stays unseen.
    let best = runs[1..TREND_BETAS.len()]
        .iter()
        .max_by(|a, b| a.valid_ndcg.total_cmp(&b.valid_ndcg))
        .unwrap();
    let gain_item = best.report.ausc_item / base.ausc_item - 1.0;
    let gain_seq = best.report.ausc_seq / base.ausc_seq - 1.0;
    let peak_seq = runs[1..TREND_BETAS.len()]
        .iter()
        .map(|r| r.report.ausc_seq / base.ausc_seq - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let msg = format!(
        "best beta {}: ausc(M) {:+.1}%, ausc(H) {:+.1}% (grid peak ausc(H) {:+.1}%)",
        best.beta,
        100.0 * gain_item,
        100.0 * gain_seq,
        100.0 * peak_seq
    );
    check(gain_item >= 0.10 && gain_seq >= 0.10, || msg.clone())?;
    Ok(msg)
}

fn baseline_regularizers(setup: &TrendSetup) -> Outcome {
    let opts = TrainOptions {
        epochs: 10,
        patience: 10,
        eval_every: 5,
    };
    let mut rows = 0;
    for reg in [Regularizer::Cosine, Regularizer::Euclidean] {
        let base = ModelConfig {
            regularizer: reg,
            ..setup.base.clone()
        };
        let mut out = Vec::new();
        let table = sweep(
            &setup.ds,
            &setup.split,
            &base,
            &[0.1],
            &[1e-3],
            &opts,
            &EvalOptions::default(),
            &mut out,
            |_| {},
        )
        .map_err(|e| format!("{reg:?}: {e}"))?;
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        check(lines.next() == Some(SWEEP_HEADER), || format!("{reg:?}: bad header"))?;
        check(lines.count() == table.len(), || format!("{reg:?}: row count"))?;
        for r in &table {
            check(
                [r.ndcg10, r.ild10, r.ausc_item, r.ausc_seq].iter().all(|v| v.is_finite()),
                || format!("{reg:?}: non-finite row {r:?}"),
            )?;
        }
        rows += table.len();
    }
    Ok(format!("cosine and euclidean filled {rows} sweep rows"))
}

fn data_protocol() -> Outcome {
    let cfg = SynthConfig::default();
    let log = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
    let filtered = five_core_filter(log.events.clone()).map_err(|e| e.to_string())?;
    let ds = build_sequences(&filtered, 50);
    let short = ds.sequences.iter().filter(|s| s.len() < MIN_USER_EVENTS).count();
    check(short == 0, || format!("{short} users below {MIN_USER_EVENTS} events"))?;
    let split = split_leave_one_out(&ds);
    check(
        split.test.len() == ds.num_users() && split.valid.len() == ds.num_users(),
        || {
            format!(
                "{} users, {} test, {} valid",
                ds.num_users(),
                split.test.len(),
                split.valid.len()
            )
        },
    )?;
    check(
        pad_truncate(&[1, 2, 3], 5) == [0, 0, 1, 2, 3]
            && pad_truncate(&[1, 2, 3, 4, 5, 6, 7], 5) == [3, 4, 5, 6, 7]
            && pad_truncate(&[4, 5], 2) == [4, 5],
        || "pad_truncate examples".into(),
    )?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for name in ["a.ssqb", "b.ssqb"] {
        let log = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
        let ds = build_sequences(&five_core_filter(log.events).map_err(|e| e.to_string())?, 50);
        let path = dir.path().join(name);
        write_bundle(&ds, &path).map_err(|e| e.to_string())?;
        bytes.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    check(bytes[0] == bytes[1], || "bundles differ".into())?;
    Ok(format!(
        "{} users all >= {MIN_USER_EVENTS} events, splits match, bundles identical",
        ds.num_users()
    ))
}

fn determinism() -> Outcome {
    let cfg = SynthConfig {
        num_users: 400,
        num_items: 120,
        ..SynthConfig::default()
    };
    let log = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
    let ds = build_sequences(&five_core_filter(log.events).map_err(|e| e.to_string())?, 15);
    let split = split_leave_one_out(&ds);
    let model = ModelConfig {
        dim: 16,
        max_len: 15,
        num_layers: 2,
        num_heads: 2,
        lambda: 0.1,
        beta: 1e-3,
        batch_size: 64,
        seed: 11,
        ..ModelConfig::default()
    };
    let opts = TrainOptions {
        epochs: 4,
        patience: 4,
        eval_every: 2,
    };
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let out = train_model(&ds, &split, &model, &opts, |_, _| {}).map_err(|e| e.to_string())?;
        let report = evaluate(&out.params, &ds, &split.test, &EvalOptions::default())
            .map_err(|e| e.to_string())?;
        let losses: Vec<[f64; 4]> = out
            .history
            .iter()
            .map(|m| [m.rec, m.seq, m.item, m.total])
            .collect();
        outputs.push((report.to_json().to_string(), format!("{losses:?}")));
    }
    check(outputs[0] == outputs[1], || "metrics differ between runs".into())?;
    Ok(format!("{} bytes of metrics JSON identical", outputs[0].0.len()))
}

/// Criteria selected through `ACCEPTANCE_ONLY`, all when unset.
fn selected() -> impl Fn(usize) -> bool {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    move |id| only.as_ref().is_none_or(|o| o.contains(&id))
}

fn main() {
    let started = Instant::now();
    let wanted = selected();
    let mut results: Vec<(usize, &str, Duration, Duration, Outcome)> = Vec::new();
    let mut run = |id: usize, name: &'static str, limit_s: u64, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(id) {
            return;
        }
        let t = Instant::now();
        let out = f();
        let elapsed = t.elapsed();
        let line = (id, name, elapsed, Duration::from_secs(limit_s), out);
        report(&line);
        results.push(line);
    };

    run(1, "svd correctness", 10, &mut svd_correctness);
    run(2, "log-det identity", 5, &mut logdet_identity);
    run(3, "smoothing loss gradient", 5, &mut smoothing_gradient);
    run(4, "ausc lower bound", 5, &mut ausc_bound);
    run(5, "determinant lemma and greedy", 30, &mut determinant_lemma);
    run(6, "full-model gradient", 120, &mut full_model_gradient);
    run(7, "causality", 10, &mut causality);
    run(8, "ranking-metric oracle", 5, &mut ranking_oracle);

    let setup = trend_setup();
    let trend_wanted = wanted(9) || wanted(10);
    let t = Instant::now();
    let runs = if trend_wanted { run_trend(&setup) } else { Ok(Vec::new()) };
    let trend_time = t.elapsed();
    let trend_limit = Duration::from_secs(15 * 60);
    for (id, name, f) in [
        (9, "diversity trend over beta", diversity_trend as fn(&[TrendRun]) -> Outcome),
        (10, "spectrum trend over beta", spectrum_trend),
    ] {
        if !wanted(id) {
            continue;
        }
        let out = match &runs {
            Ok(r) => f(r),
            Err(e) => Err(format!("training failed: {e}")),
        };
        let line = (id, name, trend_time, trend_limit, out);
        report(&line);
        results.push(line);
    }

    let mut run = |id: usize, name: &'static str, limit_s: u64, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(id) {
            return;
        }
        let t = Instant::now();
        let out = f();
        let line = (id, name, t.elapsed(), Duration::from_secs(limit_s), out);
        report(&line);
        results.push(line);
    };
    run(11, "baseline regularizers", 600, &mut || baseline_regularizers(&setup));
    run(12, "data protocol", 5, &mut data_protocol);
    run(13, "determinism", 300, &mut determinism);

    let failed = results.iter().filter(|r| !passed(r)).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn passed(r: &(usize, &str, Duration, Duration, Outcome)) -> bool {
    r.4.is_ok() && r.2 <= r.3
}

fn report(r: &(usize, &str, Duration, Duration, Outcome)) {
    let (id, name, elapsed, limit, out) = r;
    let status = if passed(r) { "PASS" } else { "FAIL" };
    let detail = match out {
        Ok(s) => s.clone(),
        Err(s) => s.clone(),
    };
    let slow = if elapsed > limit {
        format!(" over the {}s limit", limit.as_secs())
    } else {
        String::new()
    };
    println!(
        "[{status}] {id:>2} {name} ({:.1}s{slow}): {detail}",
        elapsed.as_secs_f64()
    );
}
