//! All-items ranking evaluation, diversity metrics and degeneration reports.

mod metrics;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::data::{SequenceDataset, SplitExample};
use crate::error::{Error, Result};
use crate::linalg::{spectrum_report, Matrix, SpectrumReport};
use crate::model::{forward, score_all, ModelParams, Mode};

pub use metrics::{coverage_at, intra_list_diversity, ndcg_at, rank_scores, recall_at, target_rank};

pub const ILD_CUTOFF: usize = 10;
pub const COVERAGE_CUTOFF: usize = 100;

/// Sequences encoded per forward call during evaluation.
const ENCODE_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub cutoffs: Vec<usize>,
    /// Exclude items already in the user's input from the ranking (the
    /// target itself is never excluded).
    pub mask_seen: bool,
    /// Upper bounds of the training-length buckets; a final open bucket
    /// holds everything above the last bound.
    pub length_buckets: Vec<usize>,
    /// Upper bounds of the target-popularity buckets.
    pub popularity_buckets: Vec<usize>,
    pub groups: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            cutoffs: vec![5, 10, 40],
            mask_seen: false,
            length_buckets: vec![5, 10, 20],
            popularity_buckets: vec![5, 20, 100],
            groups: false,
        }
    }
}

/// Ranking outcome for one held-out example.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedUser {
    pub user: usize,
    pub target: u32,
    /// 1-based rank of the target among all items.
    pub rank: usize,
    /// Best items first, at least `COVERAGE_CUTOFF` long when the catalogue
    /// allows it.
    pub top: Vec<u32>,
}

/// Final-position encoder outputs for `inputs`, one row per sequence.
pub fn encode_last(params: &ModelParams, inputs: &[Vec<u32>]) -> Result<Matrix> {
    let d = params.dim;
    let mut data = Vec::with_capacity(inputs.len() * d);
    for chunk in inputs.chunks(ENCODE_CHUNK) {
        let h = forward(params, chunk, Mode::Eval)?.h_last();
        data.extend_from_slice(h.as_slice());
    }
    Matrix::from_vec(inputs.len(), d, data)
        .map_err(|_| Error::NumericalFailure("encoder produced non-finite outputs".into()))
}

/// Scores every item for every example and records the target rank and the
/// top of the list.
pub fn rank_all_items(
    params: &ModelParams,
    examples: &[SplitExample],
    h: &Matrix,
    opts: &EvalOptions,
) -> Vec<RankedUser> {
    let keep = opts
        .cutoffs
        .iter()
        .copied()
        .chain([ILD_CUTOFF, COVERAGE_CUTOFF])
        .max()
        .unwrap_or(COVERAGE_CUTOFF);
    examples
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let mut scores = score_all(h.row(i), params);
            if opts.mask_seen {
                for &v in &ex.input {
                    if v != 0 && v != ex.target {
                        scores[v as usize - 1] = f64::NEG_INFINITY;
                    }
                }
            }
            let t = ex.target as usize - 1;
            RankedUser {
                user: ex.user,
                target: ex.target,
                rank: target_rank(&scores, t),
                top: rank_scores(&scores)
                    .into_iter()
                    .take(keep)
                    .map(|j| j as u32 + 1)
                    .collect(),
            }
        })
        .collect()
}

/// Accuracy metrics averaged over one set of users.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetrics {
    pub label: String,
    pub users: usize,
    pub recall: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
}

impl GroupMetrics {
    fn of(label: String, ranks: &[usize], cutoffs: &[usize]) -> Self {
        let n = ranks.len().max(1) as f64;
        let mean = |f: fn(usize, usize) -> f64, c: usize| {
            ranks.iter().map(|&r| f(r, c)).sum::<f64>() / n
        };
        GroupMetrics {
            label,
            users: ranks.len(),
            recall: cutoffs.iter().map(|&c| (c, mean(recall_at, c))).collect(),
            ndcg: cutoffs.iter().map(|&c| (c, mean(ndcg_at, c))).collect(),
        }
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("users".into(), json!(self.users));
        for (c, v) in &self.recall {
            m.insert(format!("recall@{c}"), json!(v));
        }
        for (c, v) in &self.ndcg {
            m.insert(format!("ndcg@{c}"), json!(v));
        }
        Value::Object(m)
    }
}

fn bucket_labels(bounds: &[usize]) -> Vec<String> {
    let mut labels = Vec::with_capacity(bounds.len() + 1);
    let mut lo = 0usize;
    for (i, &b) in bounds.iter().enumerate() {
        labels.push(if i == 0 {
            format!("<={b}")
        } else {
            format!("{}-{b}", lo + 1)
        });
        lo = b;
    }
    labels.push(match bounds.last() {
        Some(&b) => format!(">{b}"),
        None => "all".to_owned(),
    });
    labels
}

/// Index of the first bound `>= v`, or the open final bucket.
pub fn bucket_of(v: usize, bounds: &[usize]) -> usize {
    bounds.iter().position(|&b| v <= b).unwrap_or(bounds.len())
}

/// Per-bucket metrics for users keyed by `key`; empty buckets are kept with
/// zero users.
pub fn group_metrics(
    ranked: &[RankedUser],
    key: impl Fn(&RankedUser) -> usize,
    bounds: &[usize],
    cutoffs: &[usize],
) -> Vec<GroupMetrics> {
    let labels = bucket_labels(bounds);
    let mut ranks: Vec<Vec<usize>> = vec![Vec::new(); labels.len()];
    for r in ranked {
        ranks[bucket_of(key(r), bounds)].push(r.rank);
    }
    labels
        .into_iter()
        .zip(ranks)
        .map(|(l, r)| GroupMetrics::of(l, &r, cutoffs))
        .collect()
}

/// Buckets by the number of training interactions of each user.
pub fn group_by_length(
    ranked: &[RankedUser],
    ds: &SequenceDataset,
    bounds: &[usize],
    cutoffs: &[usize],
) -> Vec<GroupMetrics> {
    group_metrics(ranked, |r| ds.train_len(r.user), bounds, cutoffs)
}

/// Buckets by the training popularity of each target item.
pub fn group_by_popularity(
    ranked: &[RankedUser],
    ds: &SequenceDataset,
    bounds: &[usize],
    cutoffs: &[usize],
) -> Vec<GroupMetrics> {
    group_metrics(
        ranked,
        |r| ds.item_popularity[r.target as usize] as usize,
        bounds,
        cutoffs,
    )
}

/// Spectra of the item table and of a set of sequence representations.
pub fn degeneration_report(
    params: &ModelParams,
    h: &Matrix,
) -> Result<(SpectrumReport, SpectrumReport)> {
    if h.rows() < params.dim {
        return Err(Error::InvalidInput(format!(
            "need at least {} sequence vectors, got {}",
            params.dim,
            h.rows()
        )));
    }
    Ok((spectrum_report(&params.active_items())?, spectrum_report(h)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub users: usize,
    pub overall: GroupMetrics,
    pub ild: f64,
    pub coverage: f64,
    pub ausc_item: f64,
    pub ausc_seq: f64,
    pub length_groups: Option<Vec<GroupMetrics>>,
    pub popularity_groups: Option<Vec<GroupMetrics>>,
}

impl EvalReport {
    pub fn recall(&self, n: usize) -> Option<f64> {
        self.overall.recall.get(&n).copied()
    }

    pub fn ndcg(&self, n: usize) -> Option<f64> {
        self.overall.ndcg.get(&n).copied()
    }

    /// Flat keys (`recall@10`, `ild@10`, ...) plus nested `groups`.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("schema_version".into(), json!(crate::SCHEMA_VERSION));
        m.insert("users".into(), json!(self.users));
        for (c, v) in &self.overall.recall {
            m.insert(format!("recall@{c}"), json!(v));
        }
        for (c, v) in &self.overall.ndcg {
            m.insert(format!("ndcg@{c}"), json!(v));
        }
        m.insert(format!("ild@{ILD_CUTOFF}"), json!(self.ild));
        m.insert(format!("cov@{COVERAGE_CUTOFF}"), json!(self.coverage));
        m.insert("ausc_item".into(), json!(self.ausc_item));
        m.insert("ausc_seq".into(), json!(self.ausc_seq));
        if self.length_groups.is_some() || self.popularity_groups.is_some() {
            let table = |g: &Option<Vec<GroupMetrics>>| {
                let mut t = Map::new();
                for row in g.iter().flatten() {
                    t.insert(row.label.clone(), row.to_json());
                }
                Value::Object(t)
            };
            m.insert(
                "groups".into(),
                json!({
                    "length": table(&self.length_groups),
                    "popularity": table(&self.popularity_groups),
                }),
            );
        }
        Value::Object(m)
    }

    /// `metric,value` rows, with group metrics flattened to dotted keys.
    pub fn to_csv(&self) -> String {
        let mut rows = Vec::new();
        flatten("", &self.to_json(), &mut rows);
        let mut out = String::from("metric,value\n");
        for (k, v) in rows {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_owned(), other.to_string())),
    }
}

/// Everything computed during one evaluation pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub ranked: Vec<RankedUser>,
    /// Final-position outputs of the evaluated inputs.
    pub h: Matrix,
}

impl Evaluation {
    pub fn degeneration(&self, params: &ModelParams) -> Result<(SpectrumReport, SpectrumReport)> {
        degeneration_report(params, &self.h)
    }
}

/// Ranks all items for each example and aggregates the report.
pub fn evaluate_detailed(
    params: &ModelParams,
    ds: &SequenceDataset,
    examples: &[SplitExample],
    opts: &EvalOptions,
) -> Result<Evaluation> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset("splitting (no evaluation users)".into()));
    }
    if opts.cutoffs.is_empty() || opts.cutoffs.contains(&0) {
        return Err(Error::InvalidInput("cutoffs must be positive".into()));
    }
    let inputs: Vec<Vec<u32>> = examples.iter().map(|e| e.input.clone()).collect();
    let h = encode_last(params, &inputs)?;
    let ranked = rank_all_items(params, examples, &h, opts);
    let ranks: Vec<usize> = ranked.iter().map(|r| r.rank).collect();
    let overall = GroupMetrics::of("all".into(), &ranks, &opts.cutoffs);

    let n = ranked.len() as f64;
    let ild_each = ranked
        .iter()
        .map(|r| intra_list_diversity(&r.top[..r.top.len().min(ILD_CUTOFF)], params))
        .collect::<Result<Vec<f64>>>()?;
    let ild = ild_each.iter().sum::<f64>() / n;
    let coverage = ranked
        .iter()
        .map(|r| coverage_at(&r.top[..r.top.len().min(COVERAGE_CUTOFF)], &ds.item_categories) as f64)
        .sum::<f64>()
        / n;

    let ausc_item = spectrum_report(&params.active_items())?.ausc;
    let ausc_seq = spectrum_report(&h)?.ausc;
    let (length_groups, popularity_groups) = if opts.groups {
        (
            Some(group_by_length(&ranked, ds, &opts.length_buckets, &opts.cutoffs)),
            Some(group_by_popularity(&ranked, ds, &opts.popularity_buckets, &opts.cutoffs)),
        )
    } else {
        (None, None)
    };
    Ok(Evaluation {
        report: EvalReport {
            users: ranked.len(),
            overall,
            ild,
            coverage,
            ausc_item,
            ausc_seq,
            length_groups,
            popularity_groups,
        },
        ranked,
        h,
    })
}

pub fn evaluate(
    params: &ModelParams,
    ds: &SequenceDataset,
    examples: &[SplitExample],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    Ok(evaluate_detailed(params, ds, examples, opts)?.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_labels_and_lookup() {
        assert_eq!(bucket_labels(&[5, 10, 20]), vec!["<=5", "6-10", "11-20", ">20"]);
        assert_eq!(bucket_of(0, &[5, 20]), 0);
        assert_eq!(bucket_of(6, &[5, 20]), 1);
        assert_eq!(bucket_of(21, &[5, 20]), 2);
        assert_eq!(bucket_labels(&[]), vec!["all"]);
    }

    #[test]
    fn group_weighted_mean_matches_global() {
        let ranked: Vec<RankedUser> = (0..37)
            .map(|u| RankedUser {
                user: u,
                target: 1,
                rank: (u * 7) % 23 + 1,
                top: vec![],
            })
            .collect();
        let cutoffs = [5, 10];
        let groups = group_metrics(&ranked, |r| r.user % 13, &[2, 6], &cutoffs);
        let ranks: Vec<usize> = ranked.iter().map(|r| r.rank).collect();
        let all = GroupMetrics::of("all".into(), &ranks, &cutoffs);
        for c in cutoffs {
            let weighted: f64 = groups
                .iter()
                .map(|g| g.ndcg[&c] * g.users as f64)
                .sum::<f64>()
                / 37.0;
            assert!((weighted - all.ndcg[&c]).abs() < 1e-12);
        }
        assert_eq!(groups.iter().map(|g| g.users).sum::<usize>(), 37);
    }
}
