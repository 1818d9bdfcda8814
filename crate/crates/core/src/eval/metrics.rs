use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::model::ModelParams;

/// Indices sorted by descending score; equal scores keep the lower index
/// first.
pub fn rank_scores(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// 1-based position of `target` in [`rank_scores`] order, without sorting.
pub fn target_rank(scores: &[f64], target: usize) -> usize {
    let s = scores[target];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, v)| v.total_cmp(&s).is_gt() || (j < target && v.total_cmp(&s).is_eq()))
        .count()
}

pub fn recall_at(rank: usize, n: usize) -> f64 {
    if rank >= 1 && rank <= n {
        1.0
    } else {
        0.0
    }
}

/// Single-relevant-item NDCG: `1 / log₂(rank + 1)` inside the cutoff.
pub fn ndcg_at(rank: usize, n: usize) -> f64 {
    if rank >= 1 && rank <= n {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

/// `1 - mean cosine similarity` over all ordered pairs of listed items,
/// self-pairs included.
pub fn intra_list_diversity(list: &[u32], params: &ModelParams) -> Result<f64> {
    if list.is_empty() {
        return Err(Error::InvalidInput("empty recommendation list".into()));
    }
    let d = params.dim;
    let mut sum = vec![0.0; d];
    for &v in list {
        let row = params.item_row(v);
        let r = norm(row);
        if r == 0.0 {
            return Err(Error::DegenerateMatrix(format!("item {v} has a zero embedding")));
        }
        for (s, x) in sum.iter_mut().zip(row) {
            *s += x / r;
        }
    }
    let n = list.len() as f64;
    Ok(1.0 - sum.iter().map(|s| s * s).sum::<f64>() / (n * n))
}

/// Number of distinct categories in `list`. Category `0` (unknown) counts as
/// one category.
pub fn coverage_at(list: &[u32], item_categories: &[u32]) -> usize {
    let mut cats: Vec<u32> = list.iter().map(|&v| item_categories[v as usize]).collect();
    cats.sort_unstable();
    cats.dedup();
    cats.len()
}
