//! Recommendation loss and the baseline embedding regularisers.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};

/// Per-score gradients of one sampled cross-entropy term.
#[derive(Debug, Clone, PartialEq)]
pub struct CeTerm {
    pub loss: f64,
    pub d_pos: f64,
    pub d_neg: Vec<f64>,
}

/// `-log(exp(s⁺) / (exp(s⁺) + Σ exp(s⁻)))`, evaluated with a max shift.
pub fn sampled_ce_loss(pos_score: f64, neg_scores: &[f64]) -> Result<f64> {
    sampled_ce_with_grad(pos_score, neg_scores).map(|t| t.loss)
}

pub fn sampled_ce_with_grad(pos_score: f64, neg_scores: &[f64]) -> Result<CeTerm> {
    if neg_scores.is_empty() {
        return Err(Error::InvalidInput("at least one negative score is required".into()));
    }
    if !pos_score.is_finite() || neg_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NumericalFailure("non-finite score in sampled loss".into()));
    }
    let max = neg_scores.iter().copied().fold(pos_score, f64::max);
    let e_pos = (pos_score - max).exp();
    let e_neg: Vec<f64> = neg_scores.iter().map(|s| (s - max).exp()).collect();
    let z = e_pos + e_neg.iter().sum::<f64>();
    Ok(CeTerm {
        loss: z.ln() - (pos_score - max),
        d_pos: e_pos / z - 1.0,
        d_neg: e_neg.iter().map(|e| e / z).collect(),
    })
}

/// Mean cosine similarity over all ordered pairs of rows, diagonal included.
pub fn cos_reg(m: &Matrix) -> Result<f64> {
    cos_reg_with_grad(m).map(|(v, _)| v)
}

pub fn cos_reg_with_grad(m: &Matrix) -> Result<(f64, Matrix)> {
    let (n, d) = m.shape();
    if n == 0 {
        return Err(Error::InvalidMatrix("no rows".into()));
    }
    let norms: Vec<f64> = (0..n).map(|i| norm(m.row(i))).collect();
    if let Some(i) = norms.iter().position(|&r| r == 0.0) {
        return Err(Error::DegenerateMatrix(format!("row {i} is zero")));
    }
    // Σᵢⱼ uᵢ·uⱼ = ‖Σᵢ uᵢ‖².
    let mut s = vec![0.0; d];
    for i in 0..n {
        for (acc, v) in s.iter_mut().zip(m.row(i)) {
            *acc += v / norms[i];
        }
    }
    let nn = (n * n) as f64;
    let value = dot(&s, &s) / nn;
    let grad = Matrix::from_fn(n, d, |i, j| {
        let r = norms[i];
        let proj = dot(m.row(i), &s) / r;
        2.0 / nn * (s[j] - proj * m[(i, j)] / r) / r
    });
    Ok((value, grad))
}

/// Negative mean Euclidean distance over all ordered pairs of rows.
pub fn euclid_reg(m: &Matrix) -> f64 {
    euclid_reg_with_grad(m).0
}

/// Pairs at zero distance contribute a zero subgradient.
pub fn euclid_reg_with_grad(m: &Matrix) -> (f64, Matrix) {
    let (n, d) = m.shape();
    if n == 0 {
        return (0.0, Matrix::zeros(0, d));
    }
    let nn = (n * n) as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; n * d];
    let mut diff = vec![0.0; d];
    for i in 0..n {
        for j in i + 1..n {
            for (k, slot) in diff.iter_mut().enumerate() {
                *slot = m[(i, k)] - m[(j, k)];
            }
            let dist = norm(&diff);
            total += 2.0 * dist;
            if dist > 0.0 {
                let c = -2.0 / (nn * dist);
                for k in 0..d {
                    grad[i * d + k] += c * diff[k];
                    grad[j * d + k] -= c * diff[k];
                }
            }
        }
    }
    (
        -total / nn,
        Matrix::from_vec(n, d, grad).expect("finite gradient"),
    )
}
