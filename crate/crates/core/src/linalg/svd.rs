//! One-sided (Hestenes) Jacobi SVD.
//!
//! Column pairs of a working copy of the input are rotated until every pair
//! is orthogonal to within `CONVERGENCE_TOL` in cosine terms. The column
//! norms are then the singular values, the normalised columns the left
//! singular vectors and the accumulated rotations the right singular
//! vectors. Wide inputs are handled by decomposing the transpose.

use crate::error::{Error, Result};
use crate::linalg::matrix::Matrix;

/// Pairwise cosine below which two columns count as orthogonal.
pub const CONVERGENCE_TOL: f64 = 1e-12;
/// Maximum number of full sweeps over all column pairs.
pub const MAX_SWEEPS: usize = 80;

/// Thin SVD `a = u · diag(sigma) · vᵀ` with `sigma` descending.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `m × k` with orthonormal columns.
    pub u: Matrix,
    /// `k = min(m, n)` singular values, descending, non-negative.
    pub sigma: Vec<f64>,
    /// `n × k` with orthonormal columns.
    pub v: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let k = self.sigma.len();
        let us = Matrix::from_fn(self.u.rows(), k, |i, j| self.u[(i, j)] * self.sigma[j]);
        us.matmul(&self.v.transpose())
    }

    /// `u · vᵀ`, the polar factor. Directions whose singular value is at most
    /// `rel_tol · sigma[0]` are left out.
    pub fn polar_factor(&self, rel_tol: f64) -> Matrix {
        let (m, n) = (self.u.rows(), self.v.rows());
        let cutoff = self.sigma.first().copied().unwrap_or(0.0) * rel_tol;
        let mut out = Matrix::zeros(m, n);
        for (t, &s) in self.sigma.iter().enumerate() {
            if s <= cutoff {
                continue;
            }
            for i in 0..m {
                let ui = self.u[(i, t)];
                if ui == 0.0 {
                    continue;
                }
                let row = out.row_mut(i);
                for (j, r) in row.iter_mut().enumerate() {
                    *r += ui * self.v[(j, t)];
                }
            }
        }
        out
    }
}

/// Thin singular value decomposition.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(Error::InvalidMatrix("svd input has non-finite entries".into()));
    }
    if a.rows() >= a.cols() {
        jacobi_tall(a)
    } else {
        let t = jacobi_tall(&a.transpose())?;
        Ok(SvdResult {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

/// Singular values only, descending.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    Ok(svd(a)?.sigma)
}

fn jacobi_tall(a: &Matrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);

    // Column-major working copies so each rotation touches contiguous memory.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let mut sq: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
    // Columns below rounding level relative to the whole matrix are null;
    // rotating them against each other only chases noise.
    let total: f64 = sq.iter().sum();
    let negligible = total * (f64::EPSILON * m as f64).powi(2);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = sq[p];
                let beta = sq[q];
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= CONVERGENCE_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;

                let (left, right) = cols.split_at_mut(q);
                rotate(&mut left[p], &mut right[0], c, s);
                let (vl, vr) = vcols.split_at_mut(q);
                rotate(&mut vl[p], &mut vr[0], c, s);

                // Recompute rather than update so rounding cannot drift.
                sq[p] = cols[p].iter().map(|x| x * x).sum();
                sq[q] = cols[q].iter().map(|x| x * x).sum();
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "jacobi svd did not converge within {MAX_SWEEPS} sweeps on a {m}x{n} input"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sig: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();
    order.sort_by(|&i, &j| sig[j].total_cmp(&sig[i]).then(i.cmp(&j)));

    let sigma: Vec<f64> = order.iter().map(|&j| sig[j]).collect();

    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut null_slots = Vec::new();
    for (t, &j) in order.iter().enumerate() {
        for i in 0..n {
            v[(i, t)] = vcols[j][i];
        }
        if sq[j] > negligible && sig[j] > 0.0 {
            for i in 0..m {
                u[(i, t)] = cols[j][i] / sig[j];
            }
        } else {
            null_slots.push(t);
        }
    }
    complete_orthonormal(&mut u, &null_slots);

    Ok(SvdResult { u, sigma, v })
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to every
/// other column, via Gram-Schmidt against the standard basis.
fn complete_orthonormal(u: &mut Matrix, slots: &[usize]) {
    if slots.is_empty() {
        return;
    }
    let (m, k) = u.shape();
    let mut filled: Vec<usize> = (0..k).filter(|t| !slots.contains(t)).collect();
    let mut basis = 0usize;
    for &slot in slots {
        while basis < m {
            let mut cand = vec![0.0; m];
            cand[basis] = 1.0;
            basis += 1;
            // Two passes of classical Gram-Schmidt for stability.
            for _ in 0..2 {
                for &t in &filled {
                    let proj: f64 = (0..m).map(|i| u[(i, t)] * cand[i]).sum();
                    for (i, c) in cand.iter_mut().enumerate() {
                        *c -= proj * u[(i, t)];
                    }
                }
            }
            let nrm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 1e-8 {
                for (i, c) in cand.iter().enumerate() {
                    u[(i, slot)] = c / nrm;
                }
                filled.push(slot);
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn orthonormality_error(q: &Matrix) -> f64 {
        q.gram_cols().sub(&Matrix::identity(q.cols())).max_abs()
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let r = svd(&Matrix::identity(3)).unwrap();
        assert_eq!(r.sigma, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_spectrum_is_sorted_abs_diagonal() {
        let r = svd(&Matrix::from_diag(&[1.0, -4.0, 2.0])).unwrap();
        assert_eq!(r.sigma, vec![4.0, 2.0, 1.0]);
        let r = svd(&Matrix::from_diag(&[4.0, 2.0, 1.0])).unwrap();
        assert_eq!(r.sigma, vec![4.0, 2.0, 1.0]);
    }

    #[test]
    fn random_tall_reconstructs() {
        let a = random(20, 8, 7);
        let r = svd(&a).unwrap();
        let err = r.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm();
        assert!(err <= 1e-10, "reconstruction error {err}");
        assert!(orthonormality_error(&r.u) <= 1e-10);
        assert!(orthonormality_error(&r.v) <= 1e-10);
        assert!(r.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn wide_and_rank_deficient_inputs() {
        let a = random(5, 12, 3);
        let r = svd(&a).unwrap();
        assert_eq!(r.sigma.len(), 5);
        assert_eq!(r.u.shape(), (5, 5));
        assert_eq!(r.v.shape(), (12, 5));
        assert!(r.reconstruct().sub(&a).frobenius_norm() <= 1e-10 * a.frobenius_norm());

        // Rank one: outer product of two vectors.
        let x = [1.0, 2.0, -1.0, 0.5];
        let y = [3.0, -1.0, 2.0];
        let b = Matrix::from_fn(4, 3, |i, j| x[i] * y[j]);
        let r = svd(&b).unwrap();
        assert!(r.sigma[1] < 1e-12 * r.sigma[0]);
        assert!(orthonormality_error(&r.u) <= 1e-10);
        assert!(r.reconstruct().sub(&b).frobenius_norm() <= 1e-10 * b.frobenius_norm());
    }

    #[test]
    fn repeated_rows_and_low_rank_products_converge() {
        let base = random(10, 16, 3);
        let dup = Matrix::from_fn(20, 16, |i, j| base[(i % 10, j)]);
        let low = random(40, 3, 4).matmul(&random(3, 16, 5));
        for a in [dup, low] {
            let d = svd(&a).unwrap();
            let err = d.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm();
            assert!(err < 1e-12, "{err}");
            assert!(orthonormality_error(&d.u) < 1e-10);
            assert!(orthonormality_error(&d.v) < 1e-10);
        }
    }

    #[test]
    fn zero_matrix_gives_zero_spectrum_and_orthonormal_factors() {
        let r = svd(&Matrix::zeros(4, 3)).unwrap();
        assert_eq!(r.sigma, vec![0.0; 3]);
        assert!(orthonormality_error(&r.u) <= 1e-12);
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut a = Matrix::identity(2);
        a[(0, 1)] = f64::INFINITY;
        assert!(matches!(svd(&a), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn deterministic() {
        let a = random(16, 9, 11);
        let r1 = svd(&a).unwrap();
        let r2 = svd(&a).unwrap();
        assert_eq!(r1.sigma, r2.sigma);
        assert_eq!(r1.u, r2.u);
    }
}
