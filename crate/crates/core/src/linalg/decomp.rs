use crate::error::{Error, Result};
use crate::linalg::matrix::Matrix;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// Fails with `SingularKernel` when a pivot drops to `pivot_tol` or below.
pub fn cholesky(a: &Matrix, pivot_tol: f64) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::InvalidMatrix(format!(
            "cholesky needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.is_nan() || d <= pivot_tol {
            return Err(Error::SingularKernel(format!(
                "pivot {j} is {d:e}, not above {pivot_tol:e}"
            )));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// `log det(a)` for symmetric positive definite `a`.
pub fn logdet_spd(a: &Matrix, pivot_tol: f64) -> Result<f64> {
    let l = cholesky(a, pivot_tol)?;
    Ok((0..a.rows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

/// Solves `l · x = b` for lower-triangular `l`.
pub fn forward_substitute(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::InvalidMatrix("eigenvalues need a square matrix".into()));
    }
    let mut w = a.clone();
    let scale = w.max_abs().max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| w[(i, j)] * w[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * scale * n as f64 {
            let mut ev: Vec<f64> = (0..n).map(|i| w[(i, i)]).collect();
            ev.sort_by(f64::total_cmp);
            return Ok(ev);
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = w[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (w[(q, q)] - w[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (wkp, wkq) = (w[(k, p)], w[(k, q)]);
                    w[(k, p)] = c * wkp - s * wkq;
                    w[(k, q)] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let (wpk, wqk) = (w[(p, k)], w[(q, k)]);
                    w[(p, k)] = c * wpk - s * wqk;
                    w[(q, k)] = s * wpk + c * wqk;
                }
            }
        }
    }
    Err(Error::NumericalFailure(
        "symmetric eigenvalue iteration did not converge".into(),
    ))
}
