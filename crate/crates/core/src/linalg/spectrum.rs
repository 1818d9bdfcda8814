//! Singular-spectrum diagnostics.
//!
//! AUSC (area under the singular value curve) is `Σ σᵢ / σ₁` over all
//! `k = min(rows, cols)` singular values. It is 1 for a rank-one matrix and
//! `k` for a perfectly flat spectrum.
//!
//! The smoothing loss `-‖A‖_* / ‖A‖_F` is a differentiable lower bound on
//! AUSC (since `σ₁ ≤ ‖A‖_F`), lies in `[-√k, -1]` and is invariant to
//! rescaling `A`. Minimising it raises the nuclear norm relative to the
//! Frobenius norm, which flattens the spectrum.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::matrix::Matrix;
use crate::linalg::svd::{svd, SvdResult};

/// Frobenius norm below which a matrix is treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Relative singular value cutoff for the polar factor in the gradient.
const POLAR_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SpectrumReport {
    pub sigma: Vec<f64>,
    pub normalized: Vec<f64>,
    pub ausc: f64,
    pub nuclear_norm: f64,
    pub frobenius_norm: f64,
}

impl SpectrumReport {
    pub fn from_singular_values(sigma: Vec<f64>) -> Result<Self> {
        let smax = sigma.first().copied().unwrap_or(0.0);
        let frobenius_norm = sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
        if frobenius_norm < DEGENERATE_NORM || smax <= 0.0 {
            return Err(Error::DegenerateMatrix(
                "spectrum of an all-zero matrix".into(),
            ));
        }
        let normalized: Vec<f64> = sigma.iter().map(|s| s / smax).collect();
        Ok(SpectrumReport {
            ausc: normalized.iter().sum(),
            nuclear_norm: sigma.iter().sum(),
            frobenius_norm,
            normalized,
            sigma,
        })
    }

    /// `-‖A‖_* / ‖A‖_F`.
    pub fn smoothing_loss(&self) -> f64 {
        -self.nuclear_norm / self.frobenius_norm
    }

    /// CSV with header `index,sigma,normalized` and a trailing `# ausc=` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,sigma,normalized\n");
        for (i, (s, n)) in self.sigma.iter().zip(&self.normalized).enumerate() {
            let _ = writeln!(out, "{i},{s},{n}");
        }
        let _ = writeln!(out, "# ausc={}", self.ausc);
        out
    }
}

fn checked_svd(a: &Matrix) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entries".into()));
    }
    if a.frobenius_norm() < DEGENERATE_NORM {
        return Err(Error::DegenerateMatrix(format!(
            "{}x{} matrix has Frobenius norm below {DEGENERATE_NORM:e}",
            a.rows(),
            a.cols()
        )));
    }
    svd(a)
}

pub fn spectrum_report(a: &Matrix) -> Result<SpectrumReport> {
    SpectrumReport::from_singular_values(checked_svd(a)?.sigma)
}

pub fn ausc(a: &Matrix) -> Result<f64> {
    Ok(spectrum_report(a)?.ausc)
}

pub fn smoothing_loss(a: &Matrix) -> Result<f64> {
    Ok(spectrum_report(a)?.smoothing_loss())
}

/// Gradient of `-‖A‖_* / ‖A‖_F`:
/// `-(U Vᵀ / ‖A‖_F) + ‖A‖_* · A / ‖A‖_F³`.
pub fn smoothing_loss_grad(a: &Matrix) -> Result<Matrix> {
    Ok(smoothing_loss_with_grad(a)?.1)
}

/// Loss and gradient from a single decomposition.
pub fn smoothing_loss_with_grad(a: &Matrix) -> Result<(f64, Matrix)> {
    let dec = checked_svd(a)?;
    let nuclear: f64 = dec.sigma.iter().sum();
    let fro = a.frobenius_norm();
    let polar = dec.polar_factor(POLAR_REL_TOL);
    let c_polar = -1.0 / fro;
    let c_a = nuclear / (fro * fro * fro);
    let grad = Matrix::from_fn(a.rows(), a.cols(), |i, j| {
        c_polar * polar[(i, j)] + c_a * a[(i, j)]
    });
    if !grad.is_finite() {
        return Err(Error::NumericalFailure(
            "smoothing loss gradient is not finite".into(),
        ));
    }
    Ok((-nuclear / fro, grad))
}
