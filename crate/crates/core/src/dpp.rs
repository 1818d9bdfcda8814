//! Determinant-based diversity.
//!
//! Items are rows of a feature matrix and the kernel is their row Gram
//! matrix `K[i][j] = Fᵢ · Fⱼ`. The determinant of a principal minor `K_Y`
//! is the squared volume spanned by the items in `Y`, so a set of near
//! duplicates has determinant close to zero.
//!
//! Adding one item `j` to a selected set `Y` multiplies the determinant by
//! the Schur complement `K_jj - K_jY K_Y⁻¹ K_Yj`, the squared distance of
//! `Fⱼ` from the span of the selected items. Greedy selection keeps a
//! Cholesky factor of `K_Y` so that each candidate costs one triangular
//! solve.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::decomp::{cholesky, logdet_spd, symmetric_eigenvalues};
use crate::linalg::{dot, svd, Matrix};

/// Pivot and determinant threshold below which a kernel minor is singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Symmetric positive semidefinite item kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    entries: Matrix,
}

impl KernelMatrix {
    /// Wraps a precomputed kernel after checking symmetry.
    pub fn new(entries: Matrix) -> Result<Self> {
        let n = entries.rows();
        if entries.cols() != n {
            return Err(Error::InvalidInput("kernel must be square".into()));
        }
        let scale = entries.max_abs().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidInput(format!(
                        "kernel is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(KernelMatrix { entries })
    }

    pub fn size(&self) -> usize {
        self.entries.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(symmetric_eigenvalues(&self.entries)?[0])
    }

    /// Principal minor on the listed indices.
    pub fn minor(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(idx.len(), idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.size() {
            return Err(Error::InvalidInput(format!(
                "item index {i} out of range for kernel of size {}",
                self.size()
            )));
        }
        Ok(())
    }
}

/// Row Gram kernel of an items-by-dimensions feature matrix.
pub fn gram_kernel(features: &Matrix) -> Result<KernelMatrix> {
    if features.rows() == 0 || features.cols() == 0 {
        return Err(Error::InvalidInput("empty feature matrix".into()));
    }
    if !features.is_finite() {
        return Err(Error::InvalidInput("non-finite features".into()));
    }
    let n = features.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = dot(features.row(i), features.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(KernelMatrix { entries: k })
}

/// `K_ii K_jj - K_ij K_ji`.
pub fn two_item_det(k: &KernelMatrix, i: usize, j: usize) -> Result<f64> {
    k.check_index(i)?;
    k.check_index(j)?;
    if i == j {
        return Err(Error::InvalidInput("two_item_det needs distinct items".into()));
    }
    Ok(k.get(i, i) * k.get(j, j) - k.get(i, j) * k.get(j, i))
}

/// An ordered selection with the Cholesky factor of its kernel minor.
#[derive(Debug, Clone, Default, Serialize)]
pub struct GreedySelection {
    pub selected: Vec<usize>,
    /// Log-determinant of the selected minor after each addition.
    pub logdets: Vec<f64>,
    #[serde(skip)]
    factor: Vec<Vec<f64>>,
}

impl GreedySelection {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a selection by adding `indices` in order.
    pub fn from_indices(k: &KernelMatrix, indices: &[usize]) -> Result<Self> {
        let mut sel = Self::new();
        for &i in indices {
            sel.push(k, i)?;
        }
        Ok(sel)
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.selected.contains(&i)
    }

    /// Determinant of the selected minor (1 for the empty set).
    pub fn det(&self) -> f64 {
        self.logdets.last().map_or(1.0, |l| l.exp())
    }

    fn det_from_factor(&self) -> f64 {
        self.factor
            .iter()
            .enumerate()
            .map(|(i, row)| row[i] * row[i])
            .product()
    }

    /// Row of the extended Cholesky factor for candidate `j` and the Schur
    /// complement `K_jj - ‖row‖²`.
    fn schur(&self, k: &KernelMatrix, j: usize) -> (Vec<f64>, f64) {
        let n = self.selected.len();
        let mut row = vec![0.0; n];
        for i in 0..n {
            let mut s = k.get(self.selected[i], j);
            for t in 0..i {
                s -= self.factor[i][t] * row[t];
            }
            row[i] = s / self.factor[i][i];
        }
        let schur = k.get(j, j) - dot(&row, &row);
        (row, schur)
    }

    /// Appends `j`, failing with `SingularKernel` if the enlarged minor is
    /// singular.
    pub fn push(&mut self, k: &KernelMatrix, j: usize) -> Result<()> {
        k.check_index(j)?;
        if self.contains(j) {
            return Err(Error::InvalidInput(format!("item {j} already selected")));
        }
        let (mut row, schur) = self.schur(k, j);
        if schur.is_nan() || schur <= SINGULAR_TOL {
            return Err(Error::SingularKernel(format!(
                "adding item {j} leaves Schur complement {schur:e}"
            )));
        }
        row.push(schur.sqrt());
        let prev = self.logdets.last().copied().unwrap_or(0.0);
        self.logdets.push(prev + schur.ln());
        self.selected.push(j);
        self.factor.push(row);
        Ok(())
    }
}

/// Determinant of the minor on `selected ∪ {candidate}`, computed as
/// `det(K_Y) · (K_jj - K_jY K_Y⁻¹ K_Yj)`. For an empty selection this is
/// `K_jj`.
pub fn det_after_add(k: &KernelMatrix, selected: &GreedySelection, candidate: usize) -> Result<f64> {
    k.check_index(candidate)?;
    if selected.contains(candidate) {
        return Err(Error::InvalidInput(format!(
            "candidate {candidate} is already selected"
        )));
    }
    let det_y = selected.det_from_factor();
    if det_y <= SINGULAR_TOL && !selected.is_empty() {
        return Err(Error::SingularKernel(format!(
            "selected minor has determinant {det_y:e}"
        )));
    }
    let (_, schur) = selected.schur(k, candidate);
    Ok(det_y * schur)
}

/// Greedy determinant maximisation.
///
/// Each step adds the candidate with the largest `det_after_add`, lowest
/// index first on ties, and stops early once every remaining candidate would
/// leave a determinant at or below [`SINGULAR_TOL`].
pub fn greedy_select(k: &KernelMatrix, target_size: usize) -> Result<GreedySelection> {
    let n = k.size();
    if target_size > n {
        return Err(Error::InvalidInput(format!(
            "target size {target_size} exceeds pool of {n}"
        )));
    }
    let mut sel = GreedySelection::new();
    // Incremental Cholesky rows and Schur complements for every candidate.
    let mut rows: Vec<Vec<f64>> = vec![Vec::with_capacity(target_size); n];
    let mut schur: Vec<f64> = (0..n).map(|j| k.get(j, j)).collect();
    let mut taken = vec![false; n];

    while sel.len() < target_size {
        let det_y = sel.det_from_factor();
        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|&j| !taken[j]) {
            let det = det_y * schur[j];
            if best.is_none_or(|(_, b)| det > b) {
                best = Some((j, det));
            }
        }
        let Some((j, det)) = best else { break };
        if det.is_nan() || det <= SINGULAR_TOL {
            break;
        }
        let pivot = schur[j].sqrt();
        for i in (0..n).filter(|&i| !taken[i] && i != j) {
            let e = (k.get(j, i) - dot(&rows[j], &rows[i])) / pivot;
            rows[i].push(e);
            schur[i] -= e * e;
        }
        taken[j] = true;
        let mut frow = rows[j].clone();
        frow.push(pivot);
        let prev = sel.logdets.last().copied().unwrap_or(0.0);
        sel.logdets.push(prev + schur[j].ln());
        sel.selected.push(j);
        sel.factor.push(frow);
    }
    Ok(sel)
}

/// `log det(mᵀm)` by Cholesky next to `Σ 2 log σᵢ` from the SVD of `m`.
pub fn logdet_vs_spectrum(m: &Matrix) -> Result<(f64, f64)> {
    if m.rows() < m.cols() {
        return Err(Error::SingularKernel(format!(
            "{}x{} matrix cannot have full column rank",
            m.rows(),
            m.cols()
        )));
    }
    let sigma = svd(m)?.sigma;
    if let Some(s) = sigma.iter().find(|&&s| s <= 1e-10) {
        return Err(Error::SingularKernel(format!(
            "singular value {s:e} makes mᵀm singular"
        )));
    }
    let by_spectrum = sigma.iter().map(|s| 2.0 * s.ln()).sum();
    let by_factor = logdet_spd(&m.gram_cols(), 0.0)?;
    Ok((by_factor, by_spectrum))
}

/// Determinant of a principal minor via Cholesky, 0 when it is singular.
pub fn minor_det(k: &KernelMatrix, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    match cholesky(&k.minor(idx), 0.0) {
        Ok(l) => (0..idx.len()).map(|i| l[(i, i)] * l[(i, i)]).product(),
        Err(_) => 0.0,
    }
}
