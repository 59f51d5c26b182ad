//! Small dense helpers shared by the solvers and the shrinkage step.

use nalgebra::{DMatrix, DVector};

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Pairwise (cascade) summation; the reduction tree depends only on the length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Solves `a x = b` for symmetric positive definite `a`.
///
/// Returns `None` when a pivot falls below `rel_tol` times the largest
/// diagonal entry, which is how rank deficiency shows up in Gram matrices.
pub(crate) fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Option<DVector<f64>> {
    let chol = spd_factor(a, rel_tol)?;
    Some(chol.solve(b))
}

pub(crate) fn spd_factor(a: &DMatrix<f64>, rel_tol: f64) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let max_diag = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if a.nrows() == 0 {
        return nalgebra::Cholesky::new(a.clone());
    }
    if max_diag <= 0.0 || !max_diag.is_finite() {
        return None;
    }
    let chol = nalgebra::Cholesky::new(a.clone())?;
    let l = chol.l_dirty();
    let min_pivot = (0..a.nrows())
        .map(|i| l[(i, i)] * l[(i, i)])
        .fold(f64::INFINITY, f64::min);
    if min_pivot <= rel_tol * max_diag {
        return None;
    }
    Some(chol)
}

/// Numerical rank of `x` from the diagonal of its R factor.
pub(crate) fn has_full_column_rank(x: &DMatrix<f64>, rel_tol: f64) -> bool {
    if x.ncols() == 0 {
        return true;
    }
    if x.ncols() > x.nrows() {
        return false;
    }
    let r = x.clone().qr().r();
    let diag: Vec<f64> = (0..r.ncols()).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    max > 0.0 && diag.iter().all(|&d| d > rel_tol * max)
}

/// Column subset of `x`, in the order given by `idx`.
pub(crate) fn select_columns(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), idx.len(), |i, j| x[(i, idx[j])])
}
