//! Dense symmetric helpers shared by the solvers: sorted eigendecompositions,
//! projection onto the PSD cone and a PSD check.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{ensure_finite, Error, Result};

/// Relative PSD tolerance: min eigenvalue ≥ −`PSD_RTOL` · max |eigenvalue|.
pub const PSD_RTOL: f64 = 1e-8;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
}

/// Symmetric eigendecomposition with eigenvalues sorted descending and each
/// eigenvector signed so that its largest-magnitude entry is positive.
pub fn sorted_eigen(s: &DMatrix<f64>) -> Result<SortedEigen> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch {
            what: "symmetric matrix columns",
            expected: s.nrows(),
            got: s.ncols(),
        });
    }
    ensure_finite(s.iter(), "symmetric matrix")?;
    let n = s.nrows();
    let sym = symmetrize(s);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let pivot = v
            .iter()
            .copied()
            .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(dst, &v);
    }
    ensure_finite(values.iter(), "eigenvalues")?;
    Ok(SortedEigen { values, vectors })
}

/// `(S + Sᵀ) / 2`.
pub fn symmetrize(s: &DMatrix<f64>) -> DMatrix<f64> {
    (s + s.transpose()) * 0.5
}

/// Nearest PSD matrix in Frobenius norm: clamp negative eigenvalues to zero.
pub fn psd_project(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sorted_eigen(s)?;
    let clamped = eig.values.map(|v| v.max(0.0));
    Ok(reconstruct(&eig.vectors, &clamped))
}

/// `V diag(w) Vᵀ`, symmetrized.
pub(crate) fn reconstruct(vectors: &DMatrix<f64>, values: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= values[k];
    }
    symmetrize(&(scaled * vectors.transpose()))
}

/// True when the smallest eigenvalue is at least `-rtol` times the largest
/// eigenvalue magnitude.
pub fn is_psd(s: &DMatrix<f64>, rtol: f64) -> Result<bool> {
    if s.nrows() == 0 {
        return Ok(true);
    }
    let eig = sorted_eigen(s)?;
    let max = eig.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let min = eig.values[eig.values.len() - 1];
    Ok(min >= -rtol * max)
}

/// Numerical rank from singular values relative to the largest one.
pub(crate) fn numerical_rank(m: &DMatrix<f64>, rtol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0_f64, |a, &v| a.max(v));
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&v| v > rtol * max).count()
}
