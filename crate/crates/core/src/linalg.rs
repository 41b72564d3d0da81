//! Thin wrappers over `faer` for the dense factorizations the pipeline needs.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Mat<C64>;

pub const J: C64 = C64::new(0.0, 1.0);

/// Eigenvalues and right eigenvectors of a general complex matrix.
pub fn eig(a: &CMat) -> Result<(Vec<C64>, CMat)> {
    if a.nrows() == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    let decomposition =
        a.eigen().map_err(|e| Error::EigensolverFailure(format!("{e:?} (matrix norm {:e})", frobenius(a))))?;
    let values = decomposition.S().column_vector().iter().copied().collect();
    Ok((values, decomposition.U().to_owned()))
}

/// Ascending eigenvalues and orthonormal eigenvectors of a real symmetric matrix.
pub fn symmetric_eig(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let decomposition =
        a.self_adjoint_eigen(faer::Side::Lower).map_err(|e| Error::EigensolverFailure(format!("{e:?}")))?;
    let values = decomposition.S().column_vector().iter().copied().collect();
    Ok((values, decomposition.U().to_owned()))
}

/// Thin singular value decomposition `a = u diag(s) vᴴ`.
pub fn svd(a: &CMat) -> Result<(CMat, Vec<f64>, CMat)> {
    let decomposition = a.thin_svd().map_err(|e| Error::EigensolverFailure(format!("svd: {e:?}")))?;
    let s = decomposition.S().column_vector().iter().map(|v| v.re).collect();
    Ok((decomposition.U().to_owned(), s, decomposition.V().to_owned()))
}

pub fn frobenius(a: &CMat) -> f64 {
    a.norm_l2()
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn column(a: &CMat, j: usize) -> Vec<C64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> CMat {
    CMat::from_fn(rows, columns.len(), |i, j| columns[j][i])
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Conjugated inner product `Σ conj(a_i) w_i b_i`.
pub fn weighted_dot(a: &[C64], weights: &[f64], b: &[C64]) -> C64 {
    a.iter().zip(weights).zip(b).map(|((x, w), y)| x.conj() * y * *w).sum()
}
