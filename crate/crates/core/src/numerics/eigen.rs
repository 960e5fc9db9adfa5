//! Dense Hermitian eigensolver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Element-wise tolerance used when checking Hermiticity.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: DVector<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: DMatrix<Complex64>,
}

pub fn max_asymmetry(a: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (a[(i, j)] - a[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Backed by nalgebra's Householder tridiagonalization followed by implicit QR sweeps;
/// the result is re-sorted ascending.
pub fn hermitian_eigh(a: &DMatrix<Complex64>) -> Result<Eigh> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let asym = max_asymmetry(a);
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian { max_asymmetry: asym });
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Eigh {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0).ok_or(Error::EigenNoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Eigh { values, vectors })
}

/// Eigenvalues only (ascending) of a Hermitian matrix.
pub fn hermitian_eigvals(a: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension("expected a square matrix".into()));
    }
    let asym = max_asymmetry(a);
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian { max_asymmetry: asym });
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut v: Vec<f64> = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or(Error::EigenNoConvergence)?
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn symmetric_eigvals(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension("expected a square matrix".into()));
    }
    let mut v: Vec<f64> = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or(Error::EigenNoConvergence)?
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}
