//! Thin wrappers over `faer` for the dense Hermitian work the engines need.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = Mat<C64>;

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: CMat,
}

pub fn hermitian_eigen(m: &CMat) -> Result<HermitianEigen> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Integration(format!("eigendecomposition failed: {e:?}")))?;
    let values = eig.S().column_vector().iter().map(|v| v.re).collect();
    Ok(HermitianEigen {
        values,
        vectors: eig.U().to_owned(),
    })
}

pub fn from_row_major(n: usize, data: &[C64]) -> CMat {
    Mat::from_fn(n, n, |i, j| data[i * n + j])
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// `exp(−i H t)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMat, t: f64) -> Result<CMat> {
    let eig = hermitian_eigen(h)?;
    let n = h.nrows();
    let v = &eig.vectors;
    let phases: Vec<C64> = eig.values.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
    let scaled = Mat::from_fn(n, n, |i, k| v[(i, k)] * phases[k]);
    Ok(&scaled * v.adjoint())
}

/// Largest singular value.
pub fn operator_norm(m: &CMat) -> Result<f64> {
    let sv = m
        .singular_values()
        .map_err(|e| Error::Integration(format!("SVD failed: {e:?}")))?;
    Ok(sv.into_iter().fold(0.0, f64::max))
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    let mut best: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// `A v` for a dense matrix and a plain vector.
pub fn mat_vec(a: &CMat, v: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); a.nrows()];
    for j in 0..a.ncols() {
        let vj = v[j];
        if vj == C64::new(0.0, 0.0) {
            continue;
        }
        let col = a.col(j);
        for (o, x) in out.iter_mut().zip(col.iter()) {
            *o += x * vj;
        }
    }
    out
}
