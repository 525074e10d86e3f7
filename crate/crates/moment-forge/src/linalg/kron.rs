//! Kronecker products and column-stacking vectorization.
//!
//! The convention throughout the crate is column-major stacking, chosen so
//! that the identity `vec(A·X·B) = (Bᵀ ⊗ A)·vec(X)` holds.

use super::RealMatrix;
use crate::{Error, Result};
use nalgebra::DVector;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &RealMatrix, b: &RealMatrix) -> RealMatrix {
    a.kronecker(b)
}

/// Stacks the columns of `m` into a single vector (column-major order).
pub fn vec_mat(m: &RealMatrix) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_mat`]: reshapes a stacked vector back into an
/// `nrows × ncols` matrix.
pub fn unvec(v: &DVector<f64>, nrows: usize, ncols: usize) -> Result<RealMatrix> {
    if v.len() != nrows * ncols {
        return Err(Error::DimensionMismatch(format!(
            "cannot reshape a length-{} vector into {}x{}",
            v.len(),
            nrows,
            ncols
        )));
    }
    Ok(RealMatrix::from_column_slice(nrows, ncols, v.as_slice()))
}
