//! SVD-based rank decisions with orthonormal range and null-space bases.

use super::{ComplexMatrix, RealMatrix, Tolerances};
use crate::Result;

/// Numerical rank of `m` with orthonormal bases.
///
/// Returns `(rank, range_basis, null_basis)` where `range_basis` is
/// `nrows × rank` (orthonormal columns spanning the column space) and
/// `null_basis` is `ncols × (ncols − rank)` (orthonormal columns spanning
/// the right null space). Singular values are cut off at
/// `rank_rel · max(nrows, ncols) · σ_max`.
pub fn rank_and_range(
    m: &RealMatrix,
    tol: &Tolerances,
) -> Result<(usize, RealMatrix, RealMatrix)> {
    super::ensure_finite("matrix for rank", m)?;
    let (nrows, ncols) = m.shape();
    let svd = super::verified_svd(m)?;
    let u = svd.u;
    let v_t = svd.v_t;
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thr = tol.rank_threshold(nrows, ncols, sigma_max);
    let rank = svd.singular_values.iter().filter(|&&s| s > thr).count();

    let range = u.columns(0, rank).into_owned();
    // Right singular vectors beyond the rank span the null space. nalgebra's
    // thin SVD only carries min(nrows, ncols) of them; any remaining null
    // directions (when ncols > nrows) are completed by orthogonalizing the
    // residual identity columns against what we have.
    let carried = v_t.nrows();
    let mut null_cols: Vec<nalgebra::DVector<f64>> = Vec::new();
    for i in rank..carried {
        null_cols.push(v_t.row(i).transpose());
    }
    if carried < ncols {
        // Complete the orthonormal set: project identity columns against the
        // full set of carried right singular vectors plus accepted nulls.
        let mut basis: Vec<nalgebra::DVector<f64>> =
            (0..carried).map(|i| v_t.row(i).transpose()).collect();
        for j in 0..ncols {
            if basis.len() >= ncols {
                break;
            }
            let mut cand = nalgebra::DVector::zeros(ncols);
            cand[j] = 1.0;
            for b in &basis {
                let proj = b.dot(&cand);
                cand -= b * proj;
            }
            let norm = cand.norm();
            if norm > 0.5 {
                cand /= norm;
                basis.push(cand.clone());
                null_cols.push(cand);
            }
        }
    }
    let null = if null_cols.is_empty() {
        RealMatrix::zeros(ncols, 0)
    } else {
        RealMatrix::from_columns(&null_cols)
    };
    Ok((rank, range, null))
}

/// Rank of a complex matrix under the same threshold rule (no bases).
pub fn rank_and_range_complex(m: &ComplexMatrix, tol: &Tolerances) -> Result<usize> {
    let (nrows, ncols) = m.shape();
    let svd = super::verified_svd_complex(m)?;
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thr = tol.rank_threshold(nrows, ncols, sigma_max);
    Ok(svd.singular_values.iter().filter(|&&s| s > thr).count())
}
