//! Dense linear-algebra foundation: matrix aliases, tolerance policy,
//! spectra, Kronecker/vec utilities, rank/range factorization, and the
//! Sylvester solver every moment computation rests on.

mod kron;
mod rank;
mod spectra;
mod svd;
mod sylvester;

pub use kron::{kron, unvec, vec_mat};
pub use rank::{rank_and_range, rank_and_range_complex};
pub use spectra::{eigenvectors_diagonalizable, spectra_disjoint, Spectrum};
pub use svd::{verified_svd, verified_svd_complex, VerifiedSvd, VerifiedSvdComplex};
pub use sylvester::{solve_sylvester, solve_sylvester_dense, SylvesterSolver};

use crate::{Error, Result};

/// Dense real matrix, the working currency of the crate.
pub type RealMatrix = nalgebra::DMatrix<f64>;

/// Dense complex matrix, used for eigenstructure and frequency responses.
pub type ComplexMatrix = nalgebra::DMatrix<num_complex::Complex<f64>>;

/// Centralized numerical tolerance policy.
///
/// Every comparison in the crate goes through one of these fields:
///
/// * `spectral_gap` — minimum admissible distance between eigenvalues of two
///   spectra that must be disjoint, relative to `1 + max(spectral radius)`.
///   Also the real-part cutoff (unscaled) for "unstable" in rank tests.
/// * `rank_rel` — relative singular-value cutoff for rank decisions; the
///   effective threshold is `rank_rel · max(nrows, ncols) · σ_max`.
/// * `residual_rel` — relative residual bound for linear-equation solutions,
///   `‖residual‖ / max(1, ‖rhs‖) ≤ residual_rel`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub spectral_gap: f64,
    pub rank_rel: f64,
    pub residual_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            spectral_gap: 1e-8,
            rank_rel: 1e-10,
            residual_rel: 1e-8,
        }
    }
}

impl Tolerances {
    /// Tightened preset: every tolerance divided by 100.
    pub fn strict() -> Self {
        let d = Tolerances::default();
        Tolerances {
            spectral_gap: d.spectral_gap / 100.0,
            rank_rel: d.rank_rel / 100.0,
            residual_rel: d.residual_rel / 100.0,
        }
    }

    /// Relaxed preset: every tolerance multiplied by 100.
    pub fn loose() -> Self {
        let d = Tolerances::default();
        Tolerances {
            spectral_gap: d.spectral_gap * 100.0,
            rank_rel: d.rank_rel * 100.0,
            residual_rel: d.residual_rel * 100.0,
        }
    }

    /// Looks up a named preset (`"default"`, `"strict"`, `"loose"`).
    pub fn profile(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Tolerances::default()),
            "strict" => Some(Tolerances::strict()),
            "loose" => Some(Tolerances::loose()),
            _ => None,
        }
    }

    /// Rejects non-finite or non-positive tolerance values.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("spectral_gap", self.spectral_gap),
            ("rank_rel", self.rank_rel),
            ("residual_rel", self.residual_rel),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::ConfigMismatch(format!(
                    "tolerance `{name}` must be a positive finite number, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Effective singular-value cutoff for rank decisions on a matrix with
    /// the given shape and largest singular value.
    pub fn rank_threshold(&self, nrows: usize, ncols: usize, sigma_max: f64) -> f64 {
        self.rank_rel * nrows.max(ncols) as f64 * sigma_max
    }
}

/// Returns an error naming `label` if any entry of `m` is NaN or infinite.
pub fn ensure_finite(label: &str, m: &RealMatrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(label.to_string()))
    }
}

/// Checks `m` has exactly the given shape.
pub fn ensure_shape(label: &str, m: &RealMatrix, nrows: usize, ncols: usize) -> Result<()> {
    if m.nrows() == nrows && m.ncols() == ncols {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "`{label}` must be {nrows}x{ncols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Assembles a block matrix from a rectangular grid of blocks.
///
/// All blocks in a grid row must share a height; all blocks in a grid column
/// must share a width.
pub fn from_blocks(rows: &[Vec<&RealMatrix>]) -> Result<RealMatrix> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::DimensionMismatch(
            "block grid must be non-empty".into(),
        ));
    }
    let ncols_grid = rows[0].len();
    for r in rows {
        if r.len() != ncols_grid {
            return Err(Error::DimensionMismatch(
                "block grid rows have unequal lengths".into(),
            ));
        }
    }
    let row_heights: Vec<usize> = rows.iter().map(|r| r[0].nrows()).collect();
    let col_widths: Vec<usize> = rows[0].iter().map(|b| b.ncols()).collect();
    for (i, r) in rows.iter().enumerate() {
        for (j, b) in r.iter().enumerate() {
            if b.nrows() != row_heights[i] || b.ncols() != col_widths[j] {
                return Err(Error::DimensionMismatch(format!(
                    "block ({i},{j}) is {}x{}, expected {}x{}",
                    b.nrows(),
                    b.ncols(),
                    row_heights[i],
                    col_widths[j]
                )));
            }
        }
    }
    let total_rows: usize = row_heights.iter().sum();
    let total_cols: usize = col_widths.iter().sum();
    let mut out = RealMatrix::zeros(total_rows, total_cols);
    let mut r0 = 0;
    for (i, r) in rows.iter().enumerate() {
        let mut c0 = 0;
        for (j, b) in r.iter().enumerate() {
            out.view_mut((r0, c0), (row_heights[i], col_widths[j]))
                .copy_from(*b);
            c0 += col_widths[j];
        }
        r0 += row_heights[i];
    }
    Ok(out)
}

/// Converts a real matrix to its complex counterpart.
pub fn complexify(m: &RealMatrix) -> ComplexMatrix {
    m.map(|x| num_complex::Complex::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_presets_scale() {
        let d = Tolerances::default();
        let s = Tolerances::strict();
        let l = Tolerances::loose();
        assert_eq!(d.spectral_gap, 1e-8);
        assert_eq!(d.rank_rel, 1e-10);
        assert_eq!(d.residual_rel, 1e-8);
        assert_eq!(s.residual_rel, 1e-10);
        assert_eq!(l.residual_rel, 1e-6);
        assert!(Tolerances::profile("strict").is_some());
        assert!(Tolerances::profile("bogus").is_none());
    }

    #[test]
    fn validate_rejects_bad_values() {
        let mut t = Tolerances::default();
        t.rank_rel = -1.0;
        assert!(t.validate().is_err());
        t.rank_rel = f64::NAN;
        assert!(t.validate().is_err());
        assert!(Tolerances::default().validate().is_ok());
    }

    #[test]
    fn from_blocks_assembles_2x2() {
        let a = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = RealMatrix::from_row_slice(2, 1, &[5.0, 6.0]);
        let c = RealMatrix::from_row_slice(1, 2, &[7.0, 8.0]);
        let d = RealMatrix::from_row_slice(1, 1, &[9.0]);
        let m = from_blocks(&[vec![&a, &b], vec![&c, &d]]).unwrap();
        let expect =
            RealMatrix::from_row_slice(3, 3, &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(m, expect);
    }

    #[test]
    fn from_blocks_rejects_ragged() {
        let a = RealMatrix::zeros(2, 2);
        let b = RealMatrix::zeros(3, 1);
        assert!(from_blocks(&[vec![&a, &b]]).is_err());
    }

    #[test]
    fn ensure_finite_catches_nan() {
        let mut m = RealMatrix::zeros(2, 2);
        assert!(ensure_finite("m", &m).is_ok());
        m[(0, 1)] = f64::NAN;
        assert!(matches!(ensure_finite("m", &m), Err(Error::NonFinite(_))));
    }
}
