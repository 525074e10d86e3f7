//! Verified singular value decompositions.
//!
//! The library leans on SVDs for rank decisions, pseudoinverses, and
//! invariant-subspace extraction, and a silently wrong factorization breaks
//! all three. nalgebra's Golub–Kahan SVD can return a perfectly orthogonal
//! `U` together with sorted singular values while `U·Σ·Vᵀ` fails to
//! reproduce the input (observed on a well-conditioned 10×10 matrix whose
//! trailing singular values vanish exactly). Every SVD here therefore goes
//! through a verification gate — orthonormal factors and reconstruction of
//! the input — with a one-sided Jacobi fallback that recomputes the
//! factorization to high relative accuracy when the fast path fails.

use super::{ComplexMatrix, RealMatrix};
use crate::{Error, Result};
use nalgebra::DVector;
use num_complex::Complex;

const MAX_JACOBI_SWEEPS: usize = 100;

/// Thin SVD of a real matrix: `m = u · diag(σ) · v_t` with `u` of shape
/// `nrows × k`, `v_t` of shape `k × ncols`, `k = min(nrows, ncols)`, and
/// singular values sorted in descending order.
pub struct VerifiedSvd {
    pub u: RealMatrix,
    pub singular_values: DVector<f64>,
    pub v_t: RealMatrix,
}

/// Thin SVD of a complex matrix, same contract as [`VerifiedSvd`]
/// (`v_t` is the conjugate transpose of `V`; singular values are real).
pub struct VerifiedSvdComplex {
    pub u: ComplexMatrix,
    pub singular_values: DVector<f64>,
    pub v_t: ComplexMatrix,
}

fn factors_acceptable(
    m: &RealMatrix,
    u: &RealMatrix,
    sv: &DVector<f64>,
    v_t: &RealMatrix,
) -> bool {
    let k = sv.len();
    if u.ncols() != k || v_t.nrows() != k {
        return false;
    }
    if sv.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return false;
    }
    if sv.as_slice().windows(2).any(|w| w[0] < w[1]) {
        return false;
    }
    let gate = 1e-10 * (1.0 + k as f64);
    let eye = RealMatrix::identity(k, k);
    if (u.transpose() * u - &eye).norm() > gate {
        return false;
    }
    if (v_t * v_t.transpose() - &eye).norm() > gate {
        return false;
    }
    let recon = u * RealMatrix::from_diagonal(sv) * v_t;
    (recon - m).norm() <= 1e-10 * (1.0 + m.norm())
}

fn factors_acceptable_complex(
    m: &ComplexMatrix,
    u: &ComplexMatrix,
    sv: &DVector<f64>,
    v_t: &ComplexMatrix,
) -> bool {
    let k = sv.len();
    if u.ncols() != k || v_t.nrows() != k {
        return false;
    }
    if sv.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return false;
    }
    if sv.as_slice().windows(2).any(|w| w[0] < w[1]) {
        return false;
    }
    let gate = 1e-10 * (1.0 + k as f64);
    let eye = ComplexMatrix::identity(k, k);
    if (u.adjoint() * u - &eye).norm() > gate {
        return false;
    }
    if (v_t * v_t.adjoint() - &eye).norm() > gate {
        return false;
    }
    let sigma = ComplexMatrix::from_diagonal(&sv.map(|s| Complex::new(s, 0.0)));
    let recon = u * sigma * v_t;
    (recon - m).norm() <= 1e-10 * (1.0 + m.norm())
}

/// SVD of a real matrix, accepted only after verification.
pub fn verified_svd(m: &RealMatrix) -> Result<VerifiedSvd> {
    super::ensure_finite("matrix for SVD", m)?;
    let svd = m.clone().svd(true, true);
    if let (Some(u), Some(v_t)) = (svd.u, svd.v_t) {
        if factors_acceptable(m, &u, &svd.singular_values, &v_t) {
            return Ok(VerifiedSvd {
                u,
                singular_values: svd.singular_values,
                v_t,
            });
        }
    }
    let out = jacobi_svd(m)?;
    if !factors_acceptable(m, &out.u, &out.singular_values, &out.v_t) {
        return Err(Error::NumericalFailure(
            "SVD verification failed on both code paths".into(),
        ));
    }
    Ok(out)
}

/// SVD of a complex matrix, accepted only after verification.
pub fn verified_svd_complex(m: &ComplexMatrix) -> Result<VerifiedSvdComplex> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("matrix for SVD".into()));
    }
    let svd = m.clone().svd(true, true);
    if let (Some(u), Some(v_t)) = (svd.u, svd.v_t) {
        if factors_acceptable_complex(m, &u, &svd.singular_values, &v_t) {
            return Ok(VerifiedSvdComplex {
                u,
                singular_values: svd.singular_values,
                v_t,
            });
        }
    }
    let out = jacobi_svd_complex(m)?;
    if !factors_acceptable_complex(m, &out.u, &out.singular_values, &out.v_t) {
        return Err(Error::NumericalFailure(
            "SVD verification failed on both code paths".into(),
        ));
    }
    Ok(out)
}

/// One-sided Jacobi SVD of a real matrix (thin factors, sorted).
fn jacobi_svd(m: &RealMatrix) -> Result<VerifiedSvd> {
    let (nrows, ncols) = m.shape();
    if nrows >= ncols {
        let (u, sv, v) = jacobi_tall(m)?;
        Ok(VerifiedSvd {
            u,
            singular_values: sv,
            v_t: v.transpose(),
        })
    } else {
        // mᵀ = U·Σ·Vᵀ  ⟺  m = V·Σ·Uᵀ.
        let (u, sv, v) = jacobi_tall(&m.transpose())?;
        Ok(VerifiedSvd {
            u: v,
            singular_values: sv,
            v_t: u.transpose(),
        })
    }
}

/// One-sided Jacobi SVD of a complex matrix (thin factors, sorted).
fn jacobi_svd_complex(m: &ComplexMatrix) -> Result<VerifiedSvdComplex> {
    let (nrows, ncols) = m.shape();
    if nrows >= ncols {
        let (u, sv, v) = jacobi_tall_complex(m)?;
        Ok(VerifiedSvdComplex {
            u,
            singular_values: sv,
            v_t: v.adjoint(),
        })
    } else {
        // m^H = U·Σ·V^H  ⟺  m = V·Σ·U^H.
        let (u, sv, v) = jacobi_tall_complex(&m.adjoint())?;
        Ok(VerifiedSvdComplex {
            u: v,
            singular_values: sv,
            v_t: u.adjoint(),
        })
    }
}

/// Core one-sided Jacobi iteration for `nrows ≥ ncols`: orthogonalizes the
/// columns of a working copy by plane rotations, accumulating them in `V`.
/// Returns `(U, σ, V)` with `U: nrows × ncols`, `V: ncols × ncols`.
fn jacobi_tall(m: &RealMatrix) -> Result<(RealMatrix, DVector<f64>, RealMatrix)> {
    let (nrows, ncols) = m.shape();
    let mut a = m.clone();
    let mut v = RealMatrix::identity(ncols, ncols);
    let mut converged = ncols < 2;
    for _ in 0..MAX_JACOBI_SWEEPS {
        if converged {
            break;
        }
        converged = true;
        for p in 0..ncols.saturating_sub(1) {
            for q in (p + 1)..ncols {
                let app = a.column(p).norm_squared();
                let aqq = a.column(q).norm_squared();
                let apq = a.column(p).dot(&a.column(q));
                if app == 0.0 || aqq == 0.0 || apq.abs() <= f64::EPSILON * (app * aqq).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_columns(&mut a, p, q, cs, sn);
                rotate_columns(&mut v, p, q, cs, sn);
            }
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(
            "Jacobi SVD did not converge".into(),
        ));
    }

    // Column norms are the singular values; sort descending.
    let mut order: Vec<usize> = (0..ncols).collect();
    let norms: Vec<f64> = (0..ncols).map(|j| a.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).expect("finite norms"));
    let sigma_max = norms.iter().cloned().fold(0.0, f64::max);
    let tiny = sigma_max * f64::EPSILON;

    let mut u = RealMatrix::zeros(nrows, ncols);
    let mut v_sorted = RealMatrix::zeros(ncols, ncols);
    let mut sv = DVector::zeros(ncols);
    let mut zero_cols = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        sv[dst] = norms[src];
        v_sorted.set_column(dst, &v.column(src));
        if norms[src] > tiny && norms[src] > 0.0 {
            u.set_column(dst, &(a.column(src) / norms[src]));
        } else {
            zero_cols.push(dst);
        }
    }
    fill_orthonormal(&mut u, &zero_cols)?;
    Ok((u, sv, v_sorted))
}

/// Complex counterpart of [`jacobi_tall`]: the rotation acquires the phase
/// of the off-diagonal Gram entry so the 2×2 Hermitian block diagonalizes.
fn jacobi_tall_complex(
    m: &ComplexMatrix,
) -> Result<(ComplexMatrix, DVector<f64>, ComplexMatrix)> {
    let (nrows, ncols) = m.shape();
    let mut a = m.clone();
    let mut v = ComplexMatrix::identity(ncols, ncols);
    let mut converged = ncols < 2;
    for _ in 0..MAX_JACOBI_SWEEPS {
        if converged {
            break;
        }
        converged = true;
        for p in 0..ncols.saturating_sub(1) {
            for q in (p + 1)..ncols {
                let app = a.column(p).norm_squared();
                let aqq = a.column(q).norm_squared();
                // Gram entry ⟨A_p, A_q⟩ = A_pᴴ·A_q.
                let apq: Complex<f64> = a
                    .column(p)
                    .iter()
                    .zip(a.column(q).iter())
                    .map(|(x, y)| x.conj() * y)
                    .sum();
                let r = apq.norm();
                if app == 0.0 || aqq == 0.0 || r <= f64::EPSILON * (app * aqq).sqrt() {
                    continue;
                }
                converged = false;
                let alpha = apq / r;
                let zeta = (aqq - app) / (2.0 * r);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_columns_complex(&mut a, p, q, cs, sn, alpha);
                rotate_columns_complex(&mut v, p, q, cs, sn, alpha);
            }
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(
            "Jacobi SVD did not converge".into(),
        ));
    }

    let mut order: Vec<usize> = (0..ncols).collect();
    let norms: Vec<f64> = (0..ncols).map(|j| a.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).expect("finite norms"));
    let sigma_max = norms.iter().cloned().fold(0.0, f64::max);
    let tiny = sigma_max * f64::EPSILON;

    let mut u = ComplexMatrix::zeros(nrows, ncols);
    let mut v_sorted = ComplexMatrix::zeros(ncols, ncols);
    let mut sv = DVector::zeros(ncols);
    let mut zero_cols = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        sv[dst] = norms[src];
        v_sorted.set_column(dst, &v.column(src));
        if norms[src] > tiny && norms[src] > 0.0 {
            u.set_column(dst, &(a.column(src) / Complex::new(norms[src], 0.0)));
        } else {
            zero_cols.push(dst);
        }
    }
    fill_orthonormal_complex(&mut u, &zero_cols)?;
    Ok((u, sv, v_sorted))
}

/// Applies the plane rotation `[cs, sn; −sn, cs]` to columns `p, q`.
fn rotate_columns(a: &mut RealMatrix, p: usize, q: usize, cs: f64, sn: f64) {
    for i in 0..a.nrows() {
        let xp = a[(i, p)];
        let xq = a[(i, q)];
        a[(i, p)] = cs * xp - sn * xq;
        a[(i, q)] = sn * xp + cs * xq;
    }
}

/// Applies the unitary block `[cs, sn; −ᾱ·sn, ᾱ·cs]` to columns `p, q`,
/// where `α` is the unit phase of the Gram entry.
fn rotate_columns_complex(
    a: &mut ComplexMatrix,
    p: usize,
    q: usize,
    cs: f64,
    sn: f64,
    alpha: Complex<f64>,
) {
    let ac = alpha.conj();
    for i in 0..a.nrows() {
        let xp = a[(i, p)];
        let xq = a[(i, q)];
        a[(i, p)] = xp * cs - xq * (ac * sn);
        a[(i, q)] = xp * sn + xq * (ac * cs);
    }
}

/// Replaces the listed (zero) columns of `u` with unit vectors orthogonal to
/// every other column, completing an orthonormal set.
fn fill_orthonormal(u: &mut RealMatrix, zero_cols: &[usize]) -> Result<()> {
    if zero_cols.is_empty() {
        return Ok(());
    }
    let nrows = u.nrows();
    let mut next = zero_cols.iter().copied();
    let mut current = next.next();
    for j in 0..nrows {
        let Some(dst) = current else { break };
        let mut cand = DVector::zeros(nrows);
        cand[j] = 1.0;
        for c in 0..u.ncols() {
            if zero_cols.contains(&c) && c >= dst {
                continue;
            }
            let col = u.column(c);
            let proj = col.dot(&cand);
            cand -= col.into_owned() * proj;
        }
        let norm = cand.norm();
        if norm > 0.5 {
            u.set_column(dst, &(cand / norm));
            current = next.next();
        }
    }
    if current.is_some() {
        return Err(Error::NumericalFailure(
            "failed to complete an orthonormal basis".into(),
        ));
    }
    Ok(())
}

/// Complex counterpart of [`fill_orthonormal`].
fn fill_orthonormal_complex(u: &mut ComplexMatrix, zero_cols: &[usize]) -> Result<()> {
    if zero_cols.is_empty() {
        return Ok(());
    }
    let nrows = u.nrows();
    let mut next = zero_cols.iter().copied();
    let mut current = next.next();
    for j in 0..nrows {
        let Some(dst) = current else { break };
        let mut cand: nalgebra::DVector<Complex<f64>> = nalgebra::DVector::zeros(nrows);
        cand[j] = Complex::new(1.0, 0.0);
        for c in 0..u.ncols() {
            if zero_cols.contains(&c) && c >= dst {
                continue;
            }
            let col = u.column(c);
            // ⟨col, cand⟩ with the convention conj(col)·cand.
            let proj: Complex<f64> = col
                .iter()
                .zip(cand.iter())
                .map(|(x, y)| x.conj() * y)
                .sum();
            cand -= col.into_owned() * proj;
        }
        let norm = cand.norm();
        if norm > 0.5 {
            u.set_column(dst, &(cand / Complex::new(norm, 0.0)));
            current = next.next();
        }
    }
    if current.is_some() {
        return Err(Error::NumericalFailure(
            "failed to complete an orthonormal basis".into(),
        ));
    }
    Ok(())
}
