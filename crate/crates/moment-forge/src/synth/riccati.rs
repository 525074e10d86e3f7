//! Continuous-time algebraic Riccati solver via the matrix sign function.
//!
//! Solves `AᵀX + XA − X·B·R⁻¹·Bᵀ·X + Q = 0` by Newton iteration with
//! determinant scaling on the Hamiltonian, extracting the stable invariant
//! subspace from `(I − sign(H))/2`. Self-contained: no external LAPACK
//! Schur-ordering machinery is required, and accuracy is gated by an
//! explicit residual check.

use crate::linalg::{from_blocks, RealMatrix, Tolerances};
use crate::{Error, Result};

const MAX_SIGN_ITERATIONS: usize = 120;

/// Solves the continuous-time algebraic Riccati equation and returns the
/// symmetric stabilizing solution `X`.
pub fn solve_care(
    a: &RealMatrix,
    b: &RealMatrix,
    q: &RealMatrix,
    r: &RealMatrix,
    tol: &Tolerances,
) -> Result<RealMatrix> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || !q.is_square() || q.nrows() != n {
        return Err(Error::DimensionMismatch(
            "Riccati data must satisfy A: n×n, B: n×m, Q: n×n".into(),
        ));
    }
    let m = b.ncols();
    if !r.is_square() || r.nrows() != m {
        return Err(Error::DimensionMismatch(format!(
            "`R` must be {m}x{m}, got {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    for (label, mat) in [("A", a), ("B", b), ("Q", q), ("R", r)] {
        crate::linalg::ensure_finite(label, mat)?;
    }
    for (label, mat) in [("Q", q), ("R", r)] {
        let asym = (mat - mat.transpose()).norm();
        if asym > 1e-12 * (1.0 + mat.norm()) {
            return Err(Error::ConfigMismatch(format!(
                "weight `{label}` must be symmetric (asymmetry {asym:.3e})"
            )));
        }
    }

    // G = B·R⁻¹·Bᵀ, via a solve rather than an explicit inverse.
    let r_lu = r.clone().lu();
    let r_inv_bt = r_lu.solve(&b.transpose()).ok_or_else(|| {
        Error::RiccatiFailure("input weight `R` is singular".into())
    })?;
    let g = b * &r_inv_bt;

    let minus_g = -&g;
    let minus_q = -q;
    let minus_at = -a.transpose();
    let h = from_blocks(&[vec![a, &minus_g], vec![&minus_q, &minus_at]])?;
    let dim = 2 * n;

    // Newton iteration Z ← (cZ + (cZ)⁻¹)/2 with determinant scaling.
    let mut z = h.clone();
    let mut converged = false;
    for _ in 0..MAX_SIGN_ITERATIONS {
        let lu = z.clone().lu();
        let det = lu.determinant().abs();
        let c = if det.is_finite() && det > 0.0 {
            let c = det.powf(-1.0 / dim as f64);
            if c.is_finite() && c > 0.0 {
                c
            } else {
                1.0
            }
        } else {
            1.0
        };
        let z_scaled = &z * c;
        let z_inv = z_scaled.clone().lu().try_inverse().ok_or_else(|| {
            Error::RiccatiFailure("Hamiltonian sign iteration hit a singular iterate".into())
        })?;
        let z_next = (&z_scaled + &z_inv) * 0.5;
        let step = (&z_next - &z).norm();
        let scale = z.norm().max(1.0);
        z = z_next;
        if step <= 1e-13 * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::RiccatiFailure(
            "Hamiltonian sign iteration did not converge".into(),
        ));
    }

    // Stable invariant subspace spans the columns of (I − sign(H))/2.
    let w = (RealMatrix::identity(dim, dim) - &z) * 0.5;
    let svd = crate::linalg::verified_svd(&w)?;
    // A solvable problem has no imaginary-axis Hamiltonian eigenvalues, so
    // the subspace has dimension exactly n; a collapse here means the data
    // do not admit a stabilizing solution.
    let sv = &svd.singular_values;
    if sv.len() < n || sv[n - 1] <= tol.rank_threshold(dim, dim, sv[0]) {
        return Err(Error::RiccatiFailure(
            "stable invariant subspace is rank-deficient; no stabilizing solution".into(),
        ));
    }
    let u1 = svd.u.columns(0, n);
    let x_top = u1.rows(0, n).into_owned();
    let x_bot = u1.rows(n, n).into_owned();
    // X·X_top = X_bot ⟺ X_topᵀ·Xᵀ = X_botᵀ.
    let xt = x_top
        .transpose()
        .lu()
        .solve(&x_bot.transpose())
        .ok_or_else(|| {
            Error::RiccatiFailure("stable subspace is not the graph of a solution".into())
        })?;
    let x_raw = xt.transpose();
    let x = (&x_raw + &x_raw.transpose()) * 0.5;
    crate::linalg::ensure_finite("Riccati solution", &x)?;

    // Residual gate.
    let residual = (a.transpose() * &x + &x * a - &x * &g * &x + q).norm();
    let scale = 1.0 + q.norm() + 2.0 * a.norm() * x.norm() + g.norm() * x.norm() * x.norm();
    if !residual.is_finite() || residual > tol.residual_rel * scale {
        return Err(Error::RiccatiFailure(format!(
            "Riccati residual {residual:.3e} exceeds tolerance {:.3e}",
            tol.residual_rel * scale
        )));
    }

    // A non-stabilizing root can satisfy the equation and the residual gate
    // (unstabilizable data admit such roots), so insist on the defining
    // property of the branch this solver promises.
    let closed = a - &g * &x;
    let spec = crate::linalg::Spectrum::of(&closed)?;
    if spec.abscissa() >= 0.0 {
        return Err(Error::RiccatiFailure(format!(
            "computed root is not stabilizing (closed-loop abscissa {:.3e})",
            spec.abscissa()
        )));
    }
    Ok(x)
}

/// State-feedback gain from a Riccati solution: `K = R⁻¹·Bᵀ·X`.
pub fn feedback_gain(
    b: &RealMatrix,
    r: &RealMatrix,
    x: &RealMatrix,
) -> Result<RealMatrix> {
    let bt_x = b.transpose() * x;
    r.clone()
        .lu()
        .solve(&bt_x)
        .ok_or_else(|| Error::RiccatiFailure("input weight `R` is singular".into()))
}
