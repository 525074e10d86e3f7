//! Sylvester equation `Π·S = A·Π + R`, solved by Schur reduction with
//! block back-substitution, plus a dense Kronecker cross-check path.
//!
//! The equation has a unique solution exactly when σ(A) ∩ σ(S) = ∅, which is
//! enforced up front under the tolerance policy. The Schur path is the
//! production solver; the dense path exists as an independent oracle for
//! tests and small problems.

use super::{ensure_finite, kron, spectra::require_disjoint, unvec, vec_mat, RealMatrix, Tolerances};
use crate::{Error, Result};

/// Maximum `n·ν` accepted by the dense Kronecker path.
const DENSE_LIMIT: usize = 400;

/// Reusable solver for `Π·S = A·Π + R` with fixed `(S, A)` and varying `R`.
///
/// Construction performs the spectral-disjointness check and both Schur
/// decompositions once; [`SylvesterSolver::solve`] then costs one pair of
/// orthogonal transforms and a back-substitution per right-hand side.
#[derive(Debug, Clone)]
pub struct SylvesterSolver {
    /// Orthogonal factor of A = Qa·Ta·Qaᵀ.
    qa: RealMatrix,
    /// Quasi-triangular factor of A.
    ta: RealMatrix,
    /// Orthogonal factor of S = Qs·Ts·Qsᵀ.
    qs: RealMatrix,
    /// Quasi-triangular factor of S.
    ts: RealMatrix,
    /// Block partition of `ta` (start index, size 1 or 2).
    blocks_a: Vec<(usize, usize)>,
    /// Block partition of `ts`.
    blocks_s: Vec<(usize, usize)>,
    tol: Tolerances,
}

/// Splits a quasi-upper-triangular matrix into 1×1 and 2×2 diagonal blocks.
///
/// A subdiagonal entry at noise level relative to the matrix scale is
/// treated as a split point; nonzero subdiagonals mark 2×2 blocks. Merging
/// two genuinely separate 1×1 blocks into a 2×2 block is harmless for
/// back-substitution, so the threshold errs toward merging.
fn quasi_blocks(t: &RealMatrix) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let scale = t.norm().max(1.0);
    let eps = f64::EPSILON * scale;
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > eps {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

fn schur_decompose(label: &str, m: &RealMatrix) -> Result<(RealMatrix, RealMatrix)> {
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::NumericalFailure(format!("Schur iteration stalled on `{label}`")))?;
    let (q, t) = schur.unpack();
    Ok((q, t))
}

impl SylvesterSolver {
    /// Prepares a solver for `Π·S = A·Π + R`.
    ///
    /// Fails with [`Error::SpectraOverlap`] when σ(A) and σ(S) come closer
    /// than the spectral-gap tolerance allows.
    pub fn new(s: &RealMatrix, a: &RealMatrix, tol: &Tolerances) -> Result<Self> {
        if !a.is_square() || !s.is_square() {
            return Err(Error::DimensionMismatch(
                "Sylvester coefficients A and S must be square".into(),
            ));
        }
        ensure_finite("A", a)?;
        ensure_finite("S", s)?;
        require_disjoint(a, s, tol)?;
        let (qa, ta) = schur_decompose("A", a)?;
        let (qs, ts) = schur_decompose("S", s)?;
        let blocks_a = quasi_blocks(&ta);
        let blocks_s = quasi_blocks(&ts);
        Ok(SylvesterSolver {
            qa,
            ta,
            qs,
            ts,
            blocks_a,
            blocks_s,
            tol: *tol,
        })
    }

    /// Dimension of the A side.
    pub fn dim_a(&self) -> usize {
        self.ta.nrows()
    }

    /// Dimension of the S side.
    pub fn dim_s(&self) -> usize {
        self.ts.nrows()
    }

    /// Solves for one right-hand side, verifying the relative residual.
    pub fn solve(&self, r: &RealMatrix) -> Result<RealMatrix> {
        let n = self.dim_a();
        let nu = self.dim_s();
        super::ensure_shape("R", r, n, nu)?;
        ensure_finite("R", r)?;

        // Transform into Schur coordinates: Y·Ts − Ta·Y = R̃.
        let r_tilde = self.qa.transpose() * r * &self.qs;
        let mut y = RealMatrix::zeros(n, nu);

        for (jstart, jw) in self.blocks_s.iter().copied() {
            // Column-block right-hand side with contributions of already
            // solved column blocks folded in:
            //   C[:,J] = R̃[:,J] − Y[:,<J]·Ts[<J,J]
            let mut c_j = r_tilde.columns(jstart, jw).into_owned();
            if jstart > 0 {
                let y_left = y.columns(0, jstart);
                let ts_block = self.ts.view((0, jstart), (jstart, jw));
                c_j -= y_left * ts_block;
            }
            let t_jj = self.ts.view((jstart, jstart), (jw, jw)).into_owned();

            // Within the column block, walk A's blocks bottom-up:
            //   Y[I,J]·Ts[J,J] − Ta[I,I]·Y[I,J]
            //     = C[I,J] + Σ_{K>I} Ta[I,K]·Y[K,J]
            for (istart, ih) in self.blocks_a.iter().rev().copied() {
                let below = istart + ih;
                let mut rhs = c_j.rows(istart, ih).into_owned();
                if below < n {
                    let ta_right = self.ta.view((istart, below), (ih, n - below));
                    let y_below = y.view((below, jstart), (n - below, jw));
                    rhs += ta_right * y_below;
                }
                let t_ii = self.ta.view((istart, istart), (ih, ih)).into_owned();

                // Small (ih·jw ≤ 4) dense system in vec form:
                //   (Ts[J,J]ᵀ ⊗ I − I ⊗ Ta[I,I])·vec(Y[I,J]) = vec(rhs)
                let coef = kron(&t_jj.transpose(), &RealMatrix::identity(ih, ih))
                    - kron(&RealMatrix::identity(jw, jw), &t_ii);
                let sol = coef.lu().solve(&vec_mat(&rhs)).ok_or(Error::IllConditioned {
                    residual: f64::INFINITY,
                    bound: self.tol.residual_rel,
                })?;
                let block = unvec(&sol, ih, jw)?;
                y.view_mut((istart, jstart), (ih, jw)).copy_from(&block);
            }
        }

        let pi = &self.qa * y * self.qs.transpose();
        let residual = (&pi * s_of(&self.qs, &self.ts) - a_of(&self.qa, &self.ta) * &pi - r).norm()
            / r.norm().max(1.0);
        if !residual.is_finite() || residual > self.tol.residual_rel {
            return Err(Error::IllConditioned {
                residual,
                bound: self.tol.residual_rel,
            });
        }
        Ok(pi)
    }
}

fn a_of(q: &RealMatrix, t: &RealMatrix) -> RealMatrix {
    q * t * q.transpose()
}

fn s_of(q: &RealMatrix, t: &RealMatrix) -> RealMatrix {
    q * t * q.transpose()
}

/// One-shot solve of `Π·S = A·Π + R` (Schur path).
pub fn solve_sylvester(
    s: &RealMatrix,
    a: &RealMatrix,
    r: &RealMatrix,
    tol: &Tolerances,
) -> Result<RealMatrix> {
    SylvesterSolver::new(s, a, tol)?.solve(r)
}

/// Dense Kronecker solve of `Π·S = A·Π + R`, for cross-checks and small
/// problems (`n·ν ≤ 400`).
///
/// Builds `(Sᵀ ⊗ I − I ⊗ A)·vec(Π) = vec(R)` explicitly and LU-solves it.
pub fn solve_sylvester_dense(
    s: &RealMatrix,
    a: &RealMatrix,
    r: &RealMatrix,
    tol: &Tolerances,
) -> Result<RealMatrix> {
    if !a.is_square() || !s.is_square() {
        return Err(Error::DimensionMismatch(
            "Sylvester coefficients A and S must be square".into(),
        ));
    }
    let n = a.nrows();
    let nu = s.nrows();
    super::ensure_shape("R", r, n, nu)?;
    if n * nu > DENSE_LIMIT {
        return Err(Error::ConfigMismatch(format!(
            "dense Sylvester path accepts n·ν ≤ {DENSE_LIMIT}, got {}",
            n * nu
        )));
    }
    ensure_finite("A", a)?;
    ensure_finite("S", s)?;
    ensure_finite("R", r)?;
    require_disjoint(a, s, tol)?;

    let eye_n = RealMatrix::identity(n, n);
    let eye_nu = RealMatrix::identity(nu, nu);
    let coef = kron(&s.transpose(), &eye_n) - kron(&eye_nu, a);
    let sol = coef
        .lu()
        .solve(&vec_mat(r))
        .ok_or_else(|| Error::NumericalFailure("dense Sylvester system is singular".into()))?;
    let pi = unvec(&sol, n, nu)?;
    let residual = (&pi * s - a * &pi - r).norm() / r.norm().max(1.0);
    if !residual.is_finite() || residual > tol.residual_rel {
        return Err(Error::IllConditioned {
            residual,
            bound: tol.residual_rel,
        });
    }
    Ok(pi)
}
