//! Moment assignment: deciding whether a desired closed-loop moment is
//! reachable and computing the compensator moment that reaches it (or comes
//! closest in least squares).
//!
//! The closed-loop moment decomposes as `M_cl = M_open + T(M_c)` where `T`
//! is the plant's moment transfer operator at the generator. Assignment is
//! therefore a linear problem in `vec(M_c)` against the dense form of `T`.

use crate::linalg::{vec_mat, RealMatrix, Tolerances};
use crate::moment::{
    open_loop_moment, transfer_apply, transfer_matrix, MomentKind, MomentMatrix, Plant,
    SignalGenerator, TransferMethod,
};
use crate::{Error, Result};
use nalgebra::DVector;

/// A desired-moment assignment problem. `weight`, when present, is a
/// positive diagonal weight on the coordinates of `vec(M_des − M_open)`,
/// biasing the least-squares fit toward selected moment entries.
#[derive(Debug, Clone)]
pub struct AssignmentProblem {
    pub plant: Plant,
    pub gen: SignalGenerator,
    pub m_des: MomentMatrix,
    pub weight: Option<DVector<f64>>,
}

impl AssignmentProblem {
    /// Validates `M_des` (p×ν) and the optional weight vector (length p·ν,
    /// strictly positive, finite).
    pub fn new(
        plant: Plant,
        gen: SignalGenerator,
        m_des: RealMatrix,
        weight: Option<DVector<f64>>,
    ) -> Result<AssignmentProblem> {
        if gen.q_dim() != plant.q_dim() {
            return Err(Error::DimensionMismatch(format!(
                "generator output dimension {} does not match plant disturbance dimension {}",
                gen.q_dim(),
                plant.q_dim()
            )));
        }
        let (p, nu) = (plant.p_dim(), gen.nu());
        if m_des.nrows() != p || m_des.ncols() != nu {
            return Err(Error::DimensionMismatch(format!(
                "`M_des` must be {p}x{nu}, got {}x{}",
                m_des.nrows(),
                m_des.ncols()
            )));
        }
        if !m_des.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("M_des".into()));
        }
        if let Some(w) = &weight {
            if w.len() != p * nu {
                return Err(Error::DimensionMismatch(format!(
                    "weight vector must have length {}, got {}",
                    p * nu,
                    w.len()
                )));
            }
            if !w.iter().all(|&x| x.is_finite() && x > 0.0) {
                return Err(Error::ConfigMismatch(
                    "weights must be finite and strictly positive".into(),
                ));
            }
        }
        Ok(AssignmentProblem {
            plant,
            gen,
            m_des: MomentMatrix::new(m_des, MomentKind::Desired),
            weight,
        })
    }
}

/// Result of [`solve_moment`].
#[derive(Debug, Clone)]
pub struct AssignmentSolution {
    /// The (weighted) least-squares, minimum-norm compensator moment.
    pub m_c: MomentMatrix,
    /// True when the achieved moment matches `M_des` within tolerance.
    pub exact: bool,
    /// Least-squares residual `‖T·vec(M_c) − vec(ΔM)‖` in the weighted
    /// metric when a weight is present, Euclidean otherwise.
    pub residual: f64,
    /// The moment the closed loop will actually carry:
    /// `M_open + T(M_c)`, recomputed through the operator's definition.
    pub m_des_effective: RealMatrix,
}

/// Minimum-norm least-squares solve via SVD with rank truncation at
/// `rank_rel · max_dim · max(σ_max, 1)` (the scale floor keeps a
/// noise-level operator from being treated as invertible).
fn pinv_solve(t: &RealMatrix, b: &DVector<f64>, tol: &Tolerances) -> Result<(DVector<f64>, usize)> {
    let svd = crate::linalg::verified_svd(t)?;
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let threshold = tol.rank_threshold(t.nrows(), t.ncols(), sigma_max.max(1.0));
    let u = &svd.u;
    let v_t = &svd.v_t;
    let mut x = DVector::zeros(t.ncols());
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > threshold {
            rank += 1;
            let coef = u.column(i).dot(b) / s;
            x += v_t.row(i).transpose() * coef;
        }
    }
    Ok((x, rank))
}

/// Assembles the shared pieces: open-loop moment, dense transfer operator,
/// and the gap `ΔM = M_des − M_open`.
fn problem_data(
    problem: &AssignmentProblem,
    tol: &Tolerances,
) -> Result<(MomentMatrix, RealMatrix, RealMatrix)> {
    let (m_open, _) = open_loop_moment(&problem.plant, &problem.gen, tol)?;
    let op = transfer_matrix(
        &problem.plant,
        problem.gen.s(),
        TransferMethod::BasisProbe,
        tol,
    )?;
    let delta = &problem.m_des.value - &m_open.value;
    Ok((m_open, op.matrix_form, delta))
}

/// Decides assignability. Returns `(assignable, ΔM, range_defect)` where
/// `range_defect` is the Euclidean distance from `vec(ΔM)` to the range of
/// the transfer operator; assignable means that distance is below the rank
/// tolerance of the operator, scaled by `(1 + ‖ΔM‖)`.
pub fn check_assignable(
    problem: &AssignmentProblem,
    tol: &Tolerances,
) -> Result<(bool, RealMatrix, f64)> {
    let (_, t, delta) = problem_data(problem, tol)?;
    let b = vec_mat(&delta);
    let (x, _) = pinv_solve(&t, &b, tol)?;
    let defect = (&t * &x - &b).norm();
    let sigma_max = crate::linalg::verified_svd(&t)?
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let threshold = tol.rank_threshold(t.nrows(), t.ncols(), sigma_max.max(1.0))
        * (1.0 + delta.norm());
    Ok((defect <= threshold, delta, defect))
}

/// Computes the minimum-norm (weighted) least-squares compensator moment
/// for the problem, together with the moment the closed loop will actually
/// achieve and whether that matches the request.
pub fn solve_moment(problem: &AssignmentProblem, tol: &Tolerances) -> Result<AssignmentSolution> {
    let (m_open, t, delta) = problem_data(problem, tol)?;
    let b = vec_mat(&delta);
    let (x, residual) = match &problem.weight {
        Some(w) => {
            let sqrt_w: Vec<f64> = w.iter().map(|&wi| wi.sqrt()).collect();
            let mut tw = t.clone();
            let mut bw = b.clone();
            for (i, &swi) in sqrt_w.iter().enumerate() {
                tw.row_mut(i).scale_mut(swi);
                bw[i] *= swi;
            }
            let (x, _) = pinv_solve(&tw, &bw, tol)?;
            let residual = (&tw * &x - &bw).norm();
            (x, residual)
        }
        None => {
            let (x, _) = pinv_solve(&t, &b, tol)?;
            let residual = (&t * &x - &b).norm();
            (x, residual)
        }
    };
    let m_c = crate::linalg::unvec(&x, problem.plant.m(), problem.gen.nu())?;
    // Recompute the achieved moment through the operator's definition (a
    // Sylvester solve), independent of the dense matrix used for the fit.
    let lifted = transfer_apply(&problem.plant, problem.gen.s(), &m_c, tol)?;
    let m_des_effective = &m_open.value + lifted;
    let gap = (&m_des_effective - &problem.m_des.value).norm();
    let exact = gap <= tol.residual_rel * (1.0 + problem.m_des.value.norm());
    Ok(AssignmentSolution {
        m_c: MomentMatrix::new(m_c, MomentKind::Compensator),
        exact,
        residual,
        m_des_effective,
    })
}

/// Checks whether a solution satisfies the output-regulation equations
/// `Π·S = A·Π + B·M_c + P`, `C·Π + D·M_c + Q = 0`.
///
/// This is only meaningful when the generator feeds the plant directly
/// (`L = I`, which requires q = ν); other configurations are rejected with
/// [`Error::ConfigMismatch`]. A well-formed solution that simply does not
/// regulate (nonzero steady-state output) returns `Ok(false)`.
pub fn regulator_equations_check(
    plant: &Plant,
    gen: &SignalGenerator,
    solution: &AssignmentSolution,
    tol: &Tolerances,
) -> Result<bool> {
    let nu = gen.nu();
    if gen.q_dim() != nu {
        return Err(Error::ConfigMismatch(format!(
            "regulation check requires q = ν, got q = {}, ν = {}",
            gen.q_dim(),
            nu
        )));
    }
    let identity = RealMatrix::identity(nu, nu);
    if gen.l() != &identity {
        return Err(Error::ConfigMismatch(
            "regulation check requires the generator to feed the plant directly (L = I)".into(),
        ));
    }
    let m_c = &solution.m_c.value;
    if m_c.nrows() != plant.m() || m_c.ncols() != nu {
        return Err(Error::DimensionMismatch(format!(
            "solution moment must be {}x{nu}, got {}x{}",
            plant.m(),
            m_c.nrows(),
            m_c.ncols()
        )));
    }
    let rhs = plant.p_mat() + plant.b() * m_c;
    let pi = crate::linalg::solve_sylvester(gen.s(), plant.a(), &rhs, tol)?;
    let steady_output = plant.c() * &pi + plant.d() * m_c + plant.q_mat();
    let scale = 1.0 + plant.q_mat().norm() + m_c.norm() + pi.norm();
    Ok(steady_output.norm() <= tol.residual_rel * scale)
}
