//! Constructive synthesis of moment-assigning stabilizing compensators.
//!
//! The synthesis route: embed the target moment into a canonical compensator
//! skeleton, stabilize the associated augmented system with observer-based
//! output feedback (two Riccati designs), and flatten the result into a
//! plain `(F, G, H)` realization. The reverse route, [`canonicalize`],
//! recovers the canonical parameters from any minimal moment-assigning
//! compensator by a rank-revealing change of coordinates.

pub mod riccati;

use crate::linalg::{
    complexify, from_blocks, rank_and_range, ComplexMatrix, RealMatrix,
    Spectrum, Tolerances,
};
use crate::moment::{
    closed_loop_matrices, closed_loop_moment, open_loop_moment, Compensator, Plant,
    SignalGenerator,
};
use crate::{Error, Result};
use num_complex::Complex;
pub use riccati::{feedback_gain, solve_care};

/// The structured compensator: a ν-dimensional moment-carrying block
/// (state ξ_a, parameters `S`, `M_des`, `M_c`, `G_a`, `F_a`) plus a
/// stabilizing residual block (state ξ_b, parameters `F_b`, `G_b`, `H_b`).
#[derive(Debug, Clone)]
pub struct CanonicalCompensator {
    pub s: RealMatrix,
    /// The moment embedded in the structure (the closed loop will carry
    /// exactly this moment when the assignment is exact).
    pub m_des: RealMatrix,
    pub m_c: RealMatrix,
    pub f_a: RealMatrix,
    pub f_b: RealMatrix,
    pub g_a: RealMatrix,
    pub g_b: RealMatrix,
    pub h_b: RealMatrix,
    /// Total order ρ = ν + dim(ξ_b).
    pub rho: usize,
}

impl CanonicalCompensator {
    /// Validates all block dimensions against each other.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        s: RealMatrix,
        m_des: RealMatrix,
        m_c: RealMatrix,
        f_a: RealMatrix,
        f_b: RealMatrix,
        g_a: RealMatrix,
        g_b: RealMatrix,
        h_b: RealMatrix,
    ) -> Result<CanonicalCompensator> {
        if !s.is_square() {
            return Err(Error::DimensionMismatch("`S` must be square".into()));
        }
        let nu = s.nrows();
        let p = m_des.nrows();
        let m = m_c.nrows();
        let b_dim = f_b.nrows();
        let checks = [
            ("M_des", m_des.shape(), (p, nu)),
            ("M_c", m_c.shape(), (m, nu)),
            ("F_a", f_a.shape(), (nu, b_dim)),
            ("F_b", f_b.shape(), (b_dim, b_dim)),
            ("G_a", g_a.shape(), (nu, p)),
            ("G_b", g_b.shape(), (b_dim, p)),
            ("H_b", h_b.shape(), (m, b_dim)),
        ];
        for (label, got, want) in checks {
            if got != want {
                return Err(Error::DimensionMismatch(format!(
                    "`{label}` must be {}x{}, got {}x{}",
                    want.0, want.1, got.0, got.1
                )));
            }
        }
        let rho = nu + b_dim;
        Ok(CanonicalCompensator {
            s,
            m_des,
            m_c,
            f_a,
            f_b,
            g_a,
            g_b,
            h_b,
            rho,
        })
    }

    /// Generator dimension ν (the ξ_a block size).
    pub fn nu(&self) -> usize {
        self.s.nrows()
    }

    /// Flattens to a plain realization:
    /// `F = [[S − G_a·M_des, F_a], [−G_b·M_des, F_b]]`,
    /// `G = [G_a; G_b]`, `H = [M_c, H_b]`.
    pub fn flatten(&self) -> Result<Compensator> {
        let nu = self.nu();
        let b_dim = self.f_b.nrows();
        let top_left = &self.s - &self.g_a * &self.m_des;
        if b_dim == 0 {
            return Compensator::new(top_left, self.g_a.clone(), self.m_c.clone());
        }
        let bottom_left = -(&self.g_b * &self.m_des);
        let f = from_blocks(&[
            vec![&top_left, &self.f_a],
            vec![&bottom_left, &self.f_b],
        ])?;
        let g = from_blocks(&[vec![&self.g_a], vec![&self.g_b]])?;
        let h = from_blocks(&[vec![&self.m_c, &self.h_b]])?;
        debug_assert_eq!(f.nrows(), nu + b_dim);
        Compensator::new(f, g, h)
    }
}

/// The augmented system whose output-feedback stabilization yields the
/// compensator's residual block. Carries the data it was built from so the
/// downstream assembly has everything it needs.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    /// `[[A, B·M_c], [G_a·C, S − G_a·(M_des − D·M_c)]]`, (n+ν)×(n+ν).
    pub a_aug: RealMatrix,
    /// `[[B, 0], [G_a·D, I_ν]]`, (n+ν)×(m+ν).
    pub b_aug: RealMatrix,
    /// `[C, −(M_des − D·M_c)]`, p×(n+ν).
    pub c_aug: RealMatrix,
    pub s: RealMatrix,
    pub m_des: RealMatrix,
    pub m_c: RealMatrix,
    pub g_a: RealMatrix,
}

/// Assembles the augmented system from the plant, generator, target moment,
/// compensator moment, and the free injection gain `G_a` (any value is
/// valid; zero keeps the blocks triangular).
pub fn build_augmented(
    plant: &Plant,
    gen: &SignalGenerator,
    m_des: &RealMatrix,
    m_c: &RealMatrix,
    g_a: &RealMatrix,
) -> Result<AugmentedSystem> {
    let (n, m, p, nu) = (plant.n(), plant.m(), plant.p_dim(), gen.nu());
    crate::linalg::ensure_shape("M_des", m_des, p, nu)?;
    crate::linalg::ensure_shape("M_c", m_c, m, nu)?;
    crate::linalg::ensure_shape("G_a", g_a, nu, p)?;
    crate::linalg::ensure_finite("M_des", m_des)?;
    crate::linalg::ensure_finite("M_c", m_c)?;
    crate::linalg::ensure_finite("G_a", g_a)?;

    let residual_map = m_des - plant.d() * m_c; // M_des − D·M_c, p×ν
    let b_mc = plant.b() * m_c;
    let ga_c = g_a * plant.c();
    let s_block = gen.s() - g_a * &residual_map;
    let a_aug = from_blocks(&[vec![plant.a(), &b_mc], vec![&ga_c, &s_block]])?;

    let zeros_top = RealMatrix::zeros(n, nu);
    let ga_d = g_a * plant.d();
    let eye_nu = RealMatrix::identity(nu, nu);
    let b_aug = from_blocks(&[vec![plant.b(), &zeros_top], vec![&ga_d, &eye_nu]])?;

    let neg_residual = -&residual_map;
    let c_aug = from_blocks(&[vec![plant.c(), &neg_residual]])?;

    Ok(AugmentedSystem {
        a_aug,
        b_aug,
        c_aug,
        s: gen.s().clone(),
        m_des: m_des.clone(),
        m_c: m_c.clone(),
        g_a: g_a.clone(),
    })
}

/// PBH eigenvalue test shared by stabilizability and detectability:
/// for each eigenvalue of `A` with real part ≥ `cutoff_re`, checks that
/// `[A − λI, B]` has full row rank.
fn pbh_core(
    a: &RealMatrix,
    b: &RealMatrix,
    cutoff_re: f64,
    tol: &Tolerances,
) -> Result<(bool, Vec<Complex<f64>>)> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("`A` must be square".into()));
    }
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "`B` must have {n} rows, got {}",
            b.nrows()
        )));
    }
    let spec = Spectrum::of(a)?;
    let scale = 1.0 + spec.spectral_radius();
    let a_c = complexify(a);
    let b_c = complexify(b);
    let mut offending = Vec::new();
    for (lam, _) in spec.clustered(tol.spectral_gap * scale) {
        if lam.re < cutoff_re {
            continue;
        }
        let mut pencil = ComplexMatrix::zeros(n, n + b.ncols());
        pencil.view_mut((0, 0), (n, n)).copy_from(&a_c);
        for i in 0..n {
            pencil[(i, i)] -= lam;
        }
        pencil.view_mut((0, n), (n, b.ncols())).copy_from(&b_c);
        // Rank with a scale floor: pencil rows live on the scale of the
        // system data, so a pencil that is numerically zero (all noise)
        // must count as rank-deficient rather than full-rank noise.
        let svd = crate::linalg::verified_svd_complex(&pencil)?;
        let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let threshold = tol.rank_threshold(n, n + b.ncols(), sigma_max.max(1.0));
        let rank = svd.singular_values.iter().filter(|&&s| s > threshold).count();
        if rank < n {
            offending.push(lam);
        }
    }
    Ok((offending.is_empty(), offending))
}

/// PBH stabilizability of `(A, B)`: every eigenvalue of `A` in the closed
/// right half-plane (with `spectral_gap` slack) must be controllable.
/// Returns the verdict and the uncontrollable unstable eigenvalues.
pub fn pbh_stabilizable(
    a: &RealMatrix,
    b: &RealMatrix,
    tol: &Tolerances,
) -> Result<(bool, Vec<Complex<f64>>)> {
    pbh_core(a, b, -tol.spectral_gap, tol)
}

/// PBH detectability of `(C, A)`: dual of [`pbh_stabilizable`].
pub fn pbh_detectable(
    c: &RealMatrix,
    a: &RealMatrix,
    tol: &Tolerances,
) -> Result<(bool, Vec<Complex<f64>>)> {
    pbh_core(&a.transpose(), &c.transpose(), -tol.spectral_gap, tol)
}

/// Which precondition an offending eigenvalue violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityTest {
    PlantStabilizability,
    PlantDetectability,
    MomentPairDetectability,
}

impl std::fmt::Display for StabilityTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StabilityTest::PlantStabilizability => "plant stabilizability (A, B)",
            StabilityTest::PlantDetectability => "plant detectability (C, A)",
            StabilityTest::MomentPairDetectability => "moment-pair detectability (M_open, S)",
        };
        f.write_str(s)
    }
}

/// The three structural conditions that together decide whether a
/// stabilizing moment-assigning compensator exists.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub plant_stabilizable: bool,
    pub plant_detectable: bool,
    pub moment_pair_detectable: bool,
    /// Eigenvalues failing a test, labeled with which test.
    pub offending_eigenvalues: Vec<(Complex<f64>, StabilityTest)>,
}

impl StabilityReport {
    /// True exactly when all three conditions hold.
    pub fn synthesizable(&self) -> bool {
        self.plant_stabilizable && self.plant_detectable && self.moment_pair_detectable
    }
}

/// Runs the three PBH tests: `(A, B)` stabilizable, `(C, A)` detectable,
/// and `(M_open, S)` detectable (the open-loop moment paired with the
/// generator).
pub fn stability_report(
    plant: &Plant,
    gen: &SignalGenerator,
    tol: &Tolerances,
) -> Result<StabilityReport> {
    let (stab, off_stab) = pbh_stabilizable(plant.a(), plant.b(), tol)?;
    let (det, off_det) = pbh_detectable(plant.c(), plant.a(), tol)?;
    let (m_open, _) = open_loop_moment(plant, gen, tol)?;
    let (pair, off_pair) = pbh_detectable(&m_open.value, gen.s(), tol)?;
    let mut offending = Vec::new();
    offending.extend(off_stab.into_iter().map(|l| (l, StabilityTest::PlantStabilizability)));
    offending.extend(off_det.into_iter().map(|l| (l, StabilityTest::PlantDetectability)));
    offending.extend(
        off_pair
            .into_iter()
            .map(|l| (l, StabilityTest::MomentPairDetectability)),
    );
    Ok(StabilityReport {
        plant_stabilizable: stab,
        plant_detectable: det,
        moment_pair_detectable: pair,
        offending_eigenvalues: offending,
    })
}

/// Design knobs for [`design_stabilizer`]. All weights default to identity;
/// `decay` ≥ 0 prescribes a minimum decay rate (both design spectra are
/// pushed left of `−decay`).
#[derive(Debug, Clone, Default)]
pub struct StabilizerParams {
    pub state_weight: Option<RealMatrix>,
    pub input_weight: Option<RealMatrix>,
    pub process_weight: Option<RealMatrix>,
    pub measurement_weight: Option<RealMatrix>,
    pub decay: f64,
}

/// Designs the stabilizing gains for the augmented system: a state feedback
/// `K` with `A_aug − B_aug·K` Hurwitz and an output injection `L_obs` with
/// `A_aug − L_obs·C_aug` Hurwitz, from two Riccati solves (shifted by
/// `decay` when a margin is prescribed).
pub fn design_stabilizer(
    aug: &AugmentedSystem,
    params: &StabilizerParams,
    tol: &Tolerances,
) -> Result<(RealMatrix, RealMatrix)> {
    let n_aug = aug.a_aug.nrows();
    let m_aug = aug.b_aug.ncols();
    let p = aug.c_aug.nrows();
    if !params.decay.is_finite() || params.decay < 0.0 {
        return Err(Error::ConfigMismatch(
            "decay rate must be finite and nonnegative".into(),
        ));
    }
    let resolve = |w: &Option<RealMatrix>, dim: usize, label: &str| -> Result<RealMatrix> {
        match w {
            Some(mat) => {
                crate::linalg::ensure_shape(label, mat, dim, dim)?;
                Ok(mat.clone())
            }
            None => Ok(RealMatrix::identity(dim, dim)),
        }
    };
    let q_state = resolve(&params.state_weight, n_aug, "state_weight")?;
    let r_input = resolve(&params.input_weight, m_aug, "input_weight")?;
    let w_process = resolve(&params.process_weight, n_aug, "process_weight")?;
    let v_measure = resolve(&params.measurement_weight, p, "measurement_weight")?;

    // PBH preconditions, shifted when a decay margin is prescribed: modes
    // right of −decay must be controllable / observable.
    let cutoff = -params.decay - tol.spectral_gap;
    let (stab, off_stab) = pbh_core(&aug.a_aug, &aug.b_aug, cutoff, tol)?;
    if !stab {
        return Err(Error::NotStabilizable(off_stab));
    }
    let (det, off_det) = pbh_core(&aug.a_aug.transpose(), &aug.c_aug.transpose(), cutoff, tol)?;
    if !det {
        return Err(Error::NotDetectable(off_det));
    }

    let shifted = &aug.a_aug + RealMatrix::identity(n_aug, n_aug) * params.decay;
    let x = solve_care(&shifted, &aug.b_aug, &q_state, &r_input, tol)?;
    let k = feedback_gain(&aug.b_aug, &r_input, &x)?;

    let shifted_t = shifted.transpose();
    let c_t = aug.c_aug.transpose();
    let y = solve_care(&shifted_t, &c_t, &w_process, &v_measure, tol)?;
    // L_obs = Y·C_augᵀ·V⁻¹, via a solve on Vᵀ = V.
    let cy = &aug.c_aug * &y; // p×n_aug
    let l_obs = v_measure
        .clone()
        .lu()
        .solve(&cy)
        .ok_or_else(|| Error::RiccatiFailure("measurement weight is singular".into()))?
        .transpose();

    // Verify the postcondition by eigensolve.
    let reg_spec = Spectrum::of(&(&aug.a_aug - &aug.b_aug * &k))?;
    let obs_spec = Spectrum::of(&(&aug.a_aug - &l_obs * &aug.c_aug))?;
    for (label, spec) in [("state-feedback", &reg_spec), ("observer", &obs_spec)] {
        if spec.abscissa() >= -tol.spectral_gap {
            return Err(Error::RiccatiFailure(format!(
                "{label} design matrix is not Hurwitz (abscissa {:.3e})",
                spec.abscissa()
            )));
        }
    }
    Ok((k, l_obs))
}

/// Assembles the canonical compensator from the stabilizer gains:
/// `−K = [H_b; F_a]` partitioned by rows (first m, last ν),
/// `G_b = L_obs`, and `F_b = (A_aug − B_aug·K − L_obs·C_aug) − G_b·D·H_b`.
/// Returns the structured form and its flat realization.
pub fn assemble_compensator(
    aug: &AugmentedSystem,
    k: &RealMatrix,
    l_obs: &RealMatrix,
    plant_d: &RealMatrix,
) -> Result<(CanonicalCompensator, Compensator)> {
    let nu = aug.s.nrows();
    let p = aug.c_aug.nrows();
    let n_aug = aug.a_aug.nrows();
    let m = aug.b_aug.ncols() - nu;
    crate::linalg::ensure_shape("K", k, m + nu, n_aug)?;
    crate::linalg::ensure_shape("L_obs", l_obs, n_aug, p)?;
    crate::linalg::ensure_shape("D", plant_d, p, m)?;

    let minus_k = -k;
    let h_b = minus_k.rows(0, m).into_owned();
    let f_a = minus_k.rows(m, nu).into_owned();
    let g_b = l_obs.clone();
    let f_bar_b = &aug.a_aug - &aug.b_aug * k - l_obs * &aug.c_aug;
    let f_b = &f_bar_b - &g_b * plant_d * &h_b;

    let canonical = CanonicalCompensator::new(
        aug.s.clone(),
        aug.m_des.clone(),
        aug.m_c.clone(),
        f_a,
        f_b,
        aug.g_a.clone(),
        g_b,
        h_b,
    )?;
    let flat = canonical.flatten()?;
    Ok((canonical, flat))
}

/// Recovers canonical parameters from an arbitrary minimal moment-assigning
/// compensator: solves the joint Sylvester equation for the compensator's
/// moment-carrying subspace `Π_ξ`, rank-factorizes it, rotates the
/// compensator into coordinates splitting that subspace off, and reads the
/// canonical blocks from the rotated matrices.
///
/// The result is verified before it is returned: its flat realization must
/// reproduce the original closed-loop moment, and — when the subspace has
/// full dimension ν, so the two realizations have equal order — the
/// closed-loop spectra must agree as multisets.
pub fn canonicalize(
    plant: &Plant,
    gen: &SignalGenerator,
    comp: &Compensator,
    m_des: &RealMatrix,
    tol: &Tolerances,
) -> Result<CanonicalCompensator> {
    let nu = gen.nu();
    crate::linalg::ensure_shape("M_des", m_des, plant.p_dim(), nu)?;
    let (m_cl, m_c, _, pi_xi) = closed_loop_moment(plant, gen, comp, tol)?;
    let deviation = (&m_cl.value - m_des).norm();
    if deviation > tol.residual_rel * (1.0 + m_des.norm()) {
        return Err(Error::NotMomentAssigning { deviation });
    }

    // Rank decision on Π_ξ with a guard band: the construction is
    // discontinuous in rank, so a singular value sitting near the threshold
    // is refused rather than silently classified.
    let rho = comp.rho();
    let svd = crate::linalg::verified_svd(&pi_xi)?;
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let threshold = tol.rank_threshold(rho, nu, sigma_max);
    for &sigma in svd.singular_values.iter() {
        if sigma > threshold / 10.0 && sigma < threshold * 10.0 {
            return Err(Error::RankDeficiencyAmbiguous { sigma, threshold });
        }
    }
    let (nu_bar, u1, _) = rank_and_range(&pi_xi, tol)?;
    let (_, _, u2) = rank_and_range(&pi_xi.transpose(), tol)?;
    debug_assert_eq!(u1.ncols(), nu_bar);
    debug_assert_eq!(u2.ncols(), rho - nu_bar);

    // Rotated compensator blocks: the first ν̄ coordinates carry the
    // moment subspace, the rest are the residual block.
    let b_dim = rho - nu_bar;
    let f_bar_ab = u1.transpose() * comp.f() * &u2; // ν̄×b
    let f_bar_bb = u2.transpose() * comp.f() * &u2; // b×b
    let g_bar_a = u1.transpose() * comp.g(); // ν̄×p
    let g_bar_b = u2.transpose() * comp.g(); // b×p
    let h_bar_b = comp.h() * &u2; // m×b
    let pi_bar = u1.transpose() * &pi_xi; // ν̄×ν, full row rank

    // Right inverse Π̄⁺ = Π̄ᵀ(Π̄·Π̄ᵀ)⁻¹, lifting ν̄-row blocks to ν rows.
    let gram = &pi_bar * pi_bar.transpose();
    let gram_inv = gram.lu().try_inverse().ok_or_else(|| {
        Error::NumericalFailure("moment-subspace factor lost rank during inversion".into())
    })?;
    let pinv_pi_bar = pi_bar.transpose() * gram_inv; // ν×ν̄

    let f_a = &pinv_pi_bar * f_bar_ab; // ν×b
    let g_a = &pinv_pi_bar * g_bar_a; // ν×p
    let canonical = CanonicalCompensator::new(
        gen.s().clone(),
        m_cl.value.clone(),
        m_c.value.clone(),
        f_a,
        f_bar_bb,
        g_a,
        g_bar_b,
        h_bar_b,
    )?;

    // Verification: the canonical realization must carry the same moment...
    let flat = canonical.flatten()?;
    let (m_cl_canon, _, _, _) = closed_loop_moment(plant, gen, &flat, tol)?;
    let moment_gap = (&m_cl_canon.value - &m_cl.value).norm();
    if moment_gap > tol.residual_rel * 10.0 * (1.0 + m_cl.value.norm()) {
        return Err(Error::NumericalFailure(format!(
            "canonical parameters fail to reproduce the closed-loop moment (gap {moment_gap:.3e})"
        )));
    }
    // ...and, at equal order (ν̄ = ν so the coordinate change is a
    // similarity), the same closed-loop spectrum.
    if nu_bar == nu {
        debug_assert_eq!(canonical.rho, rho);
        let orig_cl = closed_loop_matrices(plant, comp)?;
        let canon_cl = closed_loop_matrices(plant, &flat)?;
        let spec_orig = Spectrum::of(&orig_cl.a_cl)?;
        let spec_canon = Spectrum::of(&canon_cl.a_cl)?;
        let dist = spec_orig.multiset_distance(&spec_canon);
        let scale = 1.0 + spec_orig.spectral_radius();
        if dist > 1e-6 * scale {
            return Err(Error::NumericalFailure(format!(
                "canonical realization changed the closed-loop spectrum (distance {dist:.3e})"
            )));
        }
        let _ = b_dim;
    }
    Ok(canonical)
}
