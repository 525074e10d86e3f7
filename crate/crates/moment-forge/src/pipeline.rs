//! Pipeline stages shared by the CLI and the embedded demo:
//! analyze → assign → synthesize → simulate. Each stage returns a typed
//! outcome and knows how to append itself to a [`RunReport`].

use crate::assign::{solve_moment, AssignmentProblem, AssignmentSolution};
use crate::linalg::{spectra_disjoint, RealMatrix, Spectrum, Tolerances};
use crate::model::ModelParts;
use crate::moment::{
    closed_loop_moment, open_loop_moment, transfer_matrix, transfer_range_diagnostics,
    Compensator, TransferDiagnostics, TransferMethod,
};
use crate::report::{fmt_float, RunReport};
use crate::sim::{simulate, steady_state_error, ClosedLoopModel, Trajectory};
use crate::synth::{
    assemble_compensator, build_augmented, design_stabilizer, stability_report,
    CanonicalCompensator, StabilityReport, StabilizerParams,
};
use crate::{Error, Result};
use nalgebra::DVector;

/// Everything the analyze stage establishes about a model.
#[derive(Debug, Clone)]
pub struct AnalyzeOutcome {
    pub m_open: RealMatrix,
    /// Steady-state plant gain `Π` with `Π·S = A·Π + P·L`.
    pub pi: RealMatrix,
    pub plant_spectrum: Spectrum,
    pub gen_spectrum: Spectrum,
    /// Minimum distance between σ(A) and σ(S).
    pub spectral_gap: f64,
    pub diagnostics: TransferDiagnostics,
    pub stability: StabilityReport,
}

/// Computes the open-loop moment and every structural diagnostic that does
/// not need a desired moment.
pub fn run_analyze(parts: &ModelParts, tol: &Tolerances) -> Result<AnalyzeOutcome> {
    let plant = &parts.plant;
    let gen = &parts.gen;
    let plant_spectrum = Spectrum::of(plant.a())?;
    let gen_spectrum = Spectrum::of(gen.s())?;
    let (_, spectral_gap) = spectra_disjoint(plant.a(), gen.s(), tol)?;
    let (m_open, pi) = open_loop_moment(plant, gen, tol)?;
    let op = transfer_matrix(plant, gen.s(), TransferMethod::BasisProbe, tol)?;
    let diagnostics = transfer_range_diagnostics(&op, &gen_spectrum, plant, tol)?;
    let stability = stability_report(plant, gen, tol)?;
    Ok(AnalyzeOutcome {
        m_open: m_open.value,
        pi,
        plant_spectrum,
        gen_spectrum,
        spectral_gap,
        diagnostics,
        stability,
    })
}

impl AnalyzeOutcome {
    /// Appends the analysis section to a report.
    pub fn write_into(&self, rep: &mut RunReport) {
        rep.section("analysis");
        rep.matrix("M_open (open-loop moment)", &self.m_open);
        rep.spectrum("sigma(A)", self.plant_spectrum.eigenvalues());
        rep.spectrum("sigma(S)", self.gen_spectrum.eigenvalues());
        rep.scalar("spectral gap min|sigma(A) - sigma(S)|", self.spectral_gap);
        rep.diagnostics(&self.diagnostics);
        rep.stability(&self.stability);
    }
}

/// The assignment stage: desired moment, gap, and the solved compensator
/// moment.
#[derive(Debug, Clone)]
pub struct AssignOutcome {
    pub m_des: RealMatrix,
    pub delta_m: RealMatrix,
    pub solution: AssignmentSolution,
}

/// Solves for the compensator moment closing the gap `M_des − M_open`.
pub fn run_assign(
    parts: &ModelParts,
    m_open: &RealMatrix,
    m_des: &RealMatrix,
    tol: &Tolerances,
) -> Result<AssignOutcome> {
    let problem = AssignmentProblem::new(
        parts.plant.clone(),
        parts.gen.clone(),
        m_des.clone(),
        parts.weights.clone(),
    )?;
    let solution = solve_moment(&problem, tol)?;
    Ok(AssignOutcome {
        m_des: m_des.clone(),
        delta_m: m_des - m_open,
        solution,
    })
}

impl AssignOutcome {
    /// Appends the assignment section to a report.
    pub fn write_into(&self, rep: &mut RunReport) {
        rep.section("assignment");
        rep.matrix("M_des (desired moment)", &self.m_des);
        rep.assignment(&self.solution, &self.delta_m);
    }
}

/// Knobs for the synthesis stage.
#[derive(Debug, Clone, Default)]
pub struct SynthOptions {
    /// Generator-block injection gain `G_a` (ν×p); zero when omitted.
    pub g_a: Option<RealMatrix>,
    /// Stabilizer weights and decay margin.
    pub params: StabilizerParams,
    /// Refuse to synthesize when the assignment is only least-squares.
    pub require_exact: bool,
}

/// A synthesized compensator with its verification data.
#[derive(Debug, Clone)]
pub struct SynthesizeOutcome {
    pub canonical: CanonicalCompensator,
    pub flat: Compensator,
    /// The moment actually embedded: `M_open + T_S(M_c)`.
    pub target: RealMatrix,
    /// Closed-loop moment recomputed from the assembled loop.
    pub m_cl: RealMatrix,
    /// `‖M_cl − target‖` (Frobenius).
    pub deviation_from_target: f64,
    /// `‖M_cl − M_des‖` (Frobenius) against the requested moment.
    pub deviation_from_requested: f64,
    pub closed_spectrum: Spectrum,
    /// σ(A_aug − B_aug·K): the state-feedback design modes.
    pub state_spectrum: Spectrum,
    /// σ(A_aug − L_obs·C_aug): the observer design modes.
    pub observer_spectrum: Spectrum,
}

/// Synthesizes a stabilizing compensator realizing the assigned moment and
/// verifies the assembled loop end to end.
pub fn run_synthesize(
    parts: &ModelParts,
    assign: &AssignOutcome,
    opts: &SynthOptions,
    tol: &Tolerances,
) -> Result<SynthesizeOutcome> {
    if opts.require_exact && !assign.solution.exact {
        return Err(Error::NotAssignable {
            defect: assign.solution.residual,
        });
    }
    let plant = &parts.plant;
    let gen = &parts.gen;
    let (nu, p) = (gen.nu(), plant.p_dim());
    let g_a = match &opts.g_a {
        Some(m) => {
            crate::linalg::ensure_shape("G_a", m, nu, p)?;
            crate::linalg::ensure_finite("G_a", m)?;
            m.clone()
        }
        None => RealMatrix::zeros(nu, p),
    };
    // Embed the moment the loop will actually carry. For an exact
    // assignment this equals M_des up to solver roundoff; for a
    // least-squares assignment it is the nearest achievable moment.
    let target = assign.solution.m_des_effective.clone();
    let m_c = &assign.solution.m_c.value;
    let aug = build_augmented(plant, gen, &target, m_c, &g_a)?;
    let (k, l_obs) = design_stabilizer(&aug, &opts.params, tol)?;
    let (canonical, flat) = assemble_compensator(&aug, &k, &l_obs, plant.d())?;

    let state_matrix = &aug.a_aug - &aug.b_aug * &k;
    let observer_matrix = &aug.a_aug - &l_obs * &aug.c_aug;
    let state_spectrum = Spectrum::of(&state_matrix)?;
    let observer_spectrum = Spectrum::of(&observer_matrix)?;

    let cl = crate::moment::closed_loop_matrices(plant, &flat)?;
    let closed_spectrum = Spectrum::of(&cl.a_cl)?;
    let (m_cl, _, _, _) = closed_loop_moment(plant, gen, &flat, tol)?;
    let deviation_from_target = (&m_cl.value - &target).norm();
    let deviation_from_requested = (&m_cl.value - &assign.m_des).norm();
    Ok(SynthesizeOutcome {
        canonical,
        flat,
        target,
        m_cl: m_cl.value,
        deviation_from_target,
        deviation_from_requested,
        closed_spectrum,
        state_spectrum,
        observer_spectrum,
    })
}

impl SynthesizeOutcome {
    /// True when every closed-loop mode is strictly in the open left half
    /// plane.
    pub fn hurwitz(&self) -> bool {
        self.closed_spectrum.abscissa() < 0.0
    }

    /// Appends the synthesis section to a report.
    pub fn write_into(&self, rep: &mut RunReport) {
        rep.section("synthesis");
        rep.kv(
            "compensator order rho",
            &self.canonical.rho.to_string(),
        );
        rep.matrix("M_des_effective (embedded target)", &self.target);
        rep.spectrum("sigma(A_cl)", self.closed_spectrum.eigenvalues());
        rep.scalar("closed-loop spectral abscissa", self.closed_spectrum.abscissa());
        rep.flag("closed loop Hurwitz", self.hurwitz());
        rep.spectrum(
            "sigma(A_aug - B_aug K) (state design)",
            self.state_spectrum.eigenvalues(),
        );
        rep.spectrum(
            "sigma(A_aug - L_obs C_aug) (observer design)",
            self.observer_spectrum.eigenvalues(),
        );
        rep.matrix("M_cl (verified closed-loop moment)", &self.m_cl);
        rep.scalar("|M_cl - M_des_effective|", self.deviation_from_target);
        rep.scalar("|M_cl - M_des|", self.deviation_from_requested);
    }
}

/// Knobs for the simulation stage.
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub omega0: DVector<f64>,
    /// Initial plant state; zero when omitted.
    pub x0: Option<DVector<f64>>,
    /// Initial compensator state; zero when omitted.
    pub xi0: Option<DVector<f64>>,
    pub t_end: f64,
    pub dt: f64,
    /// Trailing fraction of the horizon used for steady-state metrics.
    pub window: f64,
}

/// A simulated trajectory with its steady-state metrics.
#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub trajectory: Trajectory,
    /// State partition `(ν, n, ρ)` for labeling columns.
    pub partition: (usize, usize, usize),
    pub max_tail_error: f64,
    pub rms_tail_error: f64,
    pub window: f64,
    pub t_end: f64,
    pub dt: f64,
}

/// Simulates the interconnection of the model with `comp`, measuring the
/// output against `reference · ω(t)`.
pub fn run_simulate(
    parts: &ModelParts,
    comp: &Compensator,
    reference: &RealMatrix,
    opts: &SimOptions,
) -> Result<SimulateOutcome> {
    let model = ClosedLoopModel::new(&parts.plant, &parts.gen, comp, reference)?;
    let (nu, n, rho) = model.partition();
    let zero_x = DVector::zeros(n);
    let zero_xi = DVector::zeros(rho);
    let x0 = opts.x0.as_ref().unwrap_or(&zero_x);
    let xi0 = opts.xi0.as_ref().unwrap_or(&zero_xi);
    let trajectory = simulate(&model, &opts.omega0, x0, xi0, opts.t_end, opts.dt)?;
    let (max_tail_error, rms_tail_error) = steady_state_error(&trajectory, opts.window)?;
    Ok(SimulateOutcome {
        trajectory,
        partition: (nu, n, rho),
        max_tail_error,
        rms_tail_error,
        window: opts.window,
        t_end: opts.t_end,
        dt: opts.dt,
    })
}

impl SimulateOutcome {
    /// Appends the simulation section to a report.
    pub fn write_into(&self, rep: &mut RunReport) {
        rep.section("simulation");
        rep.kv(
            "horizon",
            &format!(
                "t_end = {}, dt = {}, samples = {}",
                fmt_float(self.t_end),
                fmt_float(self.dt),
                self.trajectory.len()
            ),
        );
        rep.scalar("initial tracking error", self.trajectory.error[0]);
        rep.scalar(
            "final tracking error",
            *self.trajectory.error.last().unwrap_or(&f64::NAN),
        );
        rep.kv(
            "steady-state window",
            &format!("trailing {:.0}%", self.window * 100.0),
        );
        rep.scalar("steady-state max error", self.max_tail_error);
        rep.scalar("steady-state rms error", self.rms_tail_error);
    }
}
