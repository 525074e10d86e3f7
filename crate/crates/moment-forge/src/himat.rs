//! Embedded demo: moment-assigning tracking control of a 6-state
//! longitudinal aircraft model (HiMAT).
//!
//! The plant has two elevon/canard actuator lags at −30 rad/s, two
//! measured outputs (angle of attack and pitch attitude), and is unstable
//! (a complex pole pair at +0.69 ± 0.25i). The signal generator produces a
//! constant plus a 3 rad/s oscillation; the desired moment makes the
//! outputs track scaled copies of the oscillating exogenous states. All
//! demo defaults are fixed constants, so a demo run is fully reproducible.

use crate::linalg::{RealMatrix, Tolerances};
use crate::model::{ModelFile, ModelParts};
use crate::moment::{Plant, SignalGenerator};
use crate::pipeline::{
    run_analyze, run_assign, run_simulate, run_synthesize, AnalyzeOutcome, AssignOutcome,
    SimOptions, SimulateOutcome, SynthOptions, SynthesizeOutcome,
};
use crate::report::{fmt_float, RunReport};
use crate::synth::StabilizerParams;
use crate::{Error, Result};
use nalgebra::DVector;

/// Demo horizon [s].
pub const DEMO_T_END: f64 = 30.0;
/// Demo sample step [s].
pub const DEMO_DT: f64 = 1e-3;
/// Trailing fraction of the horizon used for steady-state metrics.
pub const DEMO_WINDOW: f64 = 0.2;
/// Prescribed closed-loop decay rate for the demo design.
pub const DEMO_DECAY: f64 = 1.0;
/// Pass threshold on the steady-state tracking error.
pub const DEMO_TAIL_TOL: f64 = 1e-6;

/// The 6-state airframe with elevon and canard actuators.
pub fn plant() -> Plant {
    let a = RealMatrix::from_row_slice(
        6,
        6,
        &[
            -2.26e-2, -3.66e1, -1.89e1, -3.21e1, 3.25e0, -7.6e-1, //
            9.3e-5, -1.90e0, 9.83e-1, -7.3e-4, -1.7e-1, -5.0e-3, //
            1.23e-2, 1.17e1, -2.63e0, 8.8e-4, -3.16e1, 2.24e1, //
            0.0, 0.0, 1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 0.0, -3.0e1, 0.0, //
            0.0, 0.0, 0.0, 0.0, 0.0, -3.0e1,
        ],
    );
    let b = RealMatrix::from_row_slice(
        6,
        2,
        &[
            0.0, 0.0, //
            0.0, 0.0, //
            0.0, 0.0, //
            0.0, 0.0, //
            30.0, 0.0, //
            0.0, 30.0,
        ],
    );
    let c = RealMatrix::from_row_slice(
        2,
        6,
        &[
            0.0, 1.0, 0.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
        ],
    );
    let d = RealMatrix::zeros(2, 2);
    let p = RealMatrix::from_row_slice(
        6,
        3,
        &[
            0.0, 0.0, 0.0, //
            1.0, 1.0, 0.0, //
            1.0, 0.0, 1.0, //
            0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0,
        ],
    );
    let q = RealMatrix::zeros(2, 3);
    Plant::new(a, b, c, d, p, q).expect("embedded plant data is consistent")
}

/// Exogenous generator: one constant mode and a 3 rad/s oscillator pair,
/// feeding the plant directly (`L = I`).
pub fn generator() -> SignalGenerator {
    let s = RealMatrix::from_row_slice(
        3,
        3,
        &[
            0.0, 0.0, 0.0, //
            0.0, 0.0, 3.0, //
            0.0, -3.0, 0.0,
        ],
    );
    let l = RealMatrix::identity(3, 3);
    SignalGenerator::new(s, l).expect("embedded generator data is consistent")
}

/// Desired moment: each output tracks a 0.1-scaled oscillator state.
pub fn m_des_track() -> RealMatrix {
    RealMatrix::from_row_slice(2, 3, &[0.0, 0.1, 0.0, 0.0, 0.0, 0.1])
}

/// Initial exogenous state for the demo simulation.
pub fn demo_omega0() -> DVector<f64> {
    DVector::from_row_slice(&[1.0, 1.0, 0.0])
}

/// The demo model as validated parts.
pub fn model_parts() -> ModelParts {
    ModelParts {
        plant: plant(),
        gen: generator(),
        m_des: Some(m_des_track()),
        weights: None,
    }
}

/// The demo model as a writable document (for emitting a fixture file).
pub fn model_file() -> ModelFile {
    let parts = model_parts();
    ModelFile::from_parts(&parts.plant, &parts.gen, parts.m_des.as_ref(), None)
}

/// Which desired moment the demo pipeline runs against.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum DemoTarget {
    /// The tracking moment shipped with the demo.
    #[default]
    Track,
    /// `M_des = 0`: output regulation (the loop drives `y → 0`).
    Zero,
    /// `M_des = M_open`: pure interpolation, `M_c = 0`.
    Open,
    /// A caller-supplied moment.
    Custom(RealMatrix),
}

/// Demo defaults for the synthesis stage: zero `G_a`, identity weights,
/// decay margin [`DEMO_DECAY`].
pub fn demo_synth_options() -> SynthOptions {
    SynthOptions {
        g_a: None,
        params: StabilizerParams {
            decay: DEMO_DECAY,
            ..Default::default()
        },
        require_exact: false,
    }
}

/// Demo defaults for the simulation stage: zero plant and compensator
/// state, `ω₀ = (1, 1, 0)`.
pub fn demo_sim_options() -> SimOptions {
    SimOptions {
        omega0: demo_omega0(),
        x0: None,
        xi0: None,
        t_end: DEMO_T_END,
        dt: DEMO_DT,
        window: DEMO_WINDOW,
    }
}

/// Every stage outcome of a demo run plus the pass/fail verdicts.
#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub target: DemoTarget,
    pub analyze: AnalyzeOutcome,
    pub assign: AssignOutcome,
    pub synthesize: SynthesizeOutcome,
    pub simulate: SimulateOutcome,
    /// Regulation-equations verdict; only computed for [`DemoTarget::Zero`].
    pub regulation_check: Option<bool>,
}

impl DemoOutcome {
    /// Closed loop is Hurwitz.
    pub fn hurwitz_ok(&self) -> bool {
        self.synthesize.hurwitz()
    }

    /// Assignment was exact.
    pub fn exact_ok(&self) -> bool {
        self.assign.solution.exact
    }

    /// Steady-state tail error is below [`DEMO_TAIL_TOL`].
    pub fn tail_ok(&self) -> bool {
        self.simulate.max_tail_error <= DEMO_TAIL_TOL
    }

    /// Regulation equations hold (vacuously true outside the zero variant).
    pub fn regulation_ok(&self) -> bool {
        self.regulation_check.unwrap_or(true)
    }

    /// All demo thresholds met.
    pub fn pass(&self) -> bool {
        self.hurwitz_ok() && self.exact_ok() && self.tail_ok() && self.regulation_ok()
    }

    /// Full report: every stage section plus the verdict block.
    pub fn report(&self) -> RunReport {
        let title = match &self.target {
            DemoTarget::Track => "aircraft demo (tracking)",
            DemoTarget::Zero => "aircraft demo (output regulation)",
            DemoTarget::Open => "aircraft demo (interpolation, M_des = M_open)",
            DemoTarget::Custom(_) => "aircraft demo (custom M_des)",
        };
        let mut rep = RunReport::new(title);
        self.analyze.write_into(&mut rep);
        self.assign.write_into(&mut rep);
        self.synthesize.write_into(&mut rep);
        self.simulate.write_into(&mut rep);
        rep.section("demo verdict");
        rep.flag("closed loop Hurwitz", self.hurwitz_ok());
        rep.flag("assignment exact", self.exact_ok());
        rep.flag(
            &format!("steady-state error <= {}", fmt_float(DEMO_TAIL_TOL)),
            self.tail_ok(),
        );
        if let Some(reg) = self.regulation_check {
            rep.flag("regulation equations hold", reg);
        }
        rep.line(if self.pass() { "DEMO: PASS" } else { "DEMO: FAIL" });
        rep
    }
}

/// Runs the full pipeline on the embedded model against the chosen target.
pub fn run_demo(target: DemoTarget, tol: &Tolerances) -> Result<DemoOutcome> {
    let parts = model_parts();
    let analyze = run_analyze(&parts, tol)?;
    let m_des = match &target {
        DemoTarget::Track => m_des_track(),
        DemoTarget::Zero => RealMatrix::zeros(2, 3),
        DemoTarget::Open => analyze.m_open.clone(),
        DemoTarget::Custom(m) => {
            crate::linalg::ensure_shape("M_des", m, 2, 3)?;
            crate::linalg::ensure_finite("M_des", m)?;
            m.clone()
        }
    };
    let assign = run_assign(&parts, &analyze.m_open, &m_des, tol)?;
    let synthesize = run_synthesize(&parts, &assign, &demo_synth_options(), tol)?;
    let simulate = run_simulate(&parts, &synthesize.flat, &m_des, &demo_sim_options())?;
    let regulation_check = match target {
        DemoTarget::Zero => Some(crate::assign::regulator_equations_check(
            &parts.plant,
            &parts.gen,
            &assign.solution,
            tol,
        )?),
        _ => None,
    };
    let outcome = DemoOutcome {
        target,
        analyze,
        assign,
        synthesize,
        simulate,
        regulation_check,
    };
    if !outcome.pass() {
        // Callers still get the full outcome through the report; the error
        // carries the first failed stage for the exit path.
        let first_fail = if !outcome.hurwitz_ok() {
            "closed loop is not Hurwitz"
        } else if !outcome.exact_ok() {
            "assignment is not exact"
        } else if !outcome.tail_ok() {
            "steady-state error above threshold"
        } else {
            "regulation equations violated"
        };
        return Err(Error::NumericalFailure(format!(
            "demo failed: {first_fail}\n{}",
            outcome.report().render()
        )));
    }
    Ok(outcome)
}
