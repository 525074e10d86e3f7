//! Exact simulation of the autonomous interconnection — signal generator
//! driving the plant–compensator loop — and steady-state error metrics.
//!
//! The whole interconnection is one autonomous linear system over the
//! stacked state `(ω, x, ξ)`, so trajectories are advanced by a single
//! matrix exponential `exp(A_total·dt)` computed once per run: no
//! integrator tolerance enters the results.

use crate::linalg::{from_blocks, RealMatrix};
use crate::moment::{closed_loop_matrices, Compensator, Plant, SignalGenerator};
use crate::{Error, Result};
use nalgebra::DVector;

/// The autonomous closed loop over the stacked state `(ω, x, ξ)`:
/// `ω̇ = S·ω`, `[ẋ; ξ̇] = A_cl·[x; ξ] + P_cl·L·ω`, with outputs
/// `y = C_cl·[x; ξ] + Q·L·ω` and `y_des = M_des·ω`.
#[derive(Debug, Clone)]
pub struct ClosedLoopModel {
    a_total: RealMatrix,
    c_cl: RealMatrix,
    ql: RealMatrix,
    m_des: RealMatrix,
    nu: usize,
    n: usize,
    rho: usize,
}

impl ClosedLoopModel {
    /// Assembles the autonomous model; `m_des` defines the reference output
    /// `y_des = M_des·ω` the error is measured against.
    pub fn new(
        plant: &Plant,
        gen: &SignalGenerator,
        comp: &Compensator,
        m_des: &RealMatrix,
    ) -> Result<Self> {
        if plant.q_dim() != gen.q_dim() {
            return Err(Error::DimensionMismatch(format!(
                "plant disturbance input has width {} but the generator emits {} signals",
                plant.q_dim(),
                gen.q_dim()
            )));
        }
        crate::linalg::ensure_shape("M_des", m_des, plant.p_dim(), gen.nu())?;
        crate::linalg::ensure_finite("M_des", m_des)?;
        let cl = closed_loop_matrices(plant, comp)?;
        let nu = gen.nu();
        let n = plant.n();
        let rho = comp.rho();
        let pl = &cl.p_cl * gen.l();
        let zeros = RealMatrix::zeros(nu, n + rho);
        let a_total = from_blocks(&[vec![gen.s(), &zeros], vec![&pl, &cl.a_cl]])?;
        let ql = plant.q_mat() * gen.l();
        Ok(ClosedLoopModel {
            a_total,
            c_cl: cl.c_cl,
            ql,
            m_des: m_des.clone(),
            nu,
            n,
            rho,
        })
    }

    /// The full autonomous matrix over `(ω, x, ξ)`.
    pub fn a_total(&self) -> &RealMatrix {
        &self.a_total
    }

    /// Dimension of the stacked state, `ν + n + ρ`.
    pub fn state_dim(&self) -> usize {
        self.nu + self.n + self.rho
    }

    /// Generator, plant, and compensator state dimensions.
    pub fn partition(&self) -> (usize, usize, usize) {
        (self.nu, self.n, self.rho)
    }

    /// Output pair `(y, y_des)` at a stacked state.
    pub fn outputs(&self, state: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let omega = state.rows(0, self.nu);
        let plant_comp = state.rows(self.nu, self.n + self.rho);
        let y = &self.c_cl * plant_comp + &self.ql * omega;
        let y_des = &self.m_des * omega;
        (y, y_des)
    }
}

/// A uniformly sampled run of the autonomous loop.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Sample instants, starting at 0 with uniform spacing.
    pub times: Vec<f64>,
    /// Stacked state `(ω, x, ξ)` at each instant.
    pub states: Vec<DVector<f64>>,
    /// Measured output `y` at each instant.
    pub outputs: Vec<DVector<f64>>,
    /// Reference output `y_des = M_des·ω` at each instant.
    pub desired: Vec<DVector<f64>>,
    /// Tracking error `‖y − y_des‖` at each instant.
    pub error: Vec<f64>,
}

impl Trajectory {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// True when the trajectory holds no samples.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Simulates the loop from `(ω₀, x₀, ξ₀)` over `[0, t_end]` with step `dt`,
/// advancing by the exact one-step map `exp(A_total·dt)`. The horizon is
/// rounded to a whole number of steps.
pub fn simulate(
    model: &ClosedLoopModel,
    omega0: &DVector<f64>,
    x0: &DVector<f64>,
    xi0: &DVector<f64>,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::ConfigMismatch(format!(
            "time step must be positive and finite, got {dt}"
        )));
    }
    if !(t_end.is_finite() && t_end >= dt) {
        return Err(Error::ConfigMismatch(format!(
            "horizon must satisfy t_end ≥ dt, got t_end = {t_end}, dt = {dt}"
        )));
    }
    let (nu, n, rho) = model.partition();
    for (label, vec, want) in [
        ("omega0", omega0, nu),
        ("x0", x0, n),
        ("xi0", xi0, rho),
    ] {
        if vec.len() != want {
            return Err(Error::DimensionMismatch(format!(
                "`{label}` must have length {want}, got {}",
                vec.len()
            )));
        }
        if vec.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(label.into()));
        }
    }

    let steps = (t_end / dt).round().max(1.0) as usize;
    let step_map = (model.a_total() * dt).exp();
    crate::linalg::ensure_finite("one-step map exp(A·dt)", &step_map)
        .map_err(|_| Error::NumericalFailure("matrix exponential overflowed".into()))?;

    let mut state = DVector::zeros(model.state_dim());
    state.rows_mut(0, nu).copy_from(omega0);
    state.rows_mut(nu, n).copy_from(x0);
    state.rows_mut(nu + n, rho).copy_from(xi0);

    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        outputs: Vec::with_capacity(steps + 1),
        desired: Vec::with_capacity(steps + 1),
        error: Vec::with_capacity(steps + 1),
    };
    for k in 0..=steps {
        let (y, y_des) = model.outputs(&state);
        traj.times.push(k as f64 * dt);
        traj.error.push((&y - &y_des).norm());
        traj.outputs.push(y);
        traj.desired.push(y_des);
        traj.states.push(state.clone());
        if k < steps {
            state = &step_map * &state;
        }
    }
    Ok(traj)
}

/// Maximum and RMS tracking error over the trailing `window` fraction of a
/// trajectory (`window ∈ (0, 1]`; at least the final sample is included).
pub fn steady_state_error(traj: &Trajectory, window: f64) -> Result<(f64, f64)> {
    if !(window.is_finite() && window > 0.0 && window <= 1.0) {
        return Err(Error::ConfigMismatch(format!(
            "trailing window must lie in (0, 1], got {window}"
        )));
    }
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let len = traj.error.len();
    let count = ((len as f64 * window).ceil() as usize).clamp(1, len);
    let tail = &traj.error[len - count..];
    let max = tail.iter().cloned().fold(0.0, f64::max);
    let rms = (tail.iter().map(|e| e * e).sum::<f64>() / count as f64).sqrt();
    Ok((max, rms))
}
