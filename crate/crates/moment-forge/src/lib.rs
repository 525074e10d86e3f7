//! Steady-state moment computation, assignment, and compensator synthesis
//! for interconnected LTI systems.
//!
//! A linear plant driven by an autonomous signal generator settles, when the
//! closed loop is stable and the spectra are disjoint, onto an invariant
//! manifold where its output is a static linear function of the generator
//! state. That static map is the *moment* of the interconnection. This crate
//!
//! * computes open-loop and closed-loop moments by solving Sylvester
//!   equations ([`moment`]),
//! * realizes the linear operator that maps a compensator's moment to its
//!   effect on the closed-loop moment, both as an action and as a dense
//!   matrix ([`moment::transfer_matrix`]),
//! * decides whether a desired closed-loop moment is assignable and solves
//!   for the compensator moment exactly or in the least-squares sense
//!   ([`assign`]),
//! * synthesizes a stabilizing dynamic compensator that realizes the
//!   assigned moment, via an augmented-system LQG design ([`synth`]),
//! * simulates the resulting autonomous interconnection exactly ([`sim`]),
//! * and ships a reproducible aircraft demo ([`himat`]) plus a CLI.
//!
//! All numerical comparisons go through a single [`Tolerances`] value.

pub mod assign;
pub mod himat;
pub mod linalg;
pub mod model;
pub mod moment;
pub mod pipeline;
pub mod report;
pub mod sim;
pub mod synth;

pub use linalg::{ComplexMatrix, RealMatrix, Spectrum, Tolerances};

use num_complex::Complex;

/// Formats a list of complex eigenvalues for error messages.
fn fmt_eigs(eigs: &[Complex<f64>]) -> String {
    let parts: Vec<String> = eigs
        .iter()
        .map(|z| format!("{:.6}{:+.6}i", z.re, z.im))
        .collect();
    parts.join(", ")
}

/// Unified error type for every fallible operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Matrix dimensions are inconsistent with the operation's contract.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An input or intermediate matrix contains NaN or infinity.
    #[error("non-finite entry encountered in `{0}`")]
    NonFinite(String),

    /// Two spectra that must be disjoint come too close.
    #[error("spectra overlap: minimum eigenvalue gap {gap:.3e} is below threshold {threshold:.3e}")]
    SpectraOverlap { gap: f64, threshold: f64 },

    /// A linear solve produced a residual above the accepted bound.
    #[error("ill-conditioned solve: relative residual {residual:.3e} exceeds bound {bound:.3e}")]
    IllConditioned { residual: f64, bound: f64 },

    /// A numerical routine failed in a way that is not a contract violation
    /// by the caller (e.g. an eigensolver or matrix exponential failure).
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A frequency-domain evaluation point collides with a plant pole.
    #[error("evaluation point {point} is within the resolution tolerance of a plant pole")]
    PoleAtPoint { point: Complex<f64> },

    /// A generator matrix needs an explicit eigenstructure but one could not
    /// be certified (repeated eigenvalues with too few eigenvectors, or a
    /// declared structure that does not reproduce the matrix).
    #[error("generator eigenstructure cannot be certified: {0}")]
    DefectiveGenerator(String),

    /// An operation was invoked on a configuration it does not support.
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    /// The pair (A, B) fails the stabilizability rank test.
    #[error("pair (A, B) is not stabilizable; offending eigenvalues: {}", fmt_eigs(.0))]
    NotStabilizable(Vec<Complex<f64>>),

    /// The pair (C, A) fails the detectability rank test.
    #[error("pair (C, A) is not detectable; offending eigenvalues: {}", fmt_eigs(.0))]
    NotDetectable(Vec<Complex<f64>>),

    /// An algebraic Riccati solve did not converge or failed validation.
    #[error("Riccati solve failed: {0}")]
    RiccatiFailure(String),

    /// A compensator expected to realize a given closed-loop moment does not.
    #[error("compensator does not assign the requested moment (deviation {deviation:.3e})")]
    NotMomentAssigning { deviation: f64 },

    /// A desired moment is not exactly assignable and exactness was demanded.
    #[error("desired moment is not exactly assignable (range defect {defect:.3e})")]
    NotAssignable { defect: f64 },

    /// A rank decision fell inside the guard band around the threshold where
    /// choosing either way would be arbitrary.
    #[error("rank decision ambiguous: singular value {sigma:.3e} lies within a factor 10 of threshold {threshold:.3e}")]
    RankDeficiencyAmbiguous { sigma: f64, threshold: f64 },

    /// A trajectory operation was asked to work on no samples.
    #[error("trajectory is empty")]
    EmptyTrajectory,

    /// A model or matrix file could not be parsed.
    #[error("parse error: {0}")]
    ParseError(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 parse/dimension, 3 spectral,
    /// 4 not assignable under demanded exactness, 5 not stabilizable or
    /// detectable, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ParseError(_) | Error::DimensionMismatch(_) | Error::ConfigMismatch(_) => 2,
            Error::SpectraOverlap { .. } | Error::PoleAtPoint { .. } => 3,
            Error::NotAssignable { .. } => 4,
            Error::NotStabilizable(_) | Error::NotDetectable(_) => 5,
            _ => 1,
        }
    }
}
