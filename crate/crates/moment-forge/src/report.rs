//! Deterministic plain-text run reports and plot-ready trajectory output.
//!
//! Every number is printed through one fixed-precision scientific formatter
//! and every eigenvalue list is sorted canonically, so a run with identical
//! inputs and tolerances produces byte-identical text.

use crate::assign::AssignmentSolution;
use crate::linalg::RealMatrix;
use crate::moment::TransferDiagnostics;
use crate::sim::Trajectory;
use crate::synth::StabilityReport;
use crate::{Error, Result};
use num_complex::Complex;
use std::fmt::Write as _;

/// Fixed scientific rendering of a float; `-0.0` collapses to `0.0` so the
/// sign of an exact zero can never depend on rounding direction.
pub fn fmt_float(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.9e}")
}

/// Renders `a+bi` with both parts in fixed scientific form.
pub fn fmt_complex(z: Complex<f64>) -> String {
    let re = if z.re == 0.0 { 0.0 } else { z.re };
    let im = if z.im == 0.0 { 0.0 } else { z.im };
    format!("{re:.9e} {im:+.9e}i")
}

/// Canonical eigenvalue order: ascending real part, then ascending
/// imaginary part.
fn sorted_eigs(eigs: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let mut out = eigs.to_vec();
    out.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    out
}

/// Structured text report accumulated section by section as a pipeline runs.
#[derive(Debug, Clone)]
pub struct RunReport {
    buf: String,
}

impl RunReport {
    /// Starts a report with a top-level banner.
    pub fn new(title: &str) -> RunReport {
        let mut buf = String::new();
        let _ = writeln!(buf, "=== {title} ===");
        RunReport { buf }
    }

    /// Opens a named section.
    pub fn section(&mut self, title: &str) {
        let _ = writeln!(self.buf, "\n-- {title} --");
    }

    /// Appends a free-form line.
    pub fn line(&mut self, text: &str) {
        let _ = writeln!(self.buf, "{text}");
    }

    /// Appends `label: value`.
    pub fn kv(&mut self, label: &str, value: &str) {
        let _ = writeln!(self.buf, "{label}: {value}");
    }

    /// Appends a labeled scalar in fixed scientific form.
    pub fn scalar(&mut self, label: &str, x: f64) {
        self.kv(label, &fmt_float(x));
    }

    /// Appends a labeled yes/no flag.
    pub fn flag(&mut self, label: &str, ok: bool) {
        self.kv(label, if ok { "yes" } else { "no" });
    }

    /// Appends a labeled matrix, one row per line.
    pub fn matrix(&mut self, label: &str, m: &RealMatrix) {
        let _ = writeln!(self.buf, "{label} ({}x{}):", m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            let row: Vec<String> = m.row(i).iter().map(|&x| fmt_float(x)).collect();
            let _ = writeln!(self.buf, "  [ {} ]", row.join("  "));
        }
    }

    /// Appends a labeled eigenvalue list in canonical order.
    pub fn spectrum(&mut self, label: &str, eigs: &[Complex<f64>]) {
        let _ = writeln!(self.buf, "{label}:");
        for z in sorted_eigs(eigs) {
            let _ = writeln!(self.buf, "  {}", fmt_complex(z));
        }
    }

    /// Appends the three structural stability verdicts.
    pub fn stability(&mut self, rep: &StabilityReport) {
        self.flag("plant stabilizable (A, B)", rep.plant_stabilizable);
        self.flag("plant detectable (C, A)", rep.plant_detectable);
        self.flag(
            "moment pair detectable (M_open, S)",
            rep.moment_pair_detectable,
        );
        self.flag("synthesizable", rep.synthesizable());
        if !rep.offending_eigenvalues.is_empty() {
            self.line("offending eigenvalues:");
            for (z, test) in &rep.offending_eigenvalues {
                let _ = writeln!(self.buf, "  {} [{}]", fmt_complex(*z), test);
            }
        }
    }

    /// Appends the transfer-operator range diagnostics.
    pub fn diagnostics(&mut self, diag: &TransferDiagnostics) {
        self.kv(
            "transfer operator rank",
            &format!("{} of {}", diag.rank, diag.codomain_dim),
        );
        self.flag("surjective (every moment assignable)", diag.surjective);
        for check in &diag.eigen_checks {
            let verdict = if check.deficient {
                "DEFICIENT"
            } else {
                "full"
            };
            self.line(&format!(
                "  eta0 rank at s = {}: {} of {} ({verdict})",
                fmt_complex(check.s_value),
                check.eta0_rank,
                check.max_possible
            ));
        }
    }

    /// Appends an assignment solution: verdict, defect, moment blocks.
    pub fn assignment(&mut self, sol: &AssignmentSolution, delta_m: &RealMatrix) {
        self.matrix("Delta_M = M_des - M_open", delta_m);
        self.flag("exactly assignable", sol.exact);
        self.scalar("assignment residual (defect)", sol.residual);
        self.matrix("M_c (compensator moment)", &sol.m_c.value);
        self.matrix("M_des_effective = M_open + T_S(M_c)", &sol.m_des_effective);
    }

    /// The accumulated text.
    pub fn render(&self) -> String {
        self.buf.clone()
    }
}

impl std::fmt::Display for RunReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.buf)
    }
}

/// Column labels for a trajectory CSV with the given state partition.
fn csv_header(nu: usize, n: usize, rho: usize, p: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(2 + nu + n + rho + 2 * p);
    cols.push("t".to_string());
    cols.extend((1..=nu).map(|i| format!("omega{i}")));
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=rho).map(|i| format!("xi{i}")));
    cols.extend((1..=p).map(|i| format!("y{i}")));
    cols.extend((1..=p).map(|i| format!("ydes{i}")));
    cols.push("err".to_string());
    cols
}

/// Serializes a trajectory to CSV text with header
/// `t, omega*, x*, xi*, y*, ydes*, err` for the state partition
/// `(nu, n, rho)`.
pub fn trajectory_csv(traj: &Trajectory, nu: usize, n: usize, rho: usize) -> Result<String> {
    if traj.times.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let p = traj.outputs[0].len();
    if traj.states[0].len() != nu + n + rho {
        return Err(Error::DimensionMismatch(format!(
            "trajectory carries states of length {}, partition says {}",
            traj.states[0].len(),
            nu + n + rho
        )));
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(csv_header(nu, n, rho, p))
        .map_err(|e| Error::NumericalFailure(format!("csv: {e}")))?;
    for k in 0..traj.times.len() {
        let mut record = Vec::with_capacity(2 + nu + n + rho + 2 * p);
        record.push(fmt_float(traj.times[k]));
        record.extend(traj.states[k].iter().map(|&x| fmt_float(x)));
        record.extend(traj.outputs[k].iter().map(|&x| fmt_float(x)));
        record.extend(traj.desired[k].iter().map(|&x| fmt_float(x)));
        record.push(fmt_float(traj.error[k]));
        writer
            .write_record(&record)
            .map_err(|e| Error::NumericalFailure(format!("csv: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::NumericalFailure(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::NumericalFailure(format!("csv: {e}")))
}

/// A gnuplot-style script that plots tracking error and each output against
/// its reference from a trajectory CSV written by [`trajectory_csv`].
pub fn gnuplot_script(csv_name: &str, nu: usize, n: usize, rho: usize, p: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set xlabel 't [s]'");
    let _ = writeln!(s, "set logscale y");
    let _ = writeln!(s, "set ylabel 'tracking error'");
    let err_col = 2 + nu + n + rho + 2 * p;
    let _ = writeln!(s, "plot '{csv_name}' using 1:{err_col} with lines");
    let _ = writeln!(s, "pause -1");
    let _ = writeln!(s, "unset logscale y");
    let _ = writeln!(s, "set ylabel 'output vs reference'");
    let mut terms = Vec::with_capacity(2 * p);
    for i in 0..p {
        let y_col = 2 + nu + n + rho + i;
        let ydes_col = y_col + p;
        terms.push(format!("'{csv_name}' using 1:{y_col} with lines"));
        terms.push(format!(
            "'{csv_name}' using 1:{ydes_col} with lines dashtype 2"
        ));
    }
    let _ = writeln!(s, "plot {}", terms.join(", \\\n     "));
    let _ = writeln!(s, "pause -1");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment::{Compensator, Plant, SignalGenerator};
    use crate::sim::{simulate, ClosedLoopModel};
    use nalgebra::DVector;

    #[test]
    fn float_formatting_is_fixed_and_zero_normalized() {
        assert_eq!(fmt_float(0.0), "0.000000000e0");
        assert_eq!(fmt_float(-0.0), "0.000000000e0");
        assert_eq!(fmt_float(0.1), "1.000000000e-1");
        assert_eq!(fmt_float(-3.5e-12), "-3.500000000e-12");
        assert_eq!(fmt_complex(Complex::new(1.0, -2.0)), "1.000000000e0 -2.000000000e0i");
    }

    #[test]
    fn report_text_is_reproducible() {
        let build = || {
            let mut rep = RunReport::new("demo");
            rep.section("spectra");
            rep.spectrum(
                "eigenvalues",
                &[Complex::new(0.0, 1.0), Complex::new(0.0, -1.0), Complex::new(-2.0, 0.0)],
            );
            rep.scalar("gap", 0.5);
            rep.flag("ok", true);
            rep.matrix("M", &RealMatrix::from_row_slice(1, 2, &[1.0, -0.0]));
            rep.render()
        };
        let a = build();
        let b = build();
        assert_eq!(a, b);
        // Canonical eigenvalue order puts -2 first, then -i before +i.
        let at = a.find("-2.000000000e0 +0.000000000e0i").unwrap();
        assert!(at < a.find("-1.000000000e0i").unwrap());
        // -0.0 is printed as a plain zero.
        assert!(a.contains("[ 1.000000000e0  0.000000000e0 ]"));
    }

    #[test]
    fn trajectory_csv_has_contracted_header_and_row_shape() {
        let plant = Plant::new(
            RealMatrix::from_row_slice(1, 1, &[-1.0]),
            RealMatrix::from_row_slice(1, 1, &[1.0]),
            RealMatrix::from_row_slice(1, 1, &[1.0]),
            RealMatrix::from_row_slice(1, 1, &[0.0]),
            RealMatrix::from_row_slice(1, 1, &[1.0]),
            RealMatrix::from_row_slice(1, 1, &[0.0]),
        )
        .unwrap();
        let gen = SignalGenerator::new(
            RealMatrix::zeros(1, 1),
            RealMatrix::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        let comp = Compensator::new(
            RealMatrix::from_row_slice(1, 1, &[-2.0]),
            RealMatrix::from_row_slice(1, 1, &[1.0]),
            RealMatrix::from_row_slice(1, 1, &[0.5]),
        )
        .unwrap();
        let m_des = RealMatrix::from_row_slice(1, 1, &[1.0]);
        let model = ClosedLoopModel::new(&plant, &gen, &comp, &m_des).unwrap();
        let traj = simulate(
            &model,
            &DVector::from_row_slice(&[1.0]),
            &DVector::from_row_slice(&[0.0]),
            &DVector::from_row_slice(&[0.0]),
            0.01,
            0.005,
        )
        .unwrap();
        let (nu, n, rho) = model.partition();
        let csv = trajectory_csv(&traj, nu, n, rho).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,omega1,x1,xi1,y1,ydes1,err");
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 7);
        assert!(first.starts_with("0.000000000e0,1.000000000e0,"));
        // Deterministic: regenerating yields identical bytes.
        assert_eq!(csv, trajectory_csv(&traj, nu, n, rho).unwrap());

        let script = gnuplot_script("out.csv", nu, n, rho, 1);
        assert!(script.contains("using 1:7"));
        assert!(script.contains("using 1:5"));
        assert!(script.contains("using 1:6"));
    }

    #[test]
    fn trajectory_csv_rejects_inconsistent_partition() {
        let traj = Trajectory {
            times: vec![0.0],
            states: vec![DVector::from_row_slice(&[1.0, 2.0])],
            outputs: vec![DVector::from_row_slice(&[0.0])],
            desired: vec![DVector::from_row_slice(&[0.0])],
            error: vec![0.0],
        };
        assert!(matches!(
            trajectory_csv(&traj, 1, 1, 1),
            Err(Error::DimensionMismatch(_))
        ));
        let empty = Trajectory {
            times: vec![],
            states: vec![],
            outputs: vec![],
            desired: vec![],
            error: vec![],
        };
        assert!(matches!(
            trajectory_csv(&empty, 1, 1, 0),
            Err(Error::EmptyTrajectory)
        ));
    }
}
