//! Command-line front end: analyze, assign, synthesize, simulate, and the
//! embedded aircraft demo.

use clap::{Args, Parser, Subcommand};
use moment_forge::himat::{self, DemoTarget};
use moment_forge::linalg::{RealMatrix, Tolerances};
use moment_forge::model::{
    load_compensator, load_matrix, load_model, save_compensator, CompensatorFile, ModelFile,
    ModelParts,
};
use moment_forge::pipeline::{
    run_analyze, run_assign, run_simulate, run_synthesize, SimOptions, SynthOptions,
};
use moment_forge::report::{gnuplot_script, trajectory_csv, RunReport};
use moment_forge::synth::StabilizerParams;
use moment_forge::{Error, Result};
use nalgebra::DVector;
use std::path::{Path, PathBuf};

/// Environment variable selecting a named tolerance preset
/// (`default`, `strict`, `loose`).
const TOL_PROFILE_ENV: &str = "MOMENT_FORGE_TOL_PROFILE";

#[derive(Parser)]
#[command(
    name = "moment-forge",
    version,
    about = "Steady-state moment analysis, assignment, and stabilizing \
             compensator synthesis for interconnected LTI systems"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Tolerance overrides, highest precedence (over the env profile and any
/// per-file overrides).
#[derive(Args, Debug, Clone, Copy, Default)]
struct TolArgs {
    /// Minimum relative eigenvalue gap between plant and generator spectra.
    #[arg(long, value_name = "X")]
    tol_spectral_gap: Option<f64>,
    /// Relative singular-value cutoff for rank decisions.
    #[arg(long, value_name = "X")]
    tol_rank_rel: Option<f64>,
    /// Relative residual bound for linear solves.
    #[arg(long, value_name = "X")]
    tol_residual_rel: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Open-loop moment and structural diagnostics of a model file.
    Analyze {
        /// Model file (TOML with matrices A, B, C, D, P, Q, S, L).
        model: PathBuf,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Solve for the compensator moment closing the gap to `M_des`.
    Assign {
        model: PathBuf,
        /// Desired moment: `zero`, `open`, or a matrix file; defaults to the
        /// model's `M_des`.
        #[arg(long, value_name = "SPEC")]
        m_des: Option<String>,
        /// Diagonal least-squares weights over vec(Delta_M), comma-separated.
        #[arg(long, value_name = "W1,W2,...")]
        weights: Option<String>,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Synthesize a stabilizing compensator realizing the assigned moment.
    Synthesize {
        model: PathBuf,
        /// Output compensator file (flat realization plus canonical
        /// parameters).
        #[arg(long, default_value = "compensator.toml")]
        out: PathBuf,
        #[arg(long, value_name = "SPEC")]
        m_des: Option<String>,
        #[arg(long, value_name = "W1,W2,...")]
        weights: Option<String>,
        /// Generator-block injection gain file (TOML: `M = [[...]]`), ν×p.
        #[arg(long, value_name = "FILE")]
        ga: Option<PathBuf>,
        /// Fail (exit 4) when the desired moment is only least-squares
        /// assignable.
        #[arg(long)]
        require_exact: bool,
        /// Prescribed minimum closed-loop decay rate.
        #[arg(long, default_value_t = 0.0)]
        decay: f64,
        /// Scalar multiplier on the identity state weight.
        #[arg(long, default_value_t = 1.0)]
        w_state: f64,
        /// Scalar multiplier on the identity input weight.
        #[arg(long, default_value_t = 1.0)]
        w_input: f64,
        /// Scalar multiplier on the identity process-noise weight.
        #[arg(long, default_value_t = 1.0)]
        w_process: f64,
        /// Scalar multiplier on the identity measurement-noise weight.
        #[arg(long, default_value_t = 1.0)]
        w_measure: f64,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Simulate the closed loop of a model with a compensator file.
    Simulate {
        model: PathBuf,
        compensator: PathBuf,
        /// Horizon [s].
        #[arg(long, default_value_t = 30.0)]
        t_end: f64,
        /// Sample step [s].
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Initial exogenous state, comma-separated; defaults to all ones.
        #[arg(long, value_name = "W1,W2,...")]
        omega0: Option<String>,
        /// Trailing fraction of the horizon for steady-state metrics.
        #[arg(long, default_value_t = 0.2)]
        window: f64,
        /// Output CSV path.
        #[arg(long, default_value = "trajectory.csv")]
        out: PathBuf,
        /// Also write a gnuplot script for the CSV here.
        #[arg(long, value_name = "FILE")]
        plot_script: Option<PathBuf>,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Full pipeline on the embedded aircraft model; exit 0 iff all demo
    /// thresholds are met.
    DemoHimat {
        /// Desired-moment variant: `zero`, `open`, or a matrix file;
        /// defaults to the shipped tracking moment.
        #[arg(long, value_name = "SPEC")]
        m_des: Option<String>,
        /// Write model, compensator, trajectory CSV, plot script, and
        /// report into this directory.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        tol: TolArgs,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

/// Tolerance policy: env profile (or default), then model-file overrides,
/// then CLI flags; validated at the end.
fn resolve_tolerances(file: Option<&ModelFile>, args: &TolArgs) -> Result<Tolerances> {
    let mut tol = match std::env::var(TOL_PROFILE_ENV) {
        Ok(name) => Tolerances::profile(&name).ok_or_else(|| {
            Error::ConfigMismatch(format!(
                "unknown tolerance profile `{name}` in {TOL_PROFILE_ENV} \
                 (expected default, strict, or loose)"
            ))
        })?,
        Err(_) => Tolerances::default(),
    };
    if let Some(f) = file {
        tol = f.tolerances_over(tol);
    }
    if let Some(x) = args.tol_spectral_gap {
        tol.spectral_gap = x;
    }
    if let Some(x) = args.tol_rank_rel {
        tol.rank_rel = x;
    }
    if let Some(x) = args.tol_residual_rel {
        tol.residual_rel = x;
    }
    tol.validate()?;
    Ok(tol)
}

/// Parses a comma-separated float list.
fn parse_floats(label: &str, text: &str) -> Result<DVector<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if !v.is_empty() => Ok(DVector::from_row_slice(&v)),
        _ => Err(Error::ParseError(format!(
            "`{label}` must be a comma-separated list of numbers, got `{text}`"
        ))),
    }
}

/// Resolves an `--m-des` spec against a model: `zero`, `open`, a matrix
/// file path, or (when absent) the model's own `M_des`.
fn resolve_m_des(
    spec: Option<&str>,
    parts: &ModelParts,
    m_open: &RealMatrix,
) -> Result<RealMatrix> {
    let (p, nu) = (parts.plant.p_dim(), parts.gen.nu());
    match spec {
        None => parts.m_des.clone().ok_or_else(|| {
            Error::ConfigMismatch(
                "model file has no `M_des`; add one or pass --m-des".into(),
            )
        }),
        Some("zero") => Ok(RealMatrix::zeros(p, nu)),
        Some("open") => Ok(m_open.clone()),
        Some(path) => {
            let m = load_matrix(Path::new(path))?;
            moment_forge::linalg::ensure_shape("M_des", &m, p, nu)?;
            moment_forge::linalg::ensure_finite("M_des", &m)?;
            Ok(m)
        }
    }
}

/// Applies a `--weights` override onto parsed model parts.
fn apply_weights(parts: &mut ModelParts, weights: Option<&str>) -> Result<()> {
    if let Some(text) = weights {
        parts.weights = Some(parse_floats("weights", text)?);
    }
    Ok(())
}

/// Identity scaled by `w`, or `None` for the plain identity default.
fn scaled_identity(w: f64, dim: usize) -> Option<RealMatrix> {
    if w == 1.0 {
        None
    } else {
        Some(RealMatrix::identity(dim, dim) * w)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::ParseError(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Analyze { model, tol } => {
            let file = load_model(&model)?;
            let tol = resolve_tolerances(Some(&file), &tol)?;
            let parts = file.parse_parts()?;
            let analyze = run_analyze(&parts, &tol)?;
            let mut rep = RunReport::new(&format!("analyze {}", model.display()));
            analyze.write_into(&mut rep);
            print!("{rep}");
            Ok(())
        }
        Cmd::Assign {
            model,
            m_des,
            weights,
            tol,
        } => {
            let file = load_model(&model)?;
            let tol = resolve_tolerances(Some(&file), &tol)?;
            let mut parts = file.parse_parts()?;
            apply_weights(&mut parts, weights.as_deref())?;
            let analyze = run_analyze(&parts, &tol)?;
            let m_des = resolve_m_des(m_des.as_deref(), &parts, &analyze.m_open)?;
            let assign = run_assign(&parts, &analyze.m_open, &m_des, &tol)?;
            let mut rep = RunReport::new(&format!("assign {}", model.display()));
            analyze.write_into(&mut rep);
            assign.write_into(&mut rep);
            print!("{rep}");
            Ok(())
        }
        Cmd::Synthesize {
            model,
            out,
            m_des,
            weights,
            ga,
            require_exact,
            decay,
            w_state,
            w_input,
            w_process,
            w_measure,
            tol,
        } => {
            let file = load_model(&model)?;
            let tol = resolve_tolerances(Some(&file), &tol)?;
            let mut parts = file.parse_parts()?;
            apply_weights(&mut parts, weights.as_deref())?;
            let analyze = run_analyze(&parts, &tol)?;
            let m_des = resolve_m_des(m_des.as_deref(), &parts, &analyze.m_open)?;
            let assign = run_assign(&parts, &analyze.m_open, &m_des, &tol)?;
            let (n, m, p, nu) = (
                parts.plant.n(),
                parts.plant.m(),
                parts.plant.p_dim(),
                parts.gen.nu(),
            );
            let opts = SynthOptions {
                g_a: ga.map(|path| load_matrix(&path)).transpose()?,
                params: StabilizerParams {
                    state_weight: scaled_identity(w_state, n + nu),
                    input_weight: scaled_identity(w_input, m + nu),
                    process_weight: scaled_identity(w_process, n + nu),
                    measurement_weight: scaled_identity(w_measure, p),
                    decay,
                },
                require_exact,
            };
            let synth = run_synthesize(&parts, &assign, &opts, &tol)?;
            save_compensator(
                &out,
                &CompensatorFile::from_canonical(&synth.canonical, &synth.flat),
            )?;
            let mut rep = RunReport::new(&format!("synthesize {}", model.display()));
            analyze.write_into(&mut rep);
            assign.write_into(&mut rep);
            synth.write_into(&mut rep);
            rep.kv("compensator written to", &out.display().to_string());
            print!("{rep}");
            Ok(())
        }
        Cmd::Simulate {
            model,
            compensator,
            t_end,
            dt,
            omega0,
            window,
            out,
            plot_script,
            tol,
        } => {
            let file = load_model(&model)?;
            let tol = resolve_tolerances(Some(&file), &tol)?;
            let parts = file.parse_parts()?;
            let comp_file = load_compensator(&compensator)?;
            let comp = comp_file.to_compensator()?;
            let reference = simulation_reference(&parts, &comp_file)?;
            let omega0 = match omega0 {
                Some(text) => parse_floats("omega0", &text)?,
                None => DVector::from_element(parts.gen.nu(), 1.0),
            };
            let sim = run_simulate(
                &parts,
                &comp,
                &reference,
                &SimOptions {
                    omega0,
                    x0: None,
                    xi0: None,
                    t_end,
                    dt,
                    window,
                },
            )?;
            let (nu, n, rho) = sim.partition;
            write_text(&out, &trajectory_csv(&sim.trajectory, nu, n, rho)?)?;
            if let Some(script_path) = plot_script {
                let csv_name = out.display().to_string();
                let p = parts.plant.p_dim();
                write_text(&script_path, &gnuplot_script(&csv_name, nu, n, rho, p))?;
            }
            let mut rep = RunReport::new(&format!(
                "simulate {} with {}",
                model.display(),
                compensator.display()
            ));
            sim.write_into(&mut rep);
            rep.kv("trajectory written to", &out.display().to_string());
            print!("{rep}");
            // Verify the compensator still realizes its moment on this model.
            let (m_cl, _, _, _) = moment_forge::moment::closed_loop_moment(
                &parts.plant,
                &parts.gen,
                &comp,
                &tol,
            )?;
            let dev = (&m_cl.value - &reference).norm();
            let mut tail = RunReport::new("closed-loop moment check");
            tail.scalar("|M_cl - reference|", dev);
            print!("{tail}");
            Ok(())
        }
        Cmd::DemoHimat { m_des, out_dir, tol } => {
            let tol = resolve_tolerances(None, &tol)?;
            let target = match m_des.as_deref() {
                None => DemoTarget::Track,
                Some("zero") => DemoTarget::Zero,
                Some("open") => DemoTarget::Open,
                Some(path) => DemoTarget::Custom(load_matrix(Path::new(path))?),
            };
            let outcome = himat::run_demo(target, &tol)?;
            let report = outcome.report();
            print!("{report}");
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir).map_err(|e| {
                    Error::ParseError(format!("cannot create {}: {e}", dir.display()))
                })?;
                moment_forge::model::save_model(&dir.join("model.toml"), &himat::model_file())?;
                save_compensator(
                    &dir.join("compensator.toml"),
                    &CompensatorFile::from_canonical(
                        &outcome.synthesize.canonical,
                        &outcome.synthesize.flat,
                    ),
                )?;
                let (nu, n, rho) = outcome.simulate.partition;
                write_text(
                    &dir.join("trajectory.csv"),
                    &trajectory_csv(&outcome.simulate.trajectory, nu, n, rho)?,
                )?;
                write_text(
                    &dir.join("plot.gnuplot"),
                    &gnuplot_script("trajectory.csv", nu, n, rho, 2),
                )?;
                write_text(&dir.join("report.txt"), &report.render())?;
            }
            Ok(())
        }
    }
}

/// The reference moment a simulation measures error against: the model's
/// `M_des` when present, otherwise the canonical target stored in the
/// compensator file.
fn simulation_reference(parts: &ModelParts, comp_file: &CompensatorFile) -> Result<RealMatrix> {
    if let Some(m) = &parts.m_des {
        return Ok(m.clone());
    }
    if let Some(canonical) = comp_file.to_canonical()? {
        return Ok(canonical.m_des.clone());
    }
    Err(Error::ConfigMismatch(
        "no reference moment: the model has no `M_des` and the compensator \
         file has no canonical block"
            .into(),
    ))
}
