//! String-in/string-out facade over the synthesis pipeline.
//!
//! Everything the browser page needs goes through plain strings: TOML model
//! and compensator documents, comma-separated vectors, CSV trajectories, and
//! text reports. Keeping this layer free of generated binding types lets it
//! compile and run on any host, so the whole surface is unit-tested natively.

use moment_forge::himat;
use moment_forge::linalg::{RealMatrix, Tolerances};
use moment_forge::model::{CompensatorFile, ModelFile, ModelParts};
use moment_forge::pipeline::{
    run_analyze, run_assign, run_simulate, run_synthesize, SimOptions, SynthOptions,
    SynthesizeOutcome,
};
use moment_forge::report::{trajectory_csv, RunReport};
use moment_forge::synth::StabilizerParams;
use nalgebra::DVector;

fn err_text(e: moment_forge::Error) -> String {
    e.to_string()
}

/// Parses a model document and resolves its tolerance policy.
fn load_model(model_toml: &str) -> Result<(ModelParts, Tolerances), String> {
    let file = ModelFile::from_toml(model_toml).map_err(err_text)?;
    let parts = file.parse_parts().map_err(err_text)?;
    let tol = file.tolerances_over(Tolerances::default());
    tol.validate().map_err(err_text)?;
    Ok((parts, tol))
}

/// The bundled aircraft model as a TOML document, ready to edit.
pub fn demo_model_toml() -> String {
    himat::model_file()
        .to_toml()
        .expect("the bundled model always serializes")
}

/// Full structural analysis of a model document, as a text report.
pub fn analyze_report(model_toml: &str) -> Result<String, String> {
    let (parts, tol) = load_model(model_toml)?;
    let outcome = run_analyze(&parts, &tol).map_err(err_text)?;
    let mut rep = RunReport::new("analyze");
    outcome.write_into(&mut rep);
    Ok(rep.render())
}

fn synthesize_pipeline(
    model_toml: &str,
    decay: f64,
) -> Result<(ModelParts, Tolerances, SynthesizeOutcome, RunReport), String> {
    let (parts, tol) = load_model(model_toml)?;
    let m_des = parts
        .m_des
        .clone()
        .ok_or_else(|| "model document must carry `M_des` to synthesize".to_string())?;
    let analyze = run_analyze(&parts, &tol).map_err(err_text)?;
    let assign = run_assign(&parts, &analyze.m_open, &m_des, &tol).map_err(err_text)?;
    let opts = SynthOptions {
        g_a: None,
        params: StabilizerParams {
            decay,
            ..Default::default()
        },
        require_exact: false,
    };
    let synth = run_synthesize(&parts, &assign, &opts, &tol).map_err(err_text)?;
    let mut rep = RunReport::new("synthesize");
    analyze.write_into(&mut rep);
    assign.write_into(&mut rep);
    synth.write_into(&mut rep);
    Ok((parts, tol, synth, rep))
}

/// Synthesizes a stabilizing compensator for the model's `M_des` and returns
/// it as a TOML document (flat realization plus structured blocks).
pub fn synthesize_toml(model_toml: &str, decay: f64) -> Result<String, String> {
    let (_, _, synth, _) = synthesize_pipeline(model_toml, decay)?;
    CompensatorFile::from_canonical(&synth.canonical, &synth.flat)
        .to_toml()
        .map_err(err_text)
}

/// The full analysis/assignment/synthesis report for the model's `M_des`.
pub fn synthesize_report(model_toml: &str, decay: f64) -> Result<String, String> {
    let (_, _, _, rep) = synthesize_pipeline(model_toml, decay)?;
    Ok(rep.render())
}

/// The moment the simulated output is measured against: the model's `M_des`
/// when present, otherwise the moment recorded in the compensator document.
fn simulation_reference(
    parts: &ModelParts,
    comp_file: &CompensatorFile,
) -> Result<RealMatrix, String> {
    if let Some(m) = &parts.m_des {
        return Ok(m.clone());
    }
    if let Some(canonical) = comp_file.to_canonical().map_err(err_text)? {
        return Ok(canonical.m_des.clone());
    }
    Err("no reference moment: the model has no `M_des` and the compensator \
         document carries no structured blocks"
        .to_string())
}

/// Comma-separated floats; an empty string means "all ones" of length `nu`.
fn parse_omega0(text: &str, nu: usize) -> Result<DVector<f64>, String> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(DVector::from_element(nu, 1.0));
    }
    let values = trimmed
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{part}` is not a number"))
        })
        .collect::<Result<Vec<f64>, String>>()?;
    if values.len() != nu {
        return Err(format!(
            "initial generator state needs {nu} entries, got {}",
            values.len()
        ));
    }
    if !values.iter().all(|x| x.is_finite()) {
        return Err("initial generator state must be finite".to_string());
    }
    Ok(DVector::from_vec(values))
}

fn simulate_pipeline(
    model_toml: &str,
    compensator_toml: &str,
    omega0_csv: &str,
    t_end: f64,
    dt: f64,
) -> Result<(moment_forge::pipeline::SimulateOutcome, (usize, usize, usize)), String> {
    let (parts, _) = load_model(model_toml)?;
    let comp_file = CompensatorFile::from_toml(compensator_toml).map_err(err_text)?;
    let comp = comp_file.to_compensator().map_err(err_text)?;
    let reference = simulation_reference(&parts, &comp_file)?;
    let omega0 = parse_omega0(omega0_csv, parts.gen.nu())?;
    let opts = SimOptions {
        omega0,
        x0: None,
        xi0: None,
        t_end,
        dt,
        window: 0.2,
    };
    let outcome = run_simulate(&parts, &comp, &reference, &opts).map_err(err_text)?;
    let partition = outcome.partition;
    Ok((outcome, partition))
}

/// Simulates the interconnection and returns the trajectory as CSV
/// (`t, ω, x, ξ, y, y_des, err` columns).
pub fn simulate_csv(
    model_toml: &str,
    compensator_toml: &str,
    omega0_csv: &str,
    t_end: f64,
    dt: f64,
) -> Result<String, String> {
    let (outcome, (nu, n, rho)) =
        simulate_pipeline(model_toml, compensator_toml, omega0_csv, t_end, dt)?;
    trajectory_csv(&outcome.trajectory, nu, n, rho).map_err(err_text)
}

/// Simulates the interconnection and returns the steady-state summary as a
/// text report.
pub fn simulate_report(
    model_toml: &str,
    compensator_toml: &str,
    omega0_csv: &str,
    t_end: f64,
    dt: f64,
) -> Result<String, String> {
    let (outcome, _) = simulate_pipeline(model_toml, compensator_toml, omega0_csv, t_end, dt)?;
    let mut rep = RunReport::new("simulate");
    outcome.write_into(&mut rep);
    Ok(rep.render())
}
