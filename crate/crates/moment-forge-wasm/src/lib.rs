//! WebAssembly bindings for the moment-synthesis pipeline.
//!
//! The exported surface is deliberately string-based — TOML documents in,
//! text reports and CSV out — so a static page can drive the full
//! analyze/synthesize/simulate loop with nothing but textareas and a canvas.
//! All computation lives in [`facade`], which is plain Rust and fully
//! unit-tested on the host; the `#[wasm_bindgen]` layer below only maps
//! errors onto JavaScript exceptions.

pub mod facade;

use wasm_bindgen::prelude::*;

/// The bundled aircraft model as an editable TOML document.
#[wasm_bindgen]
pub fn demo_model() -> String {
    facade::demo_model_toml()
}

/// Structural analysis report for a model document.
#[wasm_bindgen]
pub fn analyze(model_toml: &str) -> Result<String, JsError> {
    facade::analyze_report(model_toml).map_err(|e| JsError::new(&e))
}

/// Synthesizes a compensator for the model's `M_des`; returns its TOML.
#[wasm_bindgen]
pub fn synthesize(model_toml: &str, decay: f64) -> Result<String, JsError> {
    facade::synthesize_toml(model_toml, decay).map_err(|e| JsError::new(&e))
}

/// The full analysis/assignment/synthesis report.
#[wasm_bindgen(js_name = synthesizeReport)]
pub fn synthesize_report(model_toml: &str, decay: f64) -> Result<String, JsError> {
    facade::synthesize_report(model_toml, decay).map_err(|e| JsError::new(&e))
}

/// Simulates the closed loop; returns the trajectory as CSV.
#[wasm_bindgen(js_name = simulateCsv)]
pub fn simulate_csv(
    model_toml: &str,
    compensator_toml: &str,
    omega0_csv: &str,
    t_end: f64,
    dt: f64,
) -> Result<String, JsError> {
    facade::simulate_csv(model_toml, compensator_toml, omega0_csv, t_end, dt)
        .map_err(|e| JsError::new(&e))
}

/// Simulates the closed loop; returns the steady-state summary report.
#[wasm_bindgen(js_name = simulateReport)]
pub fn simulate_report(
    model_toml: &str,
    compensator_toml: &str,
    omega0_csv: &str,
    t_end: f64,
    dt: f64,
) -> Result<String, JsError> {
    facade::simulate_report(model_toml, compensator_toml, omega0_csv, t_end, dt)
        .map_err(|e| JsError::new(&e))
}
