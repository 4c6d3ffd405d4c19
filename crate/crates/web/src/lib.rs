//! Browser bindings. Every export takes plain numbers and strings and
//! returns a JSON document; failures come back as `{"error": "..."}` so the
//! page never has to catch exceptions.

use manifold_newton::experiment::{residual_curve, run_case, run_rate_study, ExperimentConfig, ExperimentKind};
use manifold_newton::mreglab::{verify_regularity, MapVariant, RegularityProbe};
use manifold_newton::{Error, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

/// Largest sample count accepted from the page.
pub const MAX_PROBE_SAMPLES: usize = 20_000;
/// Largest matrix size accepted from the page.
pub const MAX_MATRIX_SIZE: usize = 8;

fn render(result: Result<Value>) -> String {
    result.unwrap_or_else(|e| json!({ "error": e.to_string() })).to_string()
}

/// Residual history `‖Φ(p_k)‖` of one constrained Karcher case.
pub fn karcher_curve_json(case: &str, seed: u64) -> Result<Value> {
    let mut config = ExperimentConfig::karcher_case(case)?;
    config.seed = seed;
    let outcome = run_case(&config)?;
    let curve: Vec<Value> = residual_curve(outcome.history()).into_iter().map(|(k, r)| json!([k, r])).collect();
    Ok(json!({
        "summary": outcome.row,
        "curve": curve,
        "warnings": outcome.warnings,
    }))
}

/// Rate estimates of the scalar problem under every rule and of the A1
/// Karcher case under the exact rule.
pub fn rate_study_json(iota: f64, seed: u64) -> Result<Value> {
    let mut config = ExperimentConfig::new(ExperimentKind::ScalarRateStudy);
    config.iota = iota;
    config.seed = seed;
    Ok(json!({ "rows": run_rate_study(&config)? }))
}

/// Certified regularity probe of one trace map.
pub fn regularity_probe_json(variant: &str, n: usize, samples: usize, seed: u64) -> Result<Value> {
    if n == 0 || n > MAX_MATRIX_SIZE || samples == 0 || samples > MAX_PROBE_SAMPLES {
        return Err(Error::Config(format!("need 1 ≤ n ≤ {MAX_MATRIX_SIZE} and 1 ≤ samples ≤ {MAX_PROBE_SAMPLES}")));
    }
    let variant: MapVariant = variant.parse()?;
    let defaults = ExperimentConfig::new(ExperimentKind::MregProbe);
    let probe = RegularityProbe::certified(variant, n, defaults.ball_radius, samples, seed)?;
    Ok(serde_json::to_value(verify_regularity(&probe)?).expect("report serializes"))
}

#[wasm_bindgen]
pub fn karcher_curve(case: &str, seed: u32) -> String {
    render(karcher_curve_json(case, u64::from(seed)))
}

#[wasm_bindgen]
pub fn rate_study(iota: f64, seed: u32) -> String {
    render(rate_study_json(iota, u64::from(seed)))
}

#[wasm_bindgen]
pub fn regularity_probe(variant: &str, n: u32, samples: u32, seed: u32) -> String {
    render(regularity_probe_json(variant, n as usize, samples as usize, u64::from(seed)))
}
