//! Browser bindings: classification with limit-set predictions, orbits drawn
//! in the moment triangle, and renormalized power limits.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use qkleinian::classify::{catalog, classify_spec, spec_matrix, ElementSpec};
use qkleinian::dynamics::{limit_of_powers, orbit, Direction, DEFAULT_POWER_HORIZON};
use qkleinian::projective::ProjPoint;
use qkleinian::spectra::RANK_TOL;
use qkleinian::verify::predictions;

#[derive(Serialize)]
struct Classified {
    label: String,
    coarse: String,
    confidence: String,
    predictions: qkleinian::verify::Predictions,
}

/// JSON object `{name: spec}` of the canonical specs.
pub fn catalog_json() -> String {
    let map: serde_json::Map<String, serde_json::Value> = catalog()
        .into_iter()
        .map(|(n, s)| (n.to_string(), serde_json::to_value(ElementSpec::Structured(s)).expect("serializes")))
        .collect();
    serde_json::Value::Object(map).to_string()
}

pub fn classify_and_predict_json(spec: &str) -> Result<String, String> {
    let spec = ElementSpec::from_json(spec).map_err(|e| e.to_string())?;
    let (class, confidence) = classify_spec(&spec).map_err(|e| e.to_string())?;
    let out = Classified {
        label: class.fine.label(),
        coarse: format!("{:?}", class.coarse).to_lowercase(),
        confidence: format!("{confidence:?}"),
        predictions: predictions(&class).map_err(|e| e.to_string())?,
    };
    Ok(serde_json::to_string_pretty(&out).expect("serializes"))
}

/// Orbit of the real point `[x:y:z]` for `n ∈ [-steps, steps]`, mapped to the
/// moment triangle: each row is `(n, |x|², |y|², |z|²)` with unit-norm lift.
pub fn orbit_simplex_rows(spec: &str, x: f64, y: f64, z: f64, steps: u32) -> Result<Vec<f64>, String> {
    let spec = ElementSpec::from_json(spec).map_err(|e| e.to_string())?;
    let g = spec_matrix(&spec).map_err(|e| e.to_string())?;
    let p = ProjPoint::from_real(x, y, z).map_err(|e| e.to_string())?;
    let s = steps.min(5000) as i64;
    let trace = orbit(&g, &p, -s, s).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(trace.samples.len() * 4);
    for (n, q) in &trace.samples {
        let v = q.rep();
        out.push(*n as f64);
        out.extend((0..3).map(|i| v[i].norm_sqr()));
    }
    Ok(out)
}

#[derive(Serialize)]
struct Limits {
    direction: Direction,
    maps: Vec<qkleinian::dynamics::PseudoProjective>,
}

pub fn power_limit_json(spec: &str, backward: bool) -> Result<String, String> {
    let spec = ElementSpec::from_json(spec).map_err(|e| e.to_string())?;
    let g = spec_matrix(&spec).map_err(|e| e.to_string())?;
    let direction = if backward { Direction::Backward } else { Direction::Forward };
    let maps = limit_of_powers(&g, direction, DEFAULT_POWER_HORIZON, RANK_TOL).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string_pretty(&Limits { direction, maps }).expect("serializes"))
}

#[wasm_bindgen]
pub fn catalog_specs() -> String {
    catalog_json()
}

#[wasm_bindgen]
pub fn classify_and_predict(spec: &str) -> Result<String, JsError> {
    classify_and_predict_json(spec).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn orbit_simplex(spec: &str, x: f64, y: f64, z: f64, steps: u32) -> Result<Vec<f64>, JsError> {
    orbit_simplex_rows(spec, x, y, z, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn power_limit(spec: &str, backward: bool) -> Result<String, JsError> {
    power_limit_json(spec, backward).map_err(|e| JsError::new(&e))
}
