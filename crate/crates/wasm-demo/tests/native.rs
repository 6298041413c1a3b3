use qk_wasm_demo::{catalog_json, classify_and_predict_json, orbit_simplex_rows, power_limit_json};

fn spec(name: &str) -> String {
    let v: serde_json::Value = serde_json::from_str(&catalog_json()).unwrap();
    v[name].to_string()
}

#[test]
fn catalog_lists_every_subclass() {
    let v: serde_json::Value = serde_json::from_str(&catalog_json()).unwrap();
    assert_eq!(v.as_object().unwrap().len(), 15);
}

#[test]
fn classify_and_predict_screw() {
    let out: serde_json::Value = serde_json::from_str(&classify_and_predict_json(&spec("screw")).unwrap()).unwrap();
    assert_eq!(out["label"], "screw");
    assert_eq!(out["confidence"], "Exact");
    assert_eq!(out["predictions"]["dual"]["polars"], serde_json::json!(["e3"]));
}

#[test]
fn bad_spec_reports_field() {
    let err = classify_and_predict_json(r#"{"mode":"structured","class":5}"#).unwrap_err();
    assert!(err.contains("class"), "{err}");
}

#[test]
fn orbit_rows_are_barycentric() {
    let rows = orbit_simplex_rows(&spec("regular_loxodromic"), 1.0, 1.0, 1.0, 40).unwrap();
    assert_eq!(rows.len(), 81 * 4);
    for r in rows.chunks(4) {
        assert!((r[1] + r[2] + r[3] - 1.0).abs() < 1e-12);
    }
    let last = &rows[rows.len() - 4..];
    assert_eq!(last[0], 40.0);
    assert!(last[3] > 1.0 - 1e-12);
    let first = &rows[..4];
    assert!(first[1] > 1.0 - 1e-12);
}

#[test]
fn power_limit_kernel_of_vertical_translation() {
    let out: serde_json::Value = serde_json::from_str(&power_limit_json(&spec("vertical_translation"), false).unwrap()).unwrap();
    let kernel = &out["maps"][0]["kernel"];
    assert_eq!(kernel["type"], "line");
    assert!(power_limit_json(&spec("rational_elliptic"), false).is_ok());
}
