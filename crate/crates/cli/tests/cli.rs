//! End-to-end runs of the `residue-lab` binary: output shape against the
//! committed schema, value spot checks, determinism, CSV layout, exit codes,
//! and the pin-oracle → regression-run roundtrip.

use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_residue-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON output")
}

/// Structural checks mirroring schema/output.schema.json.
fn assert_matches_schema(doc: &Value) {
    let schema_text = std::fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/output.schema.json"),
    )
    .expect("committed schema");
    let schema: Value = serde_json::from_str(&schema_text).unwrap();

    let obj = doc.as_object().expect("top level is an object");
    for key in schema["required"].as_array().unwrap() {
        assert!(
            obj.contains_key(key.as_str().unwrap()),
            "missing top-level key {key}"
        );
    }
    assert_eq!(obj.len(), 4, "no extra top-level keys");
    assert!(doc["experiment"].is_string());
    let config = doc["config"].as_object().expect("config object");
    for key in schema["properties"]["config"]["required"]
        .as_array()
        .unwrap()
    {
        assert!(
            config.contains_key(key.as_str().unwrap()),
            "missing config key {key}"
        );
    }
    let rows = doc["rows"].as_array().expect("rows array");
    for row in rows {
        for (k, v) in row.as_object().expect("row object") {
            assert!(
                v.is_string() || v.is_number() || v.is_boolean(),
                "row field {k} has unexpected type: {v}"
            );
        }
    }
    assert!(doc["meta"]["version"].is_string());
    assert!(doc["meta"]["runtime_ms"].is_u64());
}

#[test]
fn json_output_matches_schema_and_reruns_identically() {
    let args = ["squares", "--q", "105", "--h-grid", "1,2,4,8"];
    let a = run_json(&args);
    let b = run_json(&args);
    assert_matches_schema(&a);
    assert_eq!(a["rows"], b["rows"], "rows must be bit-identical");
    assert_eq!(a["config"], b["config"]);
    assert_eq!(a["experiment"], "squares");
}

#[test]
fn moments_row_carries_exact_value_and_bounds() {
    let doc = run_json(&[
        "moments",
        "--q",
        "15",
        "--offsets",
        "0,2",
        "--h",
        "4",
        "--k",
        "2",
    ]);
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row["moment"], "32/5");
    assert_eq!(row["moment_float"], 6.4);
    assert!(row["lemma12_ratio"].as_f64().unwrap() > 0.0);
    assert!(row["lemma21_ratio"].as_f64().unwrap() > 0.0);
    assert!((row["singular"].as_f64().unwrap() - 45.0 / 64.0).abs() < 1e-12);
    assert!(row["expsum_abs_err"].as_f64().unwrap() < 1e-9);
}

#[test]
fn squares_row_matches_hand_value() {
    let doc = run_json(&["squares", "--q", "15", "--h", "4"]);
    let row = &doc["rows"][0];
    assert_eq!(row["rhs"], "225/8");
    assert_eq!(row["rhs_float"], 28.125);
    assert_eq!(row["lhs_exact"], "28/5");
}

#[test]
fn gaps_csv_has_spec_columns() {
    let out = run(&[
        "gaps",
        "--q-family",
        "primorial:3",
        "--lambda",
        "2",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# experiment: gaps"));
    assert!(lines.next().unwrap().starts_with("# config: "));
    assert_eq!(lines.next().unwrap(), "q,omega,lambda,v_lambda,bound,ratio");
    assert_eq!(text.lines().count(), 3 + 3); // three primorials, one lambda
}

#[test]
fn verify_identities_passes_on_small_range() {
    let doc = run_json(&["verify-identities", "--q-range", "2..40"]);
    for row in doc["rows"].as_array().unwrap() {
        assert_eq!(row["pass"], Value::Bool(true), "row {row}");
    }
}

#[test]
fn omega_sets_inequality_holds() {
    let doc = run_json(&["omega-sets", "--q", "105", "--h-grid", "1,8,64"]);
    for row in doc["rows"].as_array().unwrap() {
        assert!(row["ratio"].as_f64().unwrap() <= 1.0 + 1e-9);
    }
}

#[test]
fn omega_sets_loads_class_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("classes.json");
    std::fs::write(
        &path,
        r#"{"primes": [3, 5], "classes": {"3": [0], "5": [0, 1]}}"#,
    )
    .unwrap();
    let doc = run_json(&[
        "omega-sets",
        "--classes",
        path.to_str().unwrap(),
        "--h-grid",
        "1,4",
    ]);
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["q"], 15);
    assert_eq!(rows[0]["system"], "file");
}

#[test]
fn corollary1_builds_expected_modulus_and_auto_grid() {
    let doc = run_json(&["corollary1", "--x", "20"]);
    let rows = doc["rows"].as_array().unwrap();
    // Halving grid from ⌊400/ln 20⌋ = 133 down to expected count ≥ 1.
    let hs: Vec<u64> = rows.iter().map(|r| r["h"].as_u64().unwrap()).collect();
    assert_eq!(hs, vec![8, 16, 33, 66, 133]);
    for row in rows {
        assert_eq!(row["q"], 899);
        assert_eq!(row["primes"], "29*31");
        assert!(row["expected"].as_f64().unwrap() >= 1.0);
        assert!(row["ratio"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    std::fs::write(&path, r#"{"q": 15, "h": 2, "offsets": [0, 2]}"#).unwrap();
    let doc = run_json(&[
        "moments",
        "--config",
        path.to_str().unwrap(),
        "--h",
        "4",
        "--k",
        "2",
    ]);
    let row = &doc["rows"][0];
    assert_eq!(row["q"], 15);
    assert_eq!(row["h"], 4, "flag wins over file");
    assert_eq!(row["moment"], "32/5");
}

#[test]
fn bad_config_exits_2() {
    let out = run(&["moments", "--q", "12"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("squarefree"), "stderr: {msg}");

    let out = run(&["squares", "--q", "30"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn violated_pin_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pins.json");
    std::fs::write(
        &path,
        r#"{"version": 1, "pins": {"thm02_exact_ratio_max": {"kind": "max", "value": 1e-9, "params": "strangled"}}}"#,
    )
    .unwrap();
    let out = run(&[
        "squares",
        "--q",
        "15",
        "--h",
        "4",
        "--pins",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pin"));
}

#[test]
fn pin_oracle_roundtrips_into_regression_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pins.json");
    let out = run(&[
        "pin-oracle",
        "--q-range",
        "2..120",
        "--x",
        "20",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let pins = manifest["pins"].as_object().unwrap();
    assert!(pins.contains_key("thm02_exact_ratio_max"));
    assert!(pins.contains_key("corollary1_ratio_min:x=20"));
    assert!(pins.contains_key("f_envelope_correlation_max"));

    // The sweep that produced the pin passes against it.
    let out = run(&[
        "squares",
        "--q-range",
        "3..119",
        "--h-grid",
        "pow2",
        "--pins",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn committed_default_pins_accept_current_code() {
    let pins = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../pins/default.json");
    for args in [
        vec![
            "gaps",
            "--q-family",
            "primorial:6",
            "--offsets",
            "0,2",
            "--lambda",
            "2,3",
        ],
        vec!["corollary1", "--x", "20,50"],
        vec!["bounds-sweep"],
    ] {
        let mut full = args.clone();
        full.push("--pins");
        let p = pins.to_str().unwrap();
        full.push(p);
        let out = run(&full);
        assert!(
            out.status.success(),
            "{args:?} failed against committed pins: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
