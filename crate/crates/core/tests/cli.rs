use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.json"))
        .display()
        .to_string()
}

fn qso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qso")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn fixed_points_of_attracting_not_unique() {
    let out = qso(&["fixed-points", "--spec", &fixture("attracting_not_unique")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["tool"], "qso");
    assert!(v["spec_hash"].as_str().unwrap().starts_with("sha256:"));
    let points = v["result"]["points"].as_array().unwrap();
    assert_eq!(points.len(), 3);
    for p in points {
        assert!(p["residual"].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn classify_two_thirds() {
    let out = qso(&["classify", "--spec", &fixture("va_two_thirds"), "--seed", "7", "--samples", "200"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &json(&out)["result"];
    assert_eq!(r["uniqueness_conditions_met"], true);
    assert_eq!(r["contraction"]["is_strict"], false);
}

#[test]
fn validate_exit_codes() {
    let ok = qso(&["validate", "--spec", &fixture("va_half"), "--seed", "1", "--samples", "100"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(json(&ok)["result"]["b_bistochastic_evidence"], true);

    let dir = tempfile::tempdir().unwrap();
    let not_b = dir.path().join("not_b.json");
    // V(x) = (x1^2 + 2 x1 x2, x2^2) pushes mass to the first type.
    std::fs::write(
        &not_b,
        r#"{"n": 2, "coefficients": [{"i":1,"j":1,"k":1,"p":1},{"i":1,"j":2,"k":1,"p":1},{"i":2,"j":2,"k":2,"p":1}]}"#,
    )
    .unwrap();
    let bad = qso(&["validate", "--spec", not_b.to_str().unwrap(), "--seed", "1", "--samples", "100"]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(json(&bad)["result"]["b_bistochastic_evidence"], false);

    let no_seed = qso(&["validate", "--spec", &fixture("va_half")]);
    assert_eq!(no_seed.status.code(), Some(3));
    assert_eq!(stderr_json(&no_seed)["error"]["kind"], "usage");
}

#[test]
fn parse_errors_report_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\n  \"n\": 2,\n  \"coefficients\": [oops]\n}\n").unwrap();
    let out = qso(&["fixed-points", "--spec", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let e = stderr_json(&out);
    assert_eq!(e["error"]["kind"], "parse");
    assert_eq!(e["error"]["line"], 3);
    assert!(out.stdout.is_empty());

    let missing = qso(&["fixed-points", "--spec", "/nonexistent/spec.json"]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn value_errors_exit_two() {
    let out = qso(&["iterate", "--spec", &fixture("va_half"), "--x", "0.7,0.7"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "validation");
    let out = qso(&["iterate", "--spec", &fixture("va_half"), "--x", "a,b"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(qso(&["no-such-command"]).status.code(), Some(3));
    assert_eq!(qso(&["abscont", "--x", "0.5,0.5", "--y", "0.5,0.5"]).status.code(), Some(3));
    assert_eq!(qso(&["--help"]).status.code(), Some(0));
    assert_eq!(qso(&["--version"]).status.code(), Some(0));
}

#[test]
fn iterate_csv_columns() {
    let out = qso(&["iterate", "--spec", &fixture("sufficiency_only"), "--x", "0.2,0.3,0.5", "--steps", "5", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "step,x_1,x_2,x_3,U_1,U_2,step_l1");
    assert_eq!(rows.len(), 7);
    assert!(text.starts_with("# qso "));
    let mut prev = f64::INFINITY;
    for row in &rows[1..] {
        let cells: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cells[1] + cells[2] + cells[3] - 1.0).abs() < 1e-12);
        assert!(cells[4] <= prev + 1e-12);
        prev = cells[4];
    }
}

#[test]
fn markov_reports_cylinders() {
    let out = qso(&["markov", "--spec", &fixture("va_half"), "--x", "0.5,0.5", "--horizon", "3", "--cylinder", "0:1,2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["result"];
    assert_eq!(r["transition_matrices"].as_array().unwrap().len(), 3);
    assert_eq!(r["states"].as_array().unwrap().len(), 4);
    // x1 * H^[0,1]_{12} = 0.5 * (1 - 0.5 * 0.5)
    assert!((r["cylinders"][0]["measure"].as_f64().unwrap() - 0.375).abs() < 1e-15);
}

#[test]
fn mixing_csv() {
    let out = qso(&[
        "mixing", "--spec", &fixture("va_half"), "--x", "0.5,0.5", "--a-set", "0:1", "--b-set", "0:1", "--m-max", "8", "--format", "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "m,tau_m,bound_m"));
}

#[test]
fn abscont_example() {
    let out = qso(&["abscont", "--a", "0.5", "--x", "0.3,0.7", "--y", "0.6,0.4", "--m-max", "12"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["result"];
    assert_eq!(r["series"]["classification"], "equivalent_evidence");
    assert!(!r["printed_formula_discrepancies"].as_array().unwrap().is_empty());

    let csv = qso(&["abscont", "--a1", "0.4", "--a2", "0.6", "--x", "0.3,0.7", "--y", "0.6,0.4", "--format", "csv"]);
    assert_eq!(csv.status.code(), Some(0));
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.lines().any(|l| l == "m,K_term,Khat_term,partial_sum"));

    let generic = qso(&["abscont", "--spec", &fixture("sufficiency_only"), "--x", "0.2,0.3,0.5", "--y", "0.3,0.3,0.4", "--m-max", "6"]);
    assert_eq!(generic.status.code(), Some(0), "{}", String::from_utf8_lossy(&generic.stderr));
    assert_eq!(json(&generic)["result"]["series"]["heuristic"], true);
}

#[test]
fn outputs_are_deterministic() {
    let args = ["classify", "--spec", &fixture("sufficiency_only"), "--seed", "11", "--samples", "500"];
    let a = qso(&args);
    let b = qso(&args);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn out_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("reports");
    let out = qso(&["fixed-points", "--spec", &fixture("va_half"), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(out_dir.join("fixed-points.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["command"], "fixed-points");
}
