use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use num_complex::Complex64;
use szego::projection::{read_grid, write_grid, GridFunction, GridSpec};

fn szego(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_szego")).args(args).output().expect("binary runs")
}

fn heis(dir: &Path) -> String {
    let p = dir.join("heis.json");
    fs::write(&p, r#"{"p_coeffs":[0,0,1],"a":[1]}"#).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn eval_weight_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = szego(&["eval", "weight", "--model", &heis(dir.path()), "--eta", "0", "--tau", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["log_c"].as_f64().unwrap() + 0.693147).abs() < 1e-6);
    assert_eq!(v["in_sigma"], true);
    assert!(v["est_error"].is_number());
}

#[test]
fn eval_kernel_fields_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("two.json");
    fs::write(&m, r#"{"p_coeffs":[0,0,1],"a":[2,1]}"#).unwrap();
    let m = m.to_str().unwrap();
    let out = szego(&["eval", "kernel", "--model", m, "--alpha", "0,0,0,0", "--beta", "1,0,0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["leaf_offset"], serde_json::json!([0.0]));
    assert_eq!(v["on_leaf"], true);
    assert!((v["amplitude_re"].as_f64().unwrap() - 0.202642).abs() < 1e-6);
    assert!(v["amplitude_im"].as_f64().unwrap().abs() < 1e-12);

    let out = szego(&["eval", "kernel", "--model", &heis(dir.path()), "--alpha", "0,0,0", "--beta", "0,0,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diagonal"));

    let out = szego(&["eval", "kernel", "--model", "/no/such/model.json", "--alpha", "0,0,0", "--beta", "1,0,0"]);
    assert_eq!(out.status.code(), Some(1));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"p_coeffs":[0,0,1],"a":[1],"extra":1}"#).unwrap();
    let out = szego(&["eval", "weight", "--model", bad.to_str().unwrap(), "--eta", "0", "--tau", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn project_round_trip_and_guard() {
    let dir = tempfile::tempdir().unwrap();
    let model = heis(dir.path());
    let spec = GridSpec { n: 1, n_x: 40, n_y: 16, n_t: 16, x_max: 7.0, l_y: 16.0, l_t: 2.0 };
    let f = GridFunction::from_fn(spec, |x, y, t| {
        Complex64::new((-(x - 0.5) * (x - 0.5)).exp() * (0.3 * y).cos(), (-x * x).exp() * (2.0 * t[0]).sin())
    })
    .unwrap();
    let input = dir.path().join("in.json");
    let output = dir.path().join("out.json");
    let diag = dir.path().join("diag.json");
    write_grid(&input, &f).unwrap();
    let out = szego(&[
        "project", "--model", &model,
        "--input", input.to_str().unwrap(),
        "--output", output.to_str().unwrap(),
        "--diagnostics", diag.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let d: serde_json::Value = serde_json::from_str(&fs::read_to_string(&diag).unwrap()).unwrap();
    for k in ["guarded_slice_count", "energy_in_sigma", "runtime_ms"] {
        assert!(d.get(k).is_some(), "{k}");
    }
    let sf = read_grid(&output).unwrap();
    assert!(sf.norm() <= f.norm() * (1.0 + 1e-8));
    assert!(fs::metadata(dir.path().join("out.bin")).is_ok());

    // A box this narrow truncates the wide slices.
    let narrow = GridSpec { n_x: 8, x_max: 1.0, ..spec };
    let g = GridFunction::from_fn(narrow, |_, _, t| Complex64::from_polar(1.0, std::f64::consts::PI * t[0])).unwrap();
    write_grid(&input, &g).unwrap();
    let out = szego(&["project", "--model", &model, "--input", input.to_str().unwrap(), "--output", output.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(dir.path().join("in.bin"), [1u8, 2, 3]).unwrap();
    let out = szego(&["project", "--model", &model, "--input", input.to_str().unwrap(), "--output", output.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn geometry_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("samples.csv");
    let out = szego(&[
        "geometry", "--model", &heis(dir.path()),
        "--tangency", "0",
        "--gauge", "0,0,0", "1,0,0",
        "--size-report", "25", "--seed", "3",
        "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["commutators"][0]["coefficient_poly"], serde_json::json!([-2.0]));
    assert_eq!(v["tangency"]["span_dim_at_x"], 3);
    assert!((v["gauge"]["ratio"].as_f64().unwrap() - 0.2026423672846756).abs() < 1e-12);
    assert!(v["size_report"]["min_ratio"].as_f64().unwrap() > 0.0);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 26);
    assert!(text.starts_with("alpha_x,"));
}

#[test]
fn verify_exit_codes_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let out = szego(&["verify", "--suite", "geometry", "--seed", "7", "--no-timings"]);
    assert_eq!(out.status.code(), Some(0));
    let again = szego(&["verify", "--suite", "geometry", "--seed", "7", "--no-timings"]);
    assert_eq!(out.stdout, again.stdout);

    let report = dir.path().join("r.json");
    let out = szego(&["verify", "--suite", "weights", "--tolerance-override", "1e-16", "--report", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weights.gaussian_oracle_rel_error"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["pass"], false);
    assert!(v["checks"][0]["runtime_ms"].is_u64());
}

#[test]
fn logging_goes_to_stderr_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_szego"))
        .args(["verify", "--suite", "shift"])
        .env("SZEGO_LOG", "info")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shift_identity_rel_error"));
    let _: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    drop(dir);
}
