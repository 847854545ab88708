use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hyperobs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperobs"))
        .args(args)
        .env("HYPEROBS_LOG", "quiet")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn example(dir: &Path) {
    let out = hyperobs(&["example", "paper", "--out-dir", p(dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn example_then_verify_is_feasible() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let out = hyperobs(&[
        "verify",
        "--system",
        p(&dir.path().join("system.json")),
        "--certificate",
        p(&dir.path().join("certificate.json")),
    ]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["feasible"], true);
    assert!(report["k_margin"].as_f64().unwrap() < -1e-6);
    // idempotent
    let again = hyperobs(&[
        "verify",
        "--system",
        p(&dir.path().join("system.json")),
        "--certificate",
        p(&dir.path().join("certificate.json")),
    ]);
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn example_output_is_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    example(a.path());
    example(b.path());
    for f in ["system.json", "certificate.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    let leftovers: Vec<_> = fs::read_dir(a.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 2);
}

#[test]
fn infeasible_and_malformed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let sys = dir.path().join("system.json");
    let cert_text = fs::read_to_string(dir.path().join("certificate.json")).unwrap();
    let neg: Value = {
        let mut v: Value = serde_json::from_str(&cert_text).unwrap();
        for row in v["L"].as_array_mut().unwrap() {
            row[0] = Value::from(-row[0].as_f64().unwrap());
        }
        v
    };
    let neg_path = dir.path().join("neg.json");
    fs::write(&neg_path, neg.to_string()).unwrap();
    let out = hyperobs(&["verify", "--system", p(&sys), "--certificate", p(&neg_path)]);
    assert_eq!(code(&out), 2);
    assert_eq!(stdout_json(&out)["feasible"], false);

    let bad_dims = dir.path().join("bad.json");
    let mut wide: Value = serde_json::from_str(&cert_text).unwrap();
    wide["L"] = serde_json::json!([[0.4, 0.0], [0.2, 0.0]]);
    fs::write(&bad_dims, wide.to_string()).unwrap();
    let out = hyperobs(&["verify", "--system", p(&sys), "--certificate", p(&bad_dims)]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("L"), "{err}");

    let out = hyperobs(&["verify", "--system", "/nonexistent.json", "--certificate", p(&bad_dims)]);
    assert_eq!(code(&out), 1);
}

#[test]
fn verify_reports_structural_failure_as_verdict() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let text = fs::read_to_string(dir.path().join("certificate.json")).unwrap();
    let path = dir.path().join("mu.json");
    fs::write(&path, text.replace("\"mu\": 0.4", "\"mu\": -0.1")).unwrap();
    let out = hyperobs(&["verify", "--system", p(&dir.path().join("system.json")), "--certificate", p(&path)]);
    assert_eq!(code(&out), 2);
    assert_eq!(stdout_json(&out)["structural_ok"], false);
}

#[test]
fn design_writes_verifiable_certificate() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let sys = dir.path().join("system.json");
    let out_cert = dir.path().join("designed.json");
    let out = hyperobs(&["design", "--system", p(&sys), "--out", p(&out_cert), "--mu-grid", "0.3,0.4", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let res = stdout_json(&out);
    assert_eq!(res["report"]["feasible"], true);
    assert!(res["history"].as_array().unwrap().iter().all(|e| e.as_array().unwrap().len() == 2));
    let out = hyperobs(&["verify", "--system", p(&sys), "--certificate", p(&out_cert)]);
    assert_eq!(code(&out), 0);
}

#[test]
fn design_not_found_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("scalar.json");
    fs::write(
        &sys,
        r#"{"n_x": 1, "n_chi": 1, "n_z": 1, "n_y": 1, "lambda": [1.0],
            "A": [[1.0]], "B": [[0.0]], "C": [[0.0]], "Z": [[0.0]], "M": [[0.0]],
            "psi": {"kind": "deadzone", "width": 1.0}, "ell": 1.0}"#,
    )
    .unwrap();
    let cert = dir.path().join("c.json");
    let out = hyperobs(&["design", "--system", p(&sys), "--out", p(&cert), "--mu-grid", "0.5", "--restarts", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stdout_json(&out)["certificate"].is_null());
    assert!(!cert.exists());
}

#[test]
fn simulate_then_decay() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let sys = dir.path().join("system.json");
    let cert = dir.path().join("certificate.json");
    let traj = dir.path().join("traj.csv");
    let diag = dir.path().join("diag.csv");
    let out = hyperobs(&[
        "simulate", "--system", p(&sys), "--certificate", p(&cert), "--t-end", "2", "--cells", "40",
        "--out", p(&traj), "--diag", p(&diag), "--record-every", "5",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&traj).unwrap();
    assert!(csv.starts_with("t,field,component,node,value\n"));
    let diag_text = fs::read_to_string(&diag).unwrap();
    assert!(diag_text.starts_with("t,V,dist,envelope\n"));

    let out = hyperobs(&["decay", "--diag", p(&diag), "--certificate", p(&cert), "--system", p(&sys)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let res = stdout_json(&out);
    assert_eq!(res["envelope"]["holds"], true);
    assert!(res["fit"]["rate"].as_f64().unwrap() > 0.0);

    let out = hyperobs(&[
        "decay", "--diag", p(&diag), "--certificate", p(&cert), "--system", p(&sys), "--window", "0.5,1.5",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["fit"]["window"][0], 0.5);
}

#[test]
fn simulate_zero_horizon_and_json_format() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let traj = dir.path().join("traj.json");
    let out = hyperobs(&[
        "simulate",
        "--system",
        p(&dir.path().join("system.json")),
        "--certificate",
        p(&dir.path().join("certificate.json")),
        "--t-end",
        "0",
        "--cells",
        "16",
        "--scheme",
        "two-step-lxf",
        "--format",
        "json",
        "--out",
        p(&traj),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&traj).unwrap()).unwrap();
    assert_eq!(v["snapshots"].as_array().unwrap().len(), 1);
    assert_eq!(v["config"]["scheme"], "two-step-lxf");
}

#[test]
fn simulate_rejects_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    example(dir.path());
    let base = |extra: &[&str]| {
        let sys = dir.path().join("system.json");
        let cert = dir.path().join("certificate.json");
        let out = dir.path().join("t.csv");
        let mut args = vec![
            "simulate".to_string(), "--system".into(), p(&sys).into(), "--certificate".into(), p(&cert).into(),
            "--t-end".into(), "1".into(), "--out".into(), p(&out).into(),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        code(&hyperobs(&refs))
    };
    assert_eq!(base(&["--cells", "4"]), 1);
    assert_eq!(base(&["--cells", "16", "--cfl", "1.5"]), 1);
    assert_eq!(base(&["--cells", "16", "--scheme", "lax"]), 1);
    assert_eq!(base(&["--cells", "16", "--init", "/nonexistent.json"]), 1);
    assert_eq!(base(&["--cells", "16"]), 0);
}

#[test]
fn bad_log_setting_and_missing_subcommand() {
    let out = Command::new(env!("CARGO_BIN_EXE_hyperobs"))
        .args(["example", "paper", "--out-dir", "/tmp"])
        .env("HYPEROBS_LOG", "loud")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert_eq!(code(&hyperobs(&[])), 1);
}
