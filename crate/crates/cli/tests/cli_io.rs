//! Exit-code contract, output handling, and harness self-checks of the
//! command-line front end.

use std::io::Write;
use std::process::{Command, Stdio};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_wold2d")
}

fn run_stdin(config: &str, extra: &[&str]) -> std::process::Output {
    let mut child = Command::new(bin())
        .arg("--stdin")
        .args(extra)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn");
    child
        .stdin
        .as_mut()
        .unwrap()
        .write_all(config.as_bytes())
        .unwrap();
    child.wait_with_output().expect("wait")
}

#[test]
fn malformed_config_exits_2_with_no_output() {
    let out = run_stdin("this is not json", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty(), "partial output on config error");
}

#[test]
fn unknown_field_exits_2() {
    let out = run_stdin(r#"{"command":"psi","parameters":{"k":-2,"l":-3},"bogus":1}"#, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn out_of_bounds_radius_exits_2() {
    let cfg = r#"{"command":"field","parameters":{
        "cov":{"kind":"WhiteNoise","variance":1.0},
        "past":{"vector":[0,-1],"variant":"Sv"},"R":100}}"#;
    let out = run_stdin(cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn passing_run_exits_0_and_is_deterministic() {
    let cfg = r#"{"command":"field","parameters":{
        "cov":{"kind":"LineField","c":1,"d":1,"variance":1},
        "past":{"vector":[-1,-1],"variant":"Sv"},"R":12,
        "expect_label":"Evanescent"}}"#;
    let a = run_stdin(cfg, &["--seed", "3"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run_stdin(cfg, &["--seed", "3"]);
    assert_eq!(a.stdout, b.stdout, "reports are not byte-identical");
    let text: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(text["results"]["label"], "Evanescent");
    assert_eq!(text["checks"]["failed"], 0);
}

#[test]
fn failing_check_exits_1() {
    let cfg = r#"{"command":"field","parameters":{
        "cov":{"kind":"WhiteNoise","variance":1.0},
        "past":{"vector":[0,-1],"variant":"Sv"},"R":8,
        "expect_label":"Evanescent"}}"#;
    let out = run_stdin(cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["results"]["label"], "PurelyNondeterministic");
    assert!(report["checks"]["failed"].as_u64().unwrap() >= 1);
}

#[test]
fn text_format_prints_energy_table() {
    let cfg = r#"{"command":"field","parameters":{
        "cov":{"kind":"Sum","components":[
            {"kind":"WhiteNoise","variance":1.0},
            {"kind":"LineField","c":0,"d":1,"variance":1.0}]},
        "past":{"vector":[0,-1],"variant":"Sv"},"R":12}}"#;
    let out = run_stdin(cfg, &["--format", "text"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("total ma det evan\n"), "{text}");
    assert!(text.lines().nth(1).unwrap().starts_with("2 1 0 1"), "{text}");
}

#[test]
fn csv_round_trips_through_the_grid_reader() {
    let cfg = r#"{"command":"field","parameters":{
        "cov":{"kind":"MovingAverage","coeffs":[
            {"k":0,"l":0,"re":1.0},{"k":-1,"l":0,"re":0.5,"im":-0.25}],
            "noise_variance":1.0},
        "past":{"vector":[0,-1],"variant":"Sv"},"R":16,
        "simulate":{"window":4}}}"#;
    let out = run_stdin(cfg, &["--format", "csv", "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let grid = wold2d::field::SampleGrid::from_csv(&text).unwrap();
    assert_eq!(grid.window, 4);
    assert_eq!(grid.to_csv(), text);
}

#[test]
fn csv_rejected_without_simulation() {
    let out = run_stdin(
        r#"{"command":"psi","parameters":{"k":-2,"l":-3}}"#,
        &["--format", "csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn output_file_and_config_file_paths_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let out_path = dir.path().join("report.json");
    std::fs::write(
        &cfg_path,
        r#"{"command":"psi","parameters":{"k":-2,"l":-3}}"#,
    )
    .unwrap();
    let status = Command::new(bin())
        .args(["--config", cfg_path.to_str().unwrap()])
        .args(["--output", out_path.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    assert_eq!(report["results"]["p"], 2);
    assert_eq!(report["results"]["q"], -1);
}

#[test]
fn verify_scope_selects_batteries() {
    let out = Command::new(bin())
        .args(["--verify", "lattice_halfplane", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        report["results"]["verify"]["sections"],
        serde_json::json!(["lattice_halfplane"])
    );
    assert_eq!(report["checks"]["failed"], 0);

    let out = Command::new(bin()).args(["--verify", "bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupted_rotation_coefficients_fail_the_harness() {
    // The battery itself must catch a wrong coefficient pair.
    use wold2d_cli::verify::{rotation_battery, Battery};
    let mut b = Battery::default();
    rotation_battery(&mut b, |k, l| {
        let r = wold2d::halfplane::LatticeRotation::for_vector(k, l).unwrap();
        (r.p, r.q + 1)
    });
    assert!(b.failed > 0, "corrupted coefficients slipped through");

    let mut b = Battery::default();
    rotation_battery(&mut b, |k, l| {
        let r = wold2d::halfplane::LatticeRotation::for_vector(k, l).unwrap();
        (r.p, r.q)
    });
    assert_eq!(b.failed, 0);
}
