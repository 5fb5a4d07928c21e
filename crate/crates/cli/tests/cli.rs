use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conestab"))
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

const CIRCLE_CAP: &str = r#"{
    "ambient_dim": 2,
    "cone": {"type": "full"},
    "density": {"family": "radial", "k": 1.0},
    "surface": {"shape": {"kind": "cap", "radius": 1.0}, "grid": 64},
    "analyses": [{"kind": "minkowski"}, {"kind": "spectrum"}]
}"#;

#[test]
fn radial_sweep_finds_both_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", CIRCLE_CAP);
    let out = dir.path().join("out");
    let o = run(
        &["sweep", "--parameter", "k", "--from", "-4", "--to", "3", "--steps", "29"],
        &cfg,
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    let res = &r["analyses"][0]["result"];
    let mz = res["lambda_min_meanzero_sign_changes"].as_array().unwrap();
    let all = res["lambda_min_all_sign_changes"].as_array().unwrap();
    assert_eq!(mz.len(), 1);
    assert_eq!(all.len(), 1);
    assert!(mz[0].as_f64().unwrap().abs() < 1e-6);
    assert!((all[0].as_f64().unwrap() + 1.0).abs() < 1e-6);

    let csv = std::fs::read_to_string(out.join("sweep_0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "parameter,area,volume,H_f_mean,H_f_std,minkowski_residual,identity_gap,lambda_min_all,lambda_min_meanzero"
    );
    // k = -2 = -(n+1): the oriented volume is undefined, the row is kept
    let critical = csv.lines().find(|l| l.starts_with("-2e0,")).unwrap();
    assert_eq!(critical.split(',').nth(2), Some(""));
    assert_eq!(lines.count(), 29);
}

#[test]
fn report_fields_and_spectrum_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", CIRCLE_CAP);
    let out = dir.path().join("out");
    let o = run(&["run"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out);
    assert_eq!(r["tool"]["name"], "conestab");
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    let m = &r["analyses"][0]["result"];
    let area = m["area"].as_f64().unwrap();
    assert!(m["residual_integral"].as_f64().unwrap().abs() <= 1e-8 * area);
    assert!(m["identity_gap"].as_f64().unwrap().abs() <= 1e-8 * area);
    let arts = r["analyses"][1]["artifacts"].as_array().unwrap();
    assert_eq!(arts.len(), 2);
    for a in arts {
        let csv = std::fs::read_to_string(out.join(a.as_str().unwrap())).unwrap();
        assert!(csv.starts_with("index,eigenvalue\n"));
    }
    // Fourier references: -(1+k) and 1 - (1+k)
    let s = &r["analyses"][1]["result"];
    assert!((s["lambda_min_all"].as_f64().unwrap() + 2.0).abs() < 1e-6);
    assert!((s["lambda_min_meanzero"].as_f64().unwrap() + 1.0).abs() < 1e-6);
    let prov = r["provenance"]["entries"].as_array().unwrap();
    assert!(prov.iter().any(|e| e["method"] == "fourier_modes"));
}

#[test]
fn reruns_are_identical_up_to_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", CIRCLE_CAP);
    let out = dir.path().join("out");
    let strip = |out: &Path| {
        let text = std::fs::read_to_string(out.join("report.json")).unwrap();
        text.lines().filter(|l| !l.trim_start().starts_with("\"timestamp\"")).collect::<Vec<_>>().join("\n")
    };
    run(&["run"], &cfg, &out);
    let first = strip(&out);
    run(&["run"], &cfg, &out);
    assert_eq!(first, strip(&out));
}

#[test]
fn malformed_expression_exits_with_offset() {
    let dir = tempfile::tempdir().unwrap();
    let body = CIRCLE_CAP.replace(
        r#"{"family": "radial", "k": 1.0}"#,
        r#"{"family": "expression", "k": 1.0, "expression": "2 + sin(theta *"}"#,
    );
    let cfg = write_scenario(dir.path(), "s.json", &body);
    let o = run(&["verify"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("offset"), "{err}");
}

#[test]
fn unknown_keys_and_missing_files_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = CIRCLE_CAP.replace("\"ambient_dim\": 2,", "\"ambient_dim\": 2, \"extra\": true,");
    let cfg = write_scenario(dir.path(), "s.json", &body);
    let o = run(&["run"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
    let o = run(&["run"], &dir.path().join("missing.json"), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn non_stationary_surface_fails_verdict_but_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let body = CIRCLE_CAP.replace(
        r#"{"kind": "cap", "radius": 1.0}"#,
        r#"{"kind": "ellipsoid", "center": [0.0, 0.0], "semi_axes": [2.0, 1.0]}"#,
    );
    let cfg = write_scenario(dir.path(), "s.json", &body);
    let out = dir.path().join("out");
    let o = run(&["verify"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["passed"], false);
    let m = r["analyses"].as_array().unwrap().iter().find(|a| a["kind"] == "minkowski").unwrap();
    assert!(m["result"]["residual_integral"].as_f64().unwrap().abs() > 1e-3);
}

#[test]
fn backend_and_grid_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", CIRCLE_CAP);
    let out = dir.path().join("out");
    let o = run(&["spectrum", "--mode", "mean-zero", "--backend", "fem", "--grid", "256"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out);
    assert_eq!(r["scenario"]["surface"]["backend"], "fem");
    let s = &r["analyses"][0]["result"];
    assert_eq!(s["dofs"], 256);
    assert!((s["lambda_min_meanzero"].as_f64().unwrap() + 1.0).abs() < 0.02);
    assert_eq!(r["analyses"][0]["artifacts"].as_array().unwrap().len(), 1);
}

#[test]
fn certify_and_variation_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
        "ambient_dim": 3,
        "cone": {"type": "circular", "axis": [0.0, 0.0, 1.0], "half_aperture": 1.0},
        "density": {"family": "linear_power", "xi": [0.0, 0.0, 1.0], "k": 2.0},
        "surface": {"shape": {"kind": "cap", "radius": 1.0}, "grid": 20}
    }"#;
    let cfg = write_scenario(dir.path(), "s.json", body);
    let out = dir.path().join("out");
    let o = run(&["certify"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&out)["analyses"][0]["result"]["cd_certified"], true);
    let o = run(&["variation", "--kind", "dilation"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out);
    assert_eq!(r["command"], "variation");
    assert_eq!(r["analyses"][0]["result"]["reliable"], true);
}
