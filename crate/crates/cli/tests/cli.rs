use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spiral-scan"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(cmd: &mut Command) -> (i32, Value) {
    let out = cmd.output().expect("binary runs");
    let stdout = String::from_utf8(out.stdout).expect("utf-8 output");
    let diag: Value = serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("bad diagnostic ({e}): {stdout}"));
    (out.status.code().expect("exit code"), diag)
}

fn simulate(tmp: &TempDir, file: &Path) -> (i32, Value) {
    run(bin().arg("simulate").arg(file).arg("--out").arg(tmp.path()))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const INNER_SURFACE: &str =
    r#"{"kind": "cylinder", "radius": 4.0, "sigma": 1, "h_minus": 0.0, "h_plus": 2.0, "delta_h": 0.5}"#;

#[test]
fn flagship_scenario_succeeds_with_three_or_more_legs() {
    let tmp = TempDir::new().unwrap();
    let (code, diag) = simulate(&tmp, &scenario("cylinder_outer.json"));
    assert_eq!(code, 0, "{diag:#}");
    assert_eq!(diag["status"], "ok");
    assert!(diag["summary"]["legs"].as_u64().unwrap() >= 3);

    let dir = tmp.path().join("cylinder_outer");
    for f in [
        "trajectory.csv",
        "report.json",
        "certificate.json",
        "setup.json",
        "surface.json",
        "diagnostic.json",
        "path3d.csv",
        "distance.csv",
        "altitude.csv",
        "coverage_grid.csv",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert!(report["legs"].as_array().unwrap().len() >= 3);
    assert_eq!(report["passed"], true);
}

#[test]
fn coverage_grid_has_one_row_per_cell() {
    let tmp = TempDir::new().unwrap();
    let (code, _) = simulate(&tmp, &scenario("cylinder_outer.json"));
    assert_eq!(code, 0);
    let dir = tmp.path().join("cylinder_outer");
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    let cell_h = report["coverage_cell_h"].as_f64().unwrap();
    let cell_s = report["coverage_cell_s"].as_f64().unwrap();
    let rows = (2.0 / cell_h).round() as usize;
    let cols = (std::f64::consts::TAU / cell_s).round() as usize;
    let grid = fs::read_to_string(dir.join("coverage_grid.csv")).unwrap();
    assert_eq!(grid.lines().count() - 1, rows * cols);
}

#[test]
fn start_band_precondition_gives_its_own_exit_code() {
    let tmp = TempDir::new().unwrap();
    let text = format!(
        r#"{{
        "name": "too_deep",
        "surface": {INNER_SURFACE},
        "vehicle": {{"v": 1.0, "u_max": 2.0, "position": [0.8, 0.0, 1.0], "heading": [0.0, -1.0, 0.0]}},
        "zone": {{"d_minus": 0.3, "d0": 1.0, "d_plus": 3.0, "d_safe": 0.2}},
        "auto_tune": {{"method": "revolution", "bounds": {{"beta_bar": 0.0, "rho_minus": 4.0, "rho_plus": 4.0,
            "c_plus": 0.0, "rho_in_minus": 0.5, "rho_in_plus": 1.0}}}},
        "run_length": 50.0
    }}"#
    );
    let file = write(tmp.path(), "too_deep.json", &text);
    let (code, diag) = simulate(&tmp, &file);
    assert_eq!(code, 4, "{diag:#}");
    assert_eq!(diag["error"]["kind"], "precondition");
    assert!(tmp.path().join("too_deep").join("diagnostic.json").is_file());
}

#[test]
fn run_shorter_than_initial_mode_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let mut value: Value = serde_json::from_str(&fs::read_to_string(scenario("cylinder_outer.json")).unwrap()).unwrap();
    value["run_length"] = 1.0.into();
    let file = write(tmp.path(), "short.json", &value.to_string());
    let (code, diag) = simulate(&tmp, &file);
    assert_eq!(code, 2, "{diag:#}");
    assert_eq!(diag["error"]["kind"], "invalid_config");
}

#[test]
fn malformed_scenario_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let file = write(tmp.path(), "broken.json", "{ not json");
    let (code, diag) = simulate(&tmp, &file);
    assert_eq!(code, 2);
    assert_eq!(diag["status"], "error");
}

#[test]
fn missing_scenario_file_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let (code, diag) = simulate(&tmp, &tmp.path().join("absent.json"));
    assert_eq!(code, 1);
    assert_eq!(diag["error"]["kind"], "io");
}

#[test]
fn infeasible_tuning_gives_its_own_exit_code() {
    let tmp = TempDir::new().unwrap();
    let mut value: Value = serde_json::from_str(&fs::read_to_string(scenario("vase_outer.json")).unwrap()).unwrap();
    value["surface"] = serde_json::json!({"kind": "vase", "base": 1.0, "amplitude": 0.9, "frequency": 1.0,
        "phase": 0.0, "sigma": 0, "h_minus": -3.0, "h_plus": 0.0, "delta_h": 0.5});
    value["vehicle"]["position"] = serde_json::json!([2.5, 0.0, -1.5]);
    value["vehicle"]["u_max"] = 2.0.into();
    value["zone"] = serde_json::json!({"d_minus": 0.2, "d0": 1.0, "d_plus": 2.0, "d_safe": 0.1});
    let file = write(tmp.path(), "bump.json", &value.to_string());
    let (code, diag) = simulate(&tmp, &file);
    assert_eq!(code, 3, "{diag:#}");
}

#[test]
fn repeated_runs_are_bit_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(simulate(&a, &scenario("cone_outer.json")).0, 0);
    assert_eq!(simulate(&b, &scenario("cone_outer.json")).0, 0);
    let read = |t: &TempDir| fs::read(t.path().join("cone_outer").join("trajectory.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn batch_matches_sequential_runs() {
    let seq = TempDir::new().unwrap();
    let par = TempDir::new().unwrap();
    let files = [scenario("cylinder_inner.json"), scenario("revolution_outer.json")];
    let (code, diag) = run(bin().arg("simulate").args(&files).arg("--out").arg(seq.path()));
    assert_eq!(code, 0, "{diag:#}");
    assert_eq!(diag["runs"].as_array().unwrap().len(), 2);
    let (code, _) = run(bin().arg("simulate").args(&files).arg("--batch").arg("--out").arg(par.path()));
    assert_eq!(code, 0);
    for name in ["cylinder_inner", "revolution_outer"] {
        let read = |t: &TempDir| fs::read(t.path().join(name).join("trajectory.csv")).unwrap();
        assert_eq!(read(&seq), read(&par), "{name}");
    }
}

#[test]
fn tune_then_validate_then_report() {
    let tmp = TempDir::new().unwrap();
    let problem = write(
        tmp.path(),
        "problem.json",
        r#"{"sigma": 1, "beta_bar": 0.0, "rho_minus": 4.0, "rho_plus": 4.0, "c_plus": 0.0,
            "rho_in_minus": 2.2, "rho_in_plus": 2.4, "h_minus": 0.0, "h_plus": 2.0, "delta_h": 0.5,
            "v": 1.0, "u_max": 2.0, "d0": 1.0, "d_safe": 0.2, "eta_cap": 0.2}"#,
    );
    let cert = tmp.path().join("cert.json");
    let (code, diag) = run(bin().arg("tune").arg(&problem).arg("--out").arg(&cert));
    assert_eq!(code, 0, "{diag:#}");
    assert!(diag["summary"]["delta_rho"].as_f64().unwrap() > 0.0);

    let surface = write(tmp.path(), "surface.json", INNER_SURFACE);
    let (code, diag) = run(bin().arg("validate").arg(&cert).arg(&surface));
    assert_eq!(code, 0, "{diag:#}");
    assert!(diag["failures"].as_array().unwrap().is_empty());

    let (code, _) = simulate(&tmp, &scenario("revolution_inner.json"));
    assert_eq!(code, 0);
    let dir = tmp.path().join("revolution_inner");
    let out = tmp.path().join("again.json");
    let (code, diag) =
        run(bin().arg("report").arg(dir.join("trajectory.csv")).arg(dir.join("surface.json")).arg("--out").arg(&out));
    assert_eq!(code, 0, "{diag:#}");
    let original: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    let again: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(original["complete_legs"], again["complete_legs"]);
    assert_eq!(original["coverage_fraction"], again["coverage_fraction"]);
}

#[test]
fn tampered_certificate_fails_validation() {
    let tmp = TempDir::new().unwrap();
    let (code, _) = simulate(&tmp, &scenario("revolution_outer.json"));
    assert_eq!(code, 0);
    let dir = tmp.path().join("revolution_outer");
    let mut cert: Value = serde_json::from_str(&fs::read_to_string(dir.join("certificate.json")).unwrap()).unwrap();
    let eta = cert["params"]["eta_star"].as_f64().unwrap();
    cert["params"]["eta_star"] = (10.0 * eta).into();
    let tampered = write(tmp.path(), "tampered.json", &cert.to_string());
    let (code, diag) = run(bin().arg("validate").arg(&tampered).arg(dir.join("surface.json")));
    assert_eq!(code, 6, "{diag:#}");
    assert!(!diag["failures"].as_array().unwrap().is_empty());
}

#[test]
fn report_without_setup_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let traj = write(tmp.path(), "trajectory.csv", "t,x,y,z,ix,iy,iz,h,d,h_dot,d_dot,mode,ux,uy,uz\n");
    let surface = write(tmp.path(), "surface.json", INNER_SURFACE);
    let (code, diag) = run(bin().arg("report").arg(&traj).arg(&surface));
    assert_eq!(code, 1);
    assert_eq!(diag["status"], "error");
}
