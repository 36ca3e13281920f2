//! `spiral-scan` command line: runs scenarios, tunes controllers, audits
//! certificates and re-analyzes recorded trajectories.
//!
//! Every invocation prints one JSON diagnostic on stdout, whatever the outcome.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use spiral_scan::analysis::ScanReport;
use spiral_scan::geometry::SurfaceDescription;
use spiral_scan::scenario::{
    analyze, run_scenario, write_json, write_outputs, CoverageConfig, RunOutcome, RunSetup, Scenario, SETUP_FILE,
};
use spiral_scan::tuning::{tune_revolution, validate_certificate, RevolutionProblem, TuningCertificate};
use spiral_scan::vehicle::read_trajectory_csv;
use spiral_scan::Error;

const EXIT_OK: u8 = 0;
const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TUNING: u8 = 3;
const EXIT_PRECONDITION: u8 = 4;
const EXIT_VERTICAL_HEADING: u8 = 5;
const EXIT_RUN_FAILED: u8 = 6;

const DIAGNOSTIC_FILE: &str = "diagnostic.json";

#[derive(Parser)]
#[command(name = "spiral-scan", version, about = "Repeated spiral scanning of surfaces by a 3D unicycle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios and write their artifacts.
    Simulate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Output root; each run writes into `<out>/<scenario name>`.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Override the integration step of every scenario.
        #[arg(long)]
        dt: Option<f64>,
        /// Run the scenarios concurrently.
        #[arg(long)]
        batch: bool,
    },
    /// Closed-form tuning for a surface of revolution.
    Tune {
        problem: PathBuf,
        #[arg(long, default_value = "certificate.json")]
        out: PathBuf,
    },
    /// Re-check every inequality recorded in a certificate.
    Validate { certificate: PathBuf, surface: PathBuf },
    /// Analyze a recorded trajectory.
    Report {
        trajectory: PathBuf,
        surface: PathBuf,
        /// Controller parameters and zone; defaults to `setup.json` next to the trajectory.
        #[arg(long)]
        setup: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::BandViolation { .. } => "band_violation",
        Error::SideViolation { .. } => "side_violation",
        Error::NonuniqueProjection { .. } => "nonunique_projection",
        Error::VerticalNormal { .. } => "vertical_normal",
        Error::NotTangent { .. } => "not_tangent",
        Error::VerticalHeading { .. } => "vertical_heading",
        Error::Infeasible { .. } => "infeasible",
        Error::TuningFailure { .. } => "tuning_failure",
        Error::Precondition { .. } => "precondition",
        Error::InitialDisks { .. } => "initial_disks",
        Error::InsufficientRun { .. } => "insufficient_run",
        Error::InvalidConfig(_) => "invalid_config",
        Error::InvariantViolated(_) => "invariant_violated",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        Error::Csv(_) => "csv",
    }
}

/// Exit code for an error raised before or outside the closed loop.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::Json(_) | Error::BandViolation { .. } | Error::SideViolation { .. } => {
            EXIT_CONFIG
        }
        Error::TuningFailure { .. } | Error::Infeasible { .. } | Error::InitialDisks { .. } => EXIT_TUNING,
        Error::Precondition { .. } => EXIT_PRECONDITION,
        Error::VerticalHeading { .. } => EXIT_VERTICAL_HEADING,
        Error::InsufficientRun { .. } => EXIT_RUN_FAILED,
        _ => EXIT_OTHER,
    }
}

/// Exit code for an error that stopped a running simulation.
fn abort_code(e: &Error) -> u8 {
    match e {
        Error::VerticalHeading { .. } => EXIT_VERTICAL_HEADING,
        _ => EXIT_RUN_FAILED,
    }
}

fn error_json(e: &Error) -> Value {
    json!({ "kind": error_kind(e), "message": e.to_string() })
}

fn failure(command: &str, e: &Error) -> (u8, Value) {
    let code = exit_code(e);
    (code, json!({ "command": command, "status": "error", "exit_code": code, "error": error_json(e) }))
}

fn report_summary(report: &ScanReport) -> Value {
    json!({
        "legs": report.legs.len(),
        "complete_legs": report.complete_legs,
        "coverage_fraction": report.coverage_fraction,
        "windings": report.windings,
        "min_d": report.safety.min_d,
        "safe": report.safety.passed,
        "passed": report.passed,
    })
}

fn outcome_json(name: &str, dir: &Path, outcome: &RunOutcome) -> (u8, Value) {
    let (code, status) = match &outcome.abort {
        Some(e) => (abort_code(e), "aborted"),
        None if outcome.report.passed => (EXIT_OK, "ok"),
        None => (EXIT_RUN_FAILED, "failed"),
    };
    let p = &outcome.setup.params;
    let mut diag = json!({
        "scenario": name,
        "status": status,
        "exit_code": code,
        "out": dir.display().to_string(),
        "samples": outcome.samples.len(),
        "params": { "u_h": p.u_h, "eta_star": p.eta_star, "gamma": p.gamma, "delta": p.delta, "T_in": p.t_in },
        "summary": report_summary(&outcome.report),
    });
    if let Some(e) = &outcome.abort {
        diag["error"] = error_json(e);
    }
    (code, diag)
}

fn simulate_one(path: &Path, out: &Path, dt: Option<f64>) -> (u8, Value) {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    let scenario = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => return with_scenario(failure("simulate", &e), &stem),
    };
    let name = if scenario.name.is_empty() { stem } else { scenario.name.clone() };
    let dir = out.join(&name);
    let result = run_scenario(&scenario, dt).and_then(|outcome| {
        write_outputs(&outcome, &dir)?;
        Ok(outcome)
    });
    let (code, diag) = match result {
        Ok(outcome) => outcome_json(&name, &dir, &outcome),
        Err(e) => with_scenario(failure("simulate", &e), &name),
    };
    if fs::create_dir_all(&dir).is_ok() {
        let _ = write_json(&dir.join(DIAGNOSTIC_FILE), &diag);
    }
    (code, diag)
}

fn with_scenario((code, mut diag): (u8, Value), name: &str) -> (u8, Value) {
    diag["scenario"] = json!(name);
    (code, diag)
}

fn simulate(scenarios: &[PathBuf], out: &Path, dt: Option<f64>, batch: bool) -> (u8, Value) {
    let results: Vec<(u8, Value)> = if batch {
        std::thread::scope(|s| {
            let handles: Vec<_> = scenarios.iter().map(|p| s.spawn(move || simulate_one(p, out, dt))).collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join().unwrap_or_else(|_| {
                        (
                            EXIT_OTHER,
                            json!({ "status": "error", "exit_code": EXIT_OTHER, "error": { "kind": "panic" } }),
                        )
                    })
                })
                .collect()
        })
    } else {
        scenarios.iter().map(|p| simulate_one(p, out, dt)).collect()
    };
    if results.len() == 1 {
        let (code, mut diag) = results.into_iter().next().expect("one result");
        diag["command"] = json!("simulate");
        return (code, diag);
    }
    let code = results.iter().map(|(c, _)| *c).max().unwrap_or(EXIT_OK);
    let runs: Vec<Value> = results.into_iter().map(|(_, d)| d).collect();
    let status = if code == EXIT_OK { "ok" } else { "failed" };
    (code, json!({ "command": "simulate", "status": status, "exit_code": code, "runs": runs }))
}

fn tune(problem: &Path, out: &Path) -> (u8, Value) {
    let result = fs::read_to_string(problem)
        .map_err(Error::from)
        .and_then(|text| RevolutionProblem::from_json(&text))
        .and_then(|p| tune_revolution(&p))
        .and_then(|cert| {
            write_json(out, &cert)?;
            Ok(cert)
        });
    match result {
        Ok(cert) => {
            let p = &cert.params;
            let diag = json!({
                "command": "tune",
                "status": "ok",
                "exit_code": EXIT_OK,
                "out": out.display().to_string(),
                "summary": {
                    "k": cert.k,
                    "Delta": cert.big_delta,
                    "d_star": cert.d_star,
                    "delta_rho": cert.delta_rho,
                    "u_h": p.u_h,
                    "eta_star": p.eta_star,
                    "gamma": p.gamma,
                    "delta": p.delta,
                    "T_in": p.t_in,
                },
            });
            (EXIT_OK, diag)
        }
        Err(e) => failure("tune", &e),
    }
}

fn load_surface(path: &Path) -> spiral_scan::Result<SurfaceDescription> {
    SurfaceDescription::from_json(&fs::read_to_string(path)?)
}

fn validate(certificate: &Path, surface: &Path) -> (u8, Value) {
    let result = fs::read_to_string(certificate)
        .map_err(Error::from)
        .and_then(|text| TuningCertificate::from_json(&text))
        .and_then(|cert| {
            let surface = load_surface(surface)?.build()?;
            validate_certificate(&cert, &surface)
        });
    match result {
        Ok(report) => {
            let failures: Vec<&str> = report.failures().iter().map(|m| m.name.as_str()).collect();
            let (code, status) = if failures.is_empty() { (EXIT_OK, "ok") } else { (EXIT_RUN_FAILED, "failed") };
            let diag = json!({
                "command": "validate",
                "status": status,
                "exit_code": code,
                "failures": failures,
                "margins": report,
            });
            (code, diag)
        }
        Err(e) => failure("validate", &e),
    }
}

fn report(trajectory: &Path, surface: &Path, setup: Option<&Path>, out: Option<&Path>) -> (u8, Value) {
    let setup_path = setup
        .map(Path::to_path_buf)
        .unwrap_or_else(|| trajectory.parent().unwrap_or_else(|| Path::new(".")).join(SETUP_FILE));
    let result = (|| {
        let samples = read_trajectory_csv(BufReader::new(File::open(trajectory)?))?;
        let surface = load_surface(surface)?.build()?;
        let run = RunSetup::from_json(&fs::read_to_string(&setup_path)?)?;
        let (_, scan) = analyze(&samples, &surface, &run.zone, &run.params, &CoverageConfig::default())?;
        if let Some(out) = out {
            write_json(out, &scan)?;
        }
        Ok::<_, Error>((samples.len(), scan))
    })();
    match result {
        Ok((n, scan)) => {
            let (code, status) = if scan.passed { (EXIT_OK, "ok") } else { (EXIT_RUN_FAILED, "failed") };
            let mut diag = json!({
                "command": "report",
                "status": status,
                "exit_code": code,
                "samples": n,
                "summary": report_summary(&scan),
            });
            if let Some(out) = out {
                diag["out"] = json!(out.display().to_string());
            }
            (code, diag)
        }
        Err(e) => failure("report", &e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (code, diag) = match &cli.command {
        Command::Simulate { scenarios, out, dt, batch } => simulate(scenarios, out, *dt, *batch),
        Command::Tune { problem, out } => tune(problem, out),
        Command::Validate { certificate, surface } => validate(certificate, surface),
        Command::Report { trajectory, surface, setup, out } => {
            report(trajectory, surface, setup.as_deref(), out.as_deref())
        }
    };
    println!("{}", serde_json::to_string_pretty(&diag).expect("diagnostic serializes"));
    ExitCode::from(code)
}
