//! Closed-loop scenario runs and their output files.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{coverage_report, mean_pitch, CoverageReport, ScanReport};
use crate::controller::{ControllerConfig, ControllerParams, GuidanceController};
use crate::error::{Error, Result};
use crate::geometry::{axis_distance, OperationalZone, SurfaceDescription, SurfaceModel, Vec3};
use crate::tuning::{
    tune_generic, tune_revolution, RevolutionProblem, SurfaceBounds, TuningCertificate, TuningOptions, DEFAULT_KAPPA,
};
use crate::vehicle::{observables, write_trajectory_csv, TrajectorySample, Unicycle, VehicleState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleConfig {
    pub v: f64,
    pub u_max: f64,
    pub position: [f64; 3],
    pub heading: [f64; 3],
}

/// Standoff limits; the altitude band comes from the surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneConfig {
    pub d_minus: f64,
    pub d0: f64,
    pub d_plus: f64,
    pub d_safe: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneMethod {
    /// Grid evaluation on the surface itself.
    Generic,
    /// Closed form from the bound estimates.
    Revolution,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoTune {
    pub method: TuneMethod,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(flatten)]
    pub options: TuningOptions,
    /// Required by the closed-form method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<SurfaceBounds>,
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    /// Row height; defaults to the realized mean spiral pitch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_h: Option<f64>,
    /// Column width in azimuth; defaults to `2 pi / 64`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_s: Option<f64>,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_stride() -> usize {
    10
}

/// Scenario file. Exactly one of `controller` and `auto_tune` must be given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub surface: SurfaceDescription,
    pub vehicle: VehicleConfig,
    pub zone: ZoneConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_tune: Option<AutoTune>,
    /// Simulated time [s].
    pub run_length: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Every `record_every`-th step is written to the trajectory.
    #[serde(default = "default_stride")]
    pub record_every: usize,
    #[serde(default)]
    pub coverage: CoverageConfig,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidConfig(m));
        if self.controller.is_some() == self.auto_tune.is_some() {
            return invalid("exactly one of 'controller' and 'auto_tune' is required".into());
        }
        if !(self.dt > 0.0 && self.run_length > 0.0) {
            return invalid(format!("dt ({}) and run_length ({}) must be positive", self.dt, self.run_length));
        }
        if self.record_every == 0 {
            return invalid("record_every must be at least 1".into());
        }
        Ok(())
    }
}

/// Everything fixed before the loop starts.
#[derive(Clone, Debug)]
pub struct Setup {
    pub surface: SurfaceModel,
    pub zone: OperationalZone,
    pub vehicle: Unicycle,
    pub initial: VehicleState,
    pub params: ControllerParams,
    pub certificate: Option<TuningCertificate>,
}

/// Builds the surface, vehicle and zone, and tunes or loads the controller.
pub fn prepare(scenario: &Scenario) -> Result<Setup> {
    scenario.check()?;
    let surface = scenario.surface.build()?;
    let vc = &scenario.vehicle;
    let vehicle = Unicycle::new(vc.v, vc.u_max)?;
    let initial = VehicleState::new(Vec3::from(vc.position), Vec3::from(vc.heading))?;
    let z = &scenario.zone;
    let zone = OperationalZone::new(z.d_safe, z.d_minus, z.d0, z.d_plus, *surface.band())?;

    let (params, certificate) = match (&scenario.controller, &scenario.auto_tune) {
        (Some(config), _) => (config.into_params(vc.v), None),
        (None, Some(tune)) => {
            let cert = match tune.method {
                TuneMethod::Generic => {
                    tune_generic(&surface, &zone, vc.v, vc.u_max, tune.kappa, &tune.options, Some(&initial))?
                }
                TuneMethod::Revolution => {
                    let bounds = tune.bounds.ok_or_else(|| {
                        Error::InvalidConfig("closed-form tuning needs 'bounds' in 'auto_tune'".into())
                    })?;
                    let rho = axis_distance(&initial.r);
                    if !(bounds.rho_in_minus..=bounds.rho_in_plus).contains(&rho) {
                        return Err(Error::Precondition {
                            name: "start_radius".into(),
                            lhs: rho,
                            rhs: bounds.rho_in_minus,
                        });
                    }
                    tune_revolution(&RevolutionProblem {
                        sigma: surface.side(),
                        bounds,
                        band: *surface.band(),
                        v: vc.v,
                        u_max: vc.u_max,
                        d0: z.d0,
                        d_safe: z.d_safe,
                        kappa: tune.kappa,
                        options: tune.options,
                    })?
                }
            };
            (cert.params, Some(cert))
        }
        (None, None) => unreachable!("checked above"),
    };
    params.validate(vc.u_max)?;
    if scenario.run_length <= params.t_in {
        return Err(Error::InvalidConfig(format!(
            "run_length ({}) must exceed the initial-mode duration T_in ({})",
            scenario.run_length, params.t_in
        )));
    }
    Ok(Setup { surface, zone, vehicle, initial, params, certificate })
}

/// Recorded samples and the error that stopped the run early, if any.
#[derive(Debug)]
pub struct Simulation {
    pub samples: Vec<TrajectorySample>,
    pub abort: Option<Error>,
}

/// Fixed-step closed loop: the controller sees altitude and standoff at each
/// step and differentiates them itself; the control is held over the step.
pub fn simulate(setup: &Setup, run_length: f64, dt: f64, record_every: usize) -> Result<Simulation> {
    let mut controller = GuidanceController::new(setup.params, setup.vehicle.u_max)?;
    let v = setup.vehicle.v;
    let steps = (run_length / dt).round() as usize;
    let mut state = setup.initial;
    let mut samples = Vec::with_capacity(steps / record_every + 1);
    for n in 0..=steps {
        state.t = n as f64 * dt;
        let step = observables(&state, &setup.surface, v)
            .and_then(|obs| controller.update(state.t, obs.h, obs.d, &state.i).map(|out| (obs, out)));
        let (obs, out) = match step {
            Ok(x) => x,
            Err(e) => return Ok(Simulation { samples, abort: Some(e) }),
        };
        if n % record_every == 0 {
            samples.push(TrajectorySample::new(&state, &obs, out.mode, &out.u));
        }
        if n < steps {
            state = setup.vehicle.step(&state, &out.u, dt);
        }
    }
    Ok(Simulation { samples, abort: None })
}

/// Result of a scenario run.
#[derive(Debug)]
pub struct RunOutcome {
    pub setup: Setup,
    pub samples: Vec<TrajectorySample>,
    pub abort: Option<Error>,
    pub coverage: CoverageReport,
    pub report: ScanReport,
}

impl RunOutcome {
    /// The run completed, stayed safe and produced at least two complete legs.
    pub fn passed(&self) -> bool {
        self.abort.is_none() && self.report.passed
    }
}

pub fn analyze(
    samples: &[TrajectorySample],
    surface: &SurfaceModel,
    zone: &OperationalZone,
    params: &ControllerParams,
    coverage: &CoverageConfig,
) -> Result<(CoverageReport, ScanReport)> {
    let band = surface.band();
    let cell_h = coverage
        .cell_h
        .or_else(|| mean_pitch(samples, band.h_minus, band.h_plus))
        .unwrap_or(band.h_plus - band.h_minus);
    let cell_s = coverage.cell_s.unwrap_or(2.0 * PI / 64.0);
    let cov = coverage_report(samples, surface, cell_h, cell_s)?;
    let report = ScanReport::build(samples, zone, params, &cov);
    Ok((cov, report))
}

/// Prepares, simulates and analyzes a scenario. `dt` overrides the scenario step.
pub fn run_scenario(scenario: &Scenario, dt: Option<f64>) -> Result<RunOutcome> {
    let setup = prepare(scenario)?;
    let dt = dt.unwrap_or(scenario.dt);
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt = {dt} must be positive")));
    }
    let sim = simulate(&setup, scenario.run_length, dt, scenario.record_every)?;
    let (coverage, report) = analyze(&sim.samples, &setup.surface, &setup.zone, &setup.params, &scenario.coverage)?;
    Ok(RunOutcome { setup, samples: sim.samples, abort: sim.abort, coverage, report })
}

/// Controller parameters and zone of a run, as needed to re-analyze its trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSetup {
    pub params: ControllerParams,
    pub zone: OperationalZone,
}

impl RunSetup {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const REPORT_FILE: &str = "report.json";
pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const SETUP_FILE: &str = "setup.json";
pub const SURFACE_FILE: &str = "surface.json";

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes the trajectory, report, run setup, surface, certificate (when tuned)
/// and plot data into `dir`.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trajectory_csv(BufWriter::new(File::create(dir.join(TRAJECTORY_FILE))?), &outcome.samples)?;
    write_json(&dir.join(REPORT_FILE), &outcome.report)?;
    let setup = &outcome.setup;
    write_json(&dir.join(SETUP_FILE), &RunSetup { params: setup.params, zone: setup.zone })?;
    write_json(&dir.join(SURFACE_FILE), &SurfaceDescription::from(&setup.surface))?;
    if let Some(cert) = &setup.certificate {
        write_json(&dir.join(CERTIFICATE_FILE), cert)?;
    }
    let coverage = (!outcome.samples.is_empty()).then_some(&outcome.coverage);
    emit_plotdata(&outcome.samples, coverage, dir)
}

/// Column files for plotting: `path3d.csv`, `distance.csv`, `altitude.csv`
/// and `coverage_grid.csv` (one row per cell).
pub fn emit_plotdata(samples: &[TrajectorySample], coverage: Option<&CoverageReport>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let open = |name: &str| -> Result<csv::Writer<BufWriter<File>>> {
        Ok(csv::Writer::from_writer(BufWriter::new(File::create(dir.join(name))?)))
    };

    let mut path = open("path3d.csv")?;
    let mut distance = open("distance.csv")?;
    let mut altitude = open("altitude.csv")?;
    path.write_record(["t", "x", "y", "z"])?;
    distance.write_record(["t", "d"])?;
    altitude.write_record(["t", "h", "mode"])?;
    for s in samples {
        path.serialize((s.t, s.x, s.y, s.z))?;
        distance.serialize((s.t, s.d))?;
        altitude.serialize((s.t, s.h, s.mode))?;
    }
    path.flush()?;
    distance.flush()?;
    altitude.flush()?;

    let mut grid = open("coverage_grid.csv")?;
    grid.write_record(["row", "col", "h_center", "phi_center", "visited"])?;
    if let Some(c) = coverage {
        for (row, cells) in c.visited.iter().enumerate() {
            for (col, &hit) in cells.iter().enumerate() {
                grid.serialize((
                    row,
                    col,
                    c.h_minus + (row as f64 + 0.5) * c.cell_h,
                    (col as f64 + 0.5) * c.cell_s,
                    u8::from(hit),
                ))?;
            }
        }
    }
    grid.flush()?;
    Ok(())
}
