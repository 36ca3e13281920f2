//! Constant-speed 3D unicycle `r' = v i`, `i' = u` with `<u, i> = 0` and
//! `|u| <= u_max`, and the altitude/standoff observables it generates.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::controller::ModeKind;
use crate::error::{Error, Result};
use crate::frames::{frame_at, SurfaceFrame};
use crate::geometry::{altitude, vertical, SurfaceModel, Vec3};

/// Below this `sin(alpha)` the heading counts as vertical.
pub const VERTICAL_HEADING_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleState {
    pub r: Vec3,
    pub i: Vec3,
    pub t: f64,
}

impl VehicleState {
    pub fn new(r: Vec3, i: Vec3) -> Result<Self> {
        let norm = i.norm();
        if !(norm.is_finite() && (norm - 1.0).abs() <= 1e-9) {
            return Err(Error::InvalidConfig(format!("heading must be a unit vector, |i| = {norm}")));
        }
        Ok(Self { r, i, t: 0.0 })
    }

    /// Angle between the heading and the vertical.
    pub fn alpha(&self) -> f64 {
        self.i.dot(&vertical()).clamp(-1.0, 1.0).acos()
    }
}

/// Orthogonal projection onto the plane normal to `i` followed by a radial
/// clamp to `u_max`.
pub fn project_control(u_raw: &Vec3, i: &Vec3, u_max: f64) -> Vec3 {
    let u = u_raw - i * u_raw.dot(i);
    let norm = u.norm();
    if norm > u_max {
        u * (u_max / norm)
    } else {
        u
    }
}

/// Vehicle parameters: surge speed `v` and turn-rate bound `u_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unicycle {
    pub v: f64,
    pub u_max: f64,
}

impl Unicycle {
    pub fn new(v: f64, u_max: f64) -> Result<Self> {
        if !(v > 0.0 && u_max > 0.0) {
            return Err(Error::InvalidConfig(format!("v and u_max must be positive, got {v} and {u_max}")));
        }
        Ok(Self { v, u_max })
    }

    /// Minimal turning radius `v / u_max`.
    pub fn turning_radius(&self) -> f64 {
        self.v / self.u_max
    }

    /// One RK4 step with the control held over the step in the body frame:
    /// the turn rate `omega = i x u` is frozen, so `i' = omega x i` equals `u`
    /// at the start of the step. The heading is renormalized afterwards.
    pub fn step(&self, state: &VehicleState, u: &Vec3, dt: f64) -> VehicleState {
        debug_assert!(dt > 0.0);
        self.advance(state, u, dt)
    }

    /// As [`Unicycle::step`] but accepts any sign of `dt`.
    pub(crate) fn advance(&self, state: &VehicleState, u: &Vec3, dt: f64) -> VehicleState {
        let omega = state.i.cross(u);
        let v = self.v;
        let deriv = |i: &Vec3| (i * v, omega.cross(i));

        let (k1r, k1i) = deriv(&state.i);
        let (k2r, k2i) = deriv(&(state.i + k1i * (dt / 2.0)));
        let (k3r, k3i) = deriv(&(state.i + k2i * (dt / 2.0)));
        let (k4r, k4i) = deriv(&(state.i + k3i * dt));

        let r = state.r + (k1r + k2r * 2.0 + k3r * 2.0 + k4r) * (dt / 6.0);
        let i = state.i + (k1i + k2i * 2.0 + k3i * 2.0 + k4i) * (dt / 6.0);
        VehicleState { r, i: i.normalize(), t: state.t + dt }
    }
}

/// What the robot can observe about its position relative to the surface,
/// with the analytic rates `h'` and `d'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observables {
    pub h: f64,
    pub d: f64,
    pub h_dot: f64,
    pub d_dot: f64,
    pub alpha: f64,
    /// Horizontally nearest surface point.
    pub b: Vec3,
    pub frame: SurfaceFrame,
}

/// Altitude, standoff and their exact rates:
/// `h' = v <i, e_z>`, `d' = -v <i, n> - h' cot(theta)`.
pub fn observables(state: &VehicleState, surface: &SurfaceModel, v: f64) -> Result<Observables> {
    let d = surface.horizontal_distance(&state.r)?;
    let b = surface.nearest_boundary_point(&state.r)?;
    let frame = frame_at(surface, &b)?;
    let h_dot = v * state.i.dot(&vertical());
    let d_dot = -v * state.i.dot(&frame.n) - h_dot * frame.cot_theta();
    Ok(Observables { h: altitude(&state.r), d, h_dot, d_dot, alpha: state.alpha(), b, frame })
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Tangential speed of the nearest point along the slice,
/// `sgn<i,T0> sqrt(v^2 - h'^2/sin^2 - 2 h' d' cot - d'^2)`.
pub fn slice_speed(frame: &SurfaceFrame, i: &Vec3, h_dot: f64, d_dot: f64, v: f64) -> f64 {
    let s = frame.sin_theta();
    let radicand = v * v - h_dot * h_dot / (s * s) - 2.0 * h_dot * d_dot * frame.cot_theta() - d_dot * d_dot;
    sgn(i.dot(&frame.t0)) * radicand.max(0.0).sqrt()
}

/// Closed form of `d''` given the applied control.
pub fn distance_acceleration(
    frame: &SurfaceFrame,
    d: f64,
    h_dot: f64,
    h_ddot: f64,
    lambda: f64,
    u: &Vec3,
    v: f64,
) -> f64 {
    let s = frame.sin_theta();
    let denom = frame.standoff_denominator(d);
    -v * u.dot(&frame.n) - h_ddot * frame.cot_theta() + lambda * lambda * frame.ii_00 / denom
        - 2.0 * h_dot * lambda / s * frame.ii_0p / denom
        + h_dot * h_dot / (s * s * s) * (frame.ii_pp - d * frame.ii_0p * frame.ii_0p / denom)
}

/// Residuals of the second-order motion identities at one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionResiduals {
    /// `|h'' - v <u, e_z>|`, with `h''` from a central difference of the exact `h'`.
    pub h_ddot: f64,
    /// `|d'' - closed form|`, with `d''` from a central difference of the exact `d'`.
    pub d_ddot: f64,
    /// `|lambda - v <i, T0>|`.
    pub lambda: f64,
    /// `<i,N>`, `<i_h,n>`, `i_perp` cross form, `<i_perp,n>`, `cos(alpha)`, `sin(alpha)`.
    pub heading_relations: [f64; 6],
}

impl MotionResiduals {
    pub fn max(&self) -> f64 {
        self.heading_relations
            .iter()
            .chain([self.h_ddot, self.d_ddot, self.lambda].iter())
            .fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Checks the motion identities at `state` under control `u`. The first-order
/// rates are exact; second-order rates come from a single central difference
/// of them over `+-probe` along the flow.
pub fn motion_identities(
    vehicle: &Unicycle,
    state: &VehicleState,
    u: &Vec3,
    surface: &SurfaceModel,
    probe: f64,
) -> Result<MotionResiduals> {
    let v = vehicle.v;
    let sin_alpha = state.alpha().sin();
    if sin_alpha <= VERTICAL_HEADING_TOL {
        return Err(Error::VerticalHeading { t: state.t, sin_alpha });
    }
    let up = vertical();
    let obs = observables(state, surface, v)?;
    let f = &obs.frame;

    let ahead = observables(&vehicle.advance(state, u, probe), surface, v)?;
    let behind = observables(&vehicle.advance(state, u, -probe), surface, v)?;
    let h_ddot_fd = (ahead.h_dot - behind.h_dot) / (2.0 * probe);
    let d_ddot_fd = (ahead.d_dot - behind.d_dot) / (2.0 * probe);

    let h_ddot = v * u.dot(&up);
    let lambda = slice_speed(f, &state.i, obs.h_dot, obs.d_dot, v);
    let d_ddot = distance_acceleration(f, obs.d, obs.h_dot, h_ddot, lambda, u, v);

    let cos_alpha = state.i.dot(&up);
    let i_h = (up - state.i * cos_alpha) / sin_alpha;
    let i_perp = i_h.cross(&state.i);
    let cot_alpha = cos_alpha / sin_alpha;

    let heading_relations = [
        state.i.dot(&f.normal) + obs.d_dot * f.sin_theta() / v,
        i_h.dot(&f.n) - cot_alpha / v * (obs.d_dot + f.cot_theta() * obs.h_dot),
        (i_perp - up.cross(&state.i) / sin_alpha).norm(),
        i_perp.dot(&f.n) - lambda / (v * sin_alpha),
        cos_alpha - obs.h_dot / v,
        sin_alpha - (v * v - obs.h_dot * obs.h_dot).max(0.0).sqrt() / v,
    ];

    Ok(MotionResiduals {
        h_ddot: (h_ddot_fd - h_ddot).abs(),
        d_ddot: (d_ddot_fd - d_ddot).abs(),
        lambda: (lambda - v * state.i.dot(&f.t0)).abs(),
        heading_relations,
    })
}

/// One row of the trajectory record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub ix: f64,
    pub iy: f64,
    pub iz: f64,
    pub h: f64,
    pub d: f64,
    pub h_dot: f64,
    pub d_dot: f64,
    pub mode: ModeKind,
    pub ux: f64,
    pub uy: f64,
    pub uz: f64,
}

impl TrajectorySample {
    pub fn new(state: &VehicleState, obs: &Observables, mode: ModeKind, u: &Vec3) -> Self {
        Self {
            t: state.t,
            x: state.r.x,
            y: state.r.y,
            z: state.r.z,
            ix: state.i.x,
            iy: state.i.y,
            iz: state.i.z,
            h: obs.h,
            d: obs.d,
            h_dot: obs.h_dot,
            d_dot: obs.d_dot,
            mode,
            ux: u.x,
            uy: u.y,
            uz: u.z,
        }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn heading(&self) -> Vec3 {
        Vec3::new(self.ix, self.iy, self.iz)
    }

    pub fn control(&self) -> Vec3 {
        Vec3::new(self.ux, self.uy, self.uz)
    }
}

/// Writes the trajectory as CSV with the header
/// `t,x,y,z,ix,iy,iz,h,d,h_dot,d_dot,mode,ux,uy,uz`.
pub fn write_trajectory_csv<W: Write>(writer: W, samples: &[TrajectorySample]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["t", "x", "y", "z", "ix", "iy", "iz", "h", "d", "h_dot", "d_dot", "mode", "ux", "uy", "uz"])?;
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(reader: R) -> Result<Vec<TrajectorySample>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
