//! Three-mode hybrid guidance law.
//!
//! The robot starts in `IN` (hold altitude, converge to the standoff) and after
//! `T_in` alternates between upward (`S+`) and downward (`S-`) scans, switching
//! when the altitude leaves `[h_minus, h_plus]`. In every mode the control is
//!
//! ```text
//! u = -u_h sgn(h' - eta) i_h + sqrt(u_max^2 - u_h^2) sgn(d' + chi(d - d0)) i_perp
//! ```
//!
//! where `(i_h, i_perp)` is the orthonormal basis of the plane normal to the
//! heading built from the vertical. `sgn` is regularized by a saturating
//! boundary layer.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{vertical, Vec3};
use crate::vehicle::VERTICAL_HEADING_TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeKind {
    #[serde(rename = "IN")]
    In,
    #[serde(rename = "S+")]
    SPlus,
    #[serde(rename = "S-")]
    SMinus,
}

impl ModeKind {
    pub fn is_scan(self) -> bool {
        !matches!(self, ModeKind::In)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub kind: ModeKind,
    pub entered_at: f64,
}

impl Mode {
    pub fn initial() -> Self {
        Self { kind: ModeKind::In, entered_at: 0.0 }
    }
}

/// Scan direction chosen when the initial mode ends strictly inside the band.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieBreak {
    #[default]
    #[serde(rename = "S+")]
    SPlus,
    #[serde(rename = "S-")]
    SMinus,
}

/// Controller configuration file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub u_h: f64,
    pub eta_star: f64,
    pub gamma: f64,
    pub delta: f64,
    #[serde(rename = "T_in")]
    pub t_in: f64,
    pub h_minus: f64,
    pub h_plus: f64,
    pub d0: f64,
    /// Defaults to `1e-3 v` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_layer: Option<f64>,
    #[serde(default)]
    pub tiebreak: TieBreak,
}

impl ControllerConfig {
    pub fn into_params(self, v: f64) -> ControllerParams {
        ControllerParams {
            u_h: self.u_h,
            eta_star: self.eta_star,
            gamma: self.gamma,
            delta: self.delta,
            mu: self.gamma * self.delta,
            t_in: self.t_in,
            h_minus: self.h_minus,
            h_plus: self.h_plus,
            d0: self.d0,
            boundary_layer: self.boundary_layer.unwrap_or(1e-3 * v),
            tiebreak: self.tiebreak,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub u_h: f64,
    pub eta_star: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Saturation level of `chi`; equals `gamma * delta`.
    pub mu: f64,
    pub t_in: f64,
    pub h_minus: f64,
    pub h_plus: f64,
    pub d0: f64,
    pub boundary_layer: f64,
    pub tiebreak: TieBreak,
}

impl ControllerParams {
    pub fn config(&self) -> ControllerConfig {
        ControllerConfig {
            u_h: self.u_h,
            eta_star: self.eta_star,
            gamma: self.gamma,
            delta: self.delta,
            t_in: self.t_in,
            h_minus: self.h_minus,
            h_plus: self.h_plus,
            d0: self.d0,
            boundary_layer: Some(self.boundary_layer),
            tiebreak: self.tiebreak,
        }
    }

    /// Lateral actuation `sqrt(u_max^2 - u_h^2)`.
    pub fn lateral_authority(&self, u_max: f64) -> f64 {
        (u_max * u_max - self.u_h * self.u_h).sqrt()
    }

    /// Lower bound `2 pi / sqrt(u_max^2 - u_h^2)` on the initial-mode duration.
    pub fn min_initial_duration(&self, u_max: f64) -> f64 {
        2.0 * PI / self.lateral_authority(u_max)
    }

    pub fn mu_consistent(&self) -> bool {
        (self.mu - self.gamma * self.delta).abs() <= 1e-12 * self.mu.abs().max(1.0)
    }

    pub fn validate(&self, u_max: f64) -> Result<()> {
        if !(self.u_h > 0.0 && self.u_h < u_max) {
            return Err(Error::InvalidConfig(format!("u_h = {} must lie in (0, {u_max})", self.u_h)));
        }
        if !(self.eta_star > 0.0 && self.gamma > 0.0 && self.delta > 0.0 && self.boundary_layer > 0.0) {
            return Err(Error::InvalidConfig("eta_star, gamma, delta and boundary_layer must be positive".into()));
        }
        if !self.mu_consistent() {
            return Err(Error::InvariantViolated(format!(
                "mu = {} differs from gamma * delta = {}",
                self.mu,
                self.gamma * self.delta
            )));
        }
        if !(self.h_minus < self.h_plus) {
            return Err(Error::InvalidConfig("h_minus must be below h_plus".into()));
        }
        let t_min = self.min_initial_duration(u_max);
        if !(self.t_in > t_min) {
            return Err(Error::InvalidConfig(format!("T_in = {} must exceed {t_min}", self.t_in)));
        }
        Ok(())
    }
}

/// Linear function with saturation: `gamma p` for `|p| <= delta`, else `sgn(p) gamma delta`.
pub fn chi(p: f64, gamma: f64, delta: f64) -> f64 {
    if p.abs() <= delta {
        gamma * p
    } else {
        p.signum() * gamma * delta
    }
}

/// Commanded vertical rate in a mode.
pub fn vertical_rate(kind: ModeKind, eta_star: f64) -> f64 {
    match kind {
        ModeKind::In => 0.0,
        ModeKind::SPlus => eta_star,
        ModeKind::SMinus => -eta_star,
    }
}

/// Mode transition at altitude `h` and time `t`.
pub fn mode_update(mode: Mode, h: f64, t: f64, params: &ControllerParams) -> Mode {
    let next = match mode.kind {
        ModeKind::In if t >= params.t_in => {
            if h <= params.h_minus {
                ModeKind::SPlus
            } else if h >= params.h_plus {
                ModeKind::SMinus
            } else {
                match params.tiebreak {
                    TieBreak::SPlus => ModeKind::SPlus,
                    TieBreak::SMinus => ModeKind::SMinus,
                }
            }
        }
        ModeKind::SPlus if h > params.h_plus => ModeKind::SMinus,
        ModeKind::SMinus if h < params.h_minus => ModeKind::SPlus,
        kind => kind,
    };
    if next == mode.kind {
        mode
    } else {
        Mode { kind: next, entered_at: t }
    }
}

/// Orthonormal basis `(i_h, i_perp)` of the plane normal to the heading:
/// `i_h` is the normalized projection of the vertical, `i_perp = i_h x i`.
pub fn basis_i_perp(i: &Vec3) -> Result<(Vec3, Vec3)> {
    let up = vertical();
    let cos_alpha = i.dot(&up);
    let sin_alpha = (1.0 - cos_alpha * cos_alpha).max(0.0).sqrt();
    if sin_alpha <= VERTICAL_HEADING_TOL {
        return Err(Error::VerticalHeading { t: f64::NAN, sin_alpha });
    }
    let i_h = (up - i * cos_alpha) / sin_alpha;
    Ok((i_h, i_h.cross(i)))
}

/// Boundary-layer surrogate of `sgn`: `clamp(x / width, -1, 1)`.
pub fn saturating_sign(x: f64, width: f64) -> f64 {
    (x / width).clamp(-1.0, 1.0)
}

/// Inputs of the control law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurements {
    pub d: f64,
    pub h_dot: f64,
    pub d_dot: f64,
}

impl From<&crate::vehicle::Observables> for Measurements {
    fn from(o: &crate::vehicle::Observables) -> Self {
        Self { d: o.d, h_dot: o.h_dot, d_dot: o.d_dot }
    }
}

/// Sliding variables `(h' - eta, d' + chi(d - d0))`.
pub fn sliding_variables(m: &Measurements, kind: ModeKind, params: &ControllerParams) -> (f64, f64) {
    let eta = vertical_rate(kind, params.eta_star);
    (m.h_dot - eta, m.d_dot + chi(m.d - params.d0, params.gamma, params.delta))
}

/// The guidance law evaluated at heading `i`.
pub fn control(i: &Vec3, m: &Measurements, kind: ModeKind, params: &ControllerParams, u_max: f64) -> Result<Vec3> {
    let (i_h, i_perp) = basis_i_perp(i)?;
    let (s_h, s_d) = sliding_variables(m, kind, params);
    let eps = params.boundary_layer;
    Ok(i_h * (-params.u_h * saturating_sign(s_h, eps))
        + i_perp * (params.lateral_authority(u_max) * saturating_sign(s_d, eps)))
}

/// Three-point backward differences of `h` and `d` over the last three
/// `(t, h, d)` samples; `None` until three samples exist.
pub fn numerical_observables(history: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    let n = history.len();
    if n < 3 {
        return None;
    }
    let (t0, h0, d0) = history[n - 3];
    let (_, h1, d1) = history[n - 2];
    let (t2, h2, d2) = history[n - 1];
    let two_dt = t2 - t0;
    Some(((3.0 * h2 - 4.0 * h1 + h0) / two_dt, (3.0 * d2 - 4.0 * d1 + d0) / two_dt))
}

/// Output of one control period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlOutput {
    pub u: Vec3,
    pub mode: ModeKind,
    /// Rate estimates used, `None` during warm-up.
    pub rates: Option<(f64, f64)>,
}

/// Stateful controller: mode automaton plus a short sample history.
#[derive(Clone, Debug)]
pub struct GuidanceController {
    params: ControllerParams,
    u_max: f64,
    mode: Mode,
    history: VecDeque<(f64, f64, f64)>,
}

impl GuidanceController {
    pub fn new(params: ControllerParams, u_max: f64) -> Result<Self> {
        params.validate(u_max)?;
        Ok(Self { params, u_max, mode: Mode::initial(), history: VecDeque::with_capacity(3) })
    }

    pub fn params(&self) -> &ControllerParams {
        &self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Consumes the sensed altitude and standoff at time `t` and returns the
    /// control to hold until the next sample. Holds `u = 0` until the rate
    /// estimator has three samples.
    pub fn update(&mut self, t: f64, h: f64, d: f64, heading: &Vec3) -> Result<ControlOutput> {
        if self.history.len() == 3 {
            self.history.pop_front();
        }
        self.history.push_back((t, h, d));
        self.mode = mode_update(self.mode, h, t, &self.params);

        let samples: Vec<_> = self.history.iter().copied().collect();
        let Some((h_dot, d_dot)) = numerical_observables(&samples) else {
            return Ok(ControlOutput { u: Vec3::zeros(), mode: self.mode.kind, rates: None });
        };
        let m = Measurements { d, h_dot, d_dot };
        let u = control(heading, &m, self.mode.kind, &self.params, self.u_max).map_err(|e| match e {
            Error::VerticalHeading { sin_alpha, .. } => Error::VerticalHeading { t, sin_alpha },
            other => other,
        })?;
        Ok(ControlOutput { u, mode: self.mode.kind, rates: Some((h_dot, d_dot)) })
    }
}
