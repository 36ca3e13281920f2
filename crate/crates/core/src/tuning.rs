//! Controller parameter selection.
//!
//! Two tuners are provided. [`tune_generic`] evaluates the tuning inequality
//! system on a dense `(h, d)` grid of the operational zone of a known surface.
//! [`tune_revolution`] only needs bound estimates on the generatrix and uses
//! the closed-form conditions for outer and inner scans of a surface of
//! revolution. Both emit a [`TuningCertificate`] recording every slack, which
//! [`validate_params`] and [`validate_certificate`] can re-audit.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerParams, TieBreak};
use crate::error::{Error, Result};
use crate::frames::frame_at;
use crate::geometry::{AltitudeBand, OperationalZone, Side, SurfaceModel, Vec3};
use crate::vehicle::VehicleState;

/// Grid resolution per axis for zone suprema.
pub const GRID_SIZE: usize = 201;
/// Inflation applied to grid suprema in place of interval bounds.
pub const GRID_INFLATION: f64 = 1.01;
/// Fraction of `u_max / v` withheld when choosing `(k, Delta)`.
pub const STRICTNESS: f64 = 0.05;
pub const K_CAP: f64 = 10.0;
pub const MAX_HALVINGS: usize = 60;
/// Each free bound is used at this fraction of its limit.
pub const SAFETY_FRACTION: f64 = 0.9;
pub const DEFAULT_KAPPA: f64 = 0.5;

/// Estimates of the generatrix over the scanned band and of the start radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceBounds {
    /// Bound on the absolute tangent angle of the generatrix.
    pub beta_bar: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    /// Bound on the absolute curvature of the generatrix.
    pub c_plus: f64,
    pub rho_in_minus: f64,
    pub rho_in_plus: f64,
}

impl SurfaceBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..PI / 2.0).contains(&self.beta_bar)
            && self.rho_minus > 0.0
            && self.rho_minus <= self.rho_plus
            && self.c_plus >= 0.0
            && self.rho_in_minus > 0.0
            && self.rho_in_minus < self.rho_in_plus;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("inconsistent surface bounds {self:?}")))
        }
    }

    /// Exact bounds of a surface over its extended band, sampled at `samples + 1` altitudes.
    pub fn of_surface(surface: &SurfaceModel, rho_in_minus: f64, rho_in_plus: f64, samples: usize) -> Result<Self> {
        let (lo, hi) = surface.band().extended();
        let mut b =
            Self { beta_bar: 0.0, rho_minus: f64::INFINITY, rho_plus: 0.0, c_plus: 0.0, rho_in_minus, rho_in_plus };
        for j in 0..=samples {
            let p = surface.profile_eval(lo + (hi - lo) * j as f64 / samples as f64)?;
            b.beta_bar = b.beta_bar.max(p.tangent_angle().abs());
            b.rho_minus = b.rho_minus.min(p.rho);
            b.rho_plus = b.rho_plus.max(p.rho);
            b.c_plus = b.c_plus.max(p.curvature().abs());
        }
        b.validate()?;
        Ok(b)
    }
}

/// Free choices shared by the tuners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningOptions {
    /// User cap on the scan vertical speed; defaults to `sqrt(kappa) v`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_cap: Option<f64>,
    /// Defaults to `1e-3 v`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_layer: Option<f64>,
    #[serde(default)]
    pub tiebreak: TieBreak,
}

impl Default for TuningOptions {
    fn default() -> Self {
        Self { eta_cap: None, boundary_layer: None, tiebreak: TieBreak::SPlus }
    }
}

/// One audited inequality: `slack = rhs - lhs`, minimized over the zone grid
/// where applicable, with the location of the minimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub name: String,
    #[serde(with = "slack_serde")]
    pub slack: f64,
    pub strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
}

impl Margin {
    fn scalar(name: &str, slack: f64, strict: bool) -> Self {
        Self { name: name.into(), slack, strict, h: None, d: None }
    }

    fn located(name: &str, (slack, h, d): (f64, f64, f64), strict: bool) -> Self {
        Self { name: name.into(), slack, strict, h: Some(h), d: Some(d) }
    }

    pub fn holds(&self) -> bool {
        if self.strict {
            self.slack > 0.0
        } else {
            self.slack >= 0.0
        }
    }
}

/// Infinite slacks (vacuous constraints) are written as `null`.
mod slack_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MarginReport {
    pub entries: Vec<Margin>,
}

impl MarginReport {
    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(Margin::holds)
    }

    pub fn get(&self, name: &str) -> Option<&Margin> {
        self.entries.iter().find(|m| m.name == name)
    }

    pub fn failures(&self) -> Vec<&Margin> {
        self.entries.iter().filter(|m| !m.holds()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningMethod {
    Generic,
    RevolutionOuter,
    RevolutionInner,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningCertificate {
    pub method: TuningMethod,
    pub v: f64,
    pub u_max: f64,
    pub kappa: f64,
    pub k: f64,
    #[serde(rename = "Delta")]
    pub big_delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_dagger: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_rho: Option<f64>,
    /// Bound on `u_h` from the initial disks; `None` when unconstrained.
    pub u_h0: Option<f64>,
    pub zone: OperationalZone,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<SurfaceBounds>,
    pub params: ControllerParams,
    pub margins: MarginReport,
}

impl TuningCertificate {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Curvature data of the surface at one `(h, d)` node of the zone grid.
#[derive(Clone, Copy, Debug)]
struct ZonePoint {
    h: f64,
    d: f64,
    sin_theta: f64,
    cot_theta: f64,
    ii_00: f64,
    ii_0p: f64,
    ii_pp: f64,
    denom: f64,
}

impl ZonePoint {
    /// `|II(T0,T0)| / (sin theta + d II(T0,T0))`, infinite past the focal distance.
    fn slice_curvature(&self) -> f64 {
        if self.denom <= 0.0 {
            f64::INFINITY
        } else {
            self.ii_00.abs() / self.denom
        }
    }

    fn abs_tan_theta(&self) -> f64 {
        if self.cot_theta == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.cot_theta.abs()
        }
    }

    /// Terms of the distance-acceleration bound not involving `gamma`.
    fn decay_terms(&self, eta: f64, v: f64, k: f64) -> f64 {
        let (twist, coupling) = if self.ii_0p == 0.0 {
            (0.0, 0.0)
        } else {
            (self.d * self.ii_0p * self.ii_0p / self.denom, self.ii_0p.abs() / self.denom)
        };
        eta * eta / self.sin_theta.powi(3) * (self.ii_pp - twist).abs()
            + 2.0 * v * k.sqrt() / self.sin_theta * coupling * eta
    }

    fn ellipse(&self, eta: f64, mu: f64) -> f64 {
        eta * eta / (self.sin_theta * self.sin_theta) + 2.0 * eta * mu * self.cot_theta.abs() + mu * mu
    }
}

fn zone_grid(surface: &SurfaceModel, zone: &OperationalZone, n: usize) -> Result<Vec<ZonePoint>> {
    let (lo, hi) = zone.band.extended();
    let mut grid = Vec::with_capacity(n * n);
    for a in 0..n {
        let h = lo + (hi - lo) * a as f64 / (n - 1) as f64;
        let f = frame_at(surface, &surface.point_at(h, 0.0)?)?;
        for b in 0..n {
            let d = zone.d_minus + (zone.d_plus - zone.d_minus) * b as f64 / (n - 1) as f64;
            grid.push(ZonePoint {
                h,
                d,
                sin_theta: f.sin_theta(),
                cot_theta: f.cot_theta(),
                ii_00: f.ii_00,
                ii_0p: f.ii_0p,
                ii_pp: f.ii_pp,
                denom: f.standoff_denominator(d),
            });
        }
    }
    Ok(grid)
}

/// Minimum of `f` over the grid with its location.
fn grid_min(grid: &[ZonePoint], f: impl Fn(&ZonePoint) -> f64) -> (f64, f64, f64) {
    grid.iter().fold((f64::INFINITY, f64::NAN, f64::NAN), |best, p| {
        let x = f(p);
        if x < best.0 || best.1.is_nan() {
            (x, p.h, p.d)
        } else {
            best
        }
    })
}

/// `(k, Delta)` pair with its supporting data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KDelta {
    pub k: f64,
    pub big_delta: f64,
    /// Inflated supremum of the slice curvature seen from the zone.
    pub sup_curvature: f64,
    /// Location of the supremum.
    pub h: f64,
    pub d: f64,
}

/// Maximizes `(k - 1) Delta` subject to `k m + 2 Delta <= a (1 - STRICTNESS)`, `k <= K_CAP`.
fn merit_k_delta(a: f64, m: f64) -> Option<(f64, f64)> {
    let budget = a * (1.0 - STRICTNESS);
    if !(budget > m) {
        return None;
    }
    let k = if m > 0.0 { ((budget + m) / (2.0 * m)).min(K_CAP) } else { K_CAP };
    Some((k, (budget - k * m) / 2.0))
}

/// Chooses `k > 1` and `Delta > 0` with `u_max / v > k F + 2 Delta` over the zone,
/// where `F = |II(T0,T0)| / (sin theta + d II(T0,T0))`.
pub fn find_k_delta(surface: &SurfaceModel, zone: &OperationalZone, v: f64, u_max: f64) -> Result<KDelta> {
    let grid = zone_grid(surface, zone, GRID_SIZE)?;
    k_delta_on_grid(&grid, v, u_max)
}

fn k_delta_on_grid(grid: &[ZonePoint], v: f64, u_max: f64) -> Result<KDelta> {
    let radius = v / u_max;
    // Turning-radius slack 1/F - R in length units; its minimum is the worst point.
    let (reach, h, d) = grid_min(grid, |p| 1.0 / p.slice_curvature() - radius);
    if !(reach > 0.0) {
        return Err(Error::Infeasible { h, d, margin: reach });
    }
    let sup = 1.0 / (reach + radius);
    let m = GRID_INFLATION * sup;
    let (k, big_delta) = merit_k_delta(u_max / v, m).ok_or_else(|| Error::TuningFailure {
        constraint: format!(
            "turning_margin (turning radius margin {reach} at h = {h}, d = {d} is below the safety factor)"
        ),
    })?;
    Ok(KDelta { k, big_delta, sup_curvature: m, h, d })
}

/// `v sqrt(1 - [1 - Delta_h u_h / v]_+^2)`: the scan speed that still lets the
/// robot reverse within the transition margin.
fn reversal_speed(v: f64, u_h: f64, delta_h: f64) -> f64 {
    let q = (1.0 - delta_h * u_h / v).max(0.0);
    v * (1.0 - q * q).sqrt()
}

/// `v sqrt(1 - kappa) Delta / (sqrt(k) [kappa / (2 sqrt(1 - kappa)) + |cot theta|])`.
fn tilt_authority_bound(v: f64, kappa: f64, k: f64, big_delta: f64, abs_cot: f64) -> f64 {
    v * (1.0 - kappa).sqrt() * big_delta / (k.sqrt() * (kappa / (2.0 * (1.0 - kappa).sqrt()) + abs_cot))
}

fn decay_budget(v: f64, kappa: f64, k: f64, big_delta: f64) -> f64 {
    v * v * (1.0 - kappa).sqrt() * big_delta / k.sqrt()
}

fn initial_duration_bound(u_max: f64, u_h: f64) -> f64 {
    2.0 * PI / (u_max * u_max - u_h * u_h).sqrt()
}

/// Halves `(eta, mu)` from `start` until `failing` reports no violated
/// constraint; returns the accepted pair.
fn shrink_ray(start: (f64, f64), failing: impl Fn(f64, f64) -> Option<&'static str>) -> Result<(f64, f64)> {
    let (mut eta, mut mu) = start;
    let mut last = "ray";
    for _ in 0..=MAX_HALVINGS {
        match failing(eta, mu) {
            None => return Ok((eta, mu)),
            Some(name) => last = name,
        }
        eta *= 0.5;
        mu *= 0.5;
    }
    Err(Error::TuningFailure { constraint: last.into() })
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("kappa = {kappa} must lie in (0, 1)")))
    }
}

/// Verdict of the initial-disk check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskVerdict {
    /// Both disks lie strictly inside the zone.
    pub inside: bool,
    /// Largest excursion beyond the zone over the disk boundaries; negative when inside.
    pub worst_violation: f64,
    /// The heading is not horizontal, so the check does not apply.
    pub preliminary_maneuver_needed: bool,
}

/// Checks that the two horizontal disks of radius `v / sqrt(u_max^2 - u_h^2)`
/// tangent to the heading at the robot position lie inside the zone.
pub fn check_initial_disks(
    state: &VehicleState,
    surface: &SurfaceModel,
    zone: &OperationalZone,
    v: f64,
    u_max: f64,
    u_h: f64,
) -> DiskVerdict {
    const SAMPLES: usize = 1000;
    if state.i.z.abs() > 1e-9 {
        return DiskVerdict { inside: false, worst_violation: f64::INFINITY, preliminary_maneuver_needed: true };
    }
    let radius = v / (u_max * u_max - u_h * u_h).sqrt();
    let h = state.r.z;
    let (lo, hi) = zone.band.extended();
    let altitude_violation = (lo - h).max(h - hi);
    if !surface.band().in_extended(h) || !radius.is_finite() {
        return DiskVerdict {
            inside: false,
            worst_violation: altitude_violation.max(0.0),
            preliminary_maneuver_needed: false,
        };
    }
    let left = Vec3::new(-state.i.y, state.i.x, 0.0).normalize();
    let mut worst = altitude_violation;
    for centre in [state.r + left * radius, state.r - left * radius] {
        for j in 0..SAMPLES {
            let a = 2.0 * PI * j as f64 / SAMPLES as f64;
            let p = centre + Vec3::new(a.cos(), a.sin(), 0.0) * radius;
            let d = surface.signed_offset(&p).unwrap_or(f64::NEG_INFINITY);
            worst = worst.max(zone.d_minus - d).max(d - zone.d_plus);
        }
    }
    DiskVerdict { inside: worst < 0.0, worst_violation: worst, preliminary_maneuver_needed: false }
}

/// Largest `u_h` for which the initial disks stay inside the zone.
fn initial_disk_bound(
    state: &VehicleState,
    surface: &SurfaceModel,
    zone: &OperationalZone,
    v: f64,
    u_max: f64,
) -> Result<f64> {
    let at_zero = check_initial_disks(state, surface, zone, v, u_max, 0.0);
    if at_zero.preliminary_maneuver_needed {
        return Err(Error::InvalidConfig("initial heading is not horizontal; a preliminary maneuver is needed".into()));
    }
    if !at_zero.inside {
        return Err(Error::InitialDisks { violation: at_zero.worst_violation });
    }
    let (mut lo, mut hi) = (0.0, u_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if check_initial_disks(state, surface, zone, v, u_max, mid).inside {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Tunes every controller parameter from the surface itself.
///
/// With an initial state the horizontal-turn gain is also limited so that the
/// initial disks stay in the zone; without one that limit is not applied.
pub fn tune_generic(
    surface: &SurfaceModel,
    zone: &OperationalZone,
    v: f64,
    u_max: f64,
    kappa: f64,
    options: &TuningOptions,
    initial: Option<&VehicleState>,
) -> Result<TuningCertificate> {
    check_kappa(kappa)?;
    zone.validate()?;
    let grid = zone_grid(surface, zone, GRID_SIZE)?;
    let KDelta { k, big_delta, .. } = k_delta_on_grid(&grid, v, u_max)?;

    let u_h0 = initial.map(|s| initial_disk_bound(s, surface, zone, v, u_max)).transpose()?;
    let (tilt_bound, ..) = grid_min(&grid, |p| tilt_authority_bound(v, kappa, k, big_delta, p.cot_theta.abs()));
    let u_h = SAFETY_FRACTION * (u_max * (1.0 - 1.0 / k).sqrt()).min(tilt_bound).min(u_h0.unwrap_or(f64::INFINITY));

    let budget = decay_budget(v, kappa, k, big_delta);
    let rate_cap = reversal_speed(v, u_h, zone.band.delta_h);
    let start = (options.eta_cap.unwrap_or(kappa.sqrt() * v), kappa.sqrt() * v);
    let (eta, mu) = shrink_ray(start, |eta, mu| {
        if grid.iter().any(|p| !(p.ellipse(eta, mu) < kappa * v * v)) {
            Some("speed_ellipse")
        } else if grid.iter().any(|p| !(2.0 * eta * mu <= (k - 1.0) * v * v * p.abs_tan_theta())) {
            Some("cross_coupling")
        } else if !(eta < rate_cap) {
            Some("reversal_rate")
        } else if grid.iter().any(|p| !(p.decay_terms(eta, v, k) < budget)) {
            Some("standoff_decay")
        } else {
            None
        }
    })?;
    let (residual, ..) = grid_min(&grid, |p| budget - p.decay_terms(eta, v, k));
    let gamma = 0.5 * residual / mu;

    let params = assemble_params(u_h, eta, mu, gamma, u_max, v, zone, options);
    let mut margins = margins_on_grid(&params, &grid, zone, v, u_max, kappa, k, big_delta);
    push_initial_margin(&mut margins, u_h0, u_h);
    Ok(TuningCertificate {
        method: TuningMethod::Generic,
        v,
        u_max,
        kappa,
        k,
        big_delta,
        d_star: None,
        d_dagger: None,
        delta_rho: None,
        u_h0,
        zone: *zone,
        bounds: None,
        params,
        margins,
    })
}

#[allow(clippy::too_many_arguments)]
fn assemble_params(
    u_h: f64,
    eta_star: f64,
    mu: f64,
    gamma: f64,
    u_max: f64,
    v: f64,
    zone: &OperationalZone,
    options: &TuningOptions,
) -> ControllerParams {
    ControllerParams {
        u_h,
        eta_star,
        gamma,
        delta: mu / gamma,
        mu,
        t_in: 1.1 * initial_duration_bound(u_max, u_h),
        h_minus: zone.band.h_minus,
        h_plus: zone.band.h_plus,
        d0: zone.d0,
        boundary_layer: options.boundary_layer.unwrap_or(1e-3 * v),
        tiebreak: options.tiebreak,
    }
}

fn push_initial_margin(margins: &mut MarginReport, u_h0: Option<f64>, u_h: f64) {
    if let Some(bound) = u_h0 {
        margins.entries.push(Margin::scalar("initial_disks", bound - u_h, false));
    }
}

/// Re-evaluates every tuning inequality for `params` over the zone grid and
/// reports the minimum slack of each.
#[allow(clippy::too_many_arguments)]
pub fn validate_params(
    params: &ControllerParams,
    surface: &SurfaceModel,
    zone: &OperationalZone,
    v: f64,
    u_max: f64,
    kappa: f64,
    k: f64,
    big_delta: f64,
) -> Result<MarginReport> {
    if !params.mu_consistent() {
        return Err(Error::InvariantViolated(format!(
            "mu = {} differs from gamma * delta = {}",
            params.mu,
            params.gamma * params.delta
        )));
    }
    if !(params.u_h >= 0.0 && params.u_h < u_max) {
        return Err(Error::InvalidConfig(format!("u_h = {} must lie in [0, {u_max})", params.u_h)));
    }
    check_kappa(kappa)?;
    let grid = zone_grid(surface, zone, GRID_SIZE)?;
    Ok(margins_on_grid(params, &grid, zone, v, u_max, kappa, k, big_delta))
}

#[allow(clippy::too_many_arguments)]
fn margins_on_grid(
    params: &ControllerParams,
    grid: &[ZonePoint],
    zone: &OperationalZone,
    v: f64,
    u_max: f64,
    kappa: f64,
    k: f64,
    big_delta: f64,
) -> MarginReport {
    let (eta, mu, gamma, u_h) = (params.eta_star, params.mu, params.gamma, params.u_h);
    let budget = decay_budget(v, kappa, k, big_delta);
    let entries = vec![
        Margin::located(
            "turning_margin",
            grid_min(grid, |p| u_max / v - k * p.slice_curvature() - 2.0 * big_delta),
            true,
        ),
        Margin::scalar("vertical_authority", u_max * (1.0 - 1.0 / k).sqrt() - u_h, false),
        Margin::located(
            "vertical_authority_tilt",
            grid_min(grid, |p| tilt_authority_bound(v, kappa, k, big_delta, p.cot_theta.abs()) - u_h),
            false,
        ),
        Margin::located("speed_ellipse", grid_min(grid, |p| kappa * v * v - p.ellipse(eta, mu)), true),
        Margin::located(
            "cross_coupling",
            grid_min(grid, |p| (k - 1.0) * v * v * p.abs_tan_theta() - 2.0 * eta * mu),
            false,
        ),
        Margin::located("standoff_decay", grid_min(grid, |p| budget - p.decay_terms(eta, v, k) - gamma * mu), false),
        Margin::scalar("reversal_rate", reversal_speed(v, u_h, zone.band.delta_h) - eta, true),
        Margin::scalar("initial_duration", params.t_in - initial_duration_bound(u_max, u_h), true),
        Margin::scalar("k_gt_one", k - 1.0, true),
        Margin::scalar("delta_positive", big_delta, true),
    ];
    MarginReport { entries }
}

/// Audits a certificate against a surface: the grid inequalities plus the
/// initial-disk bound recorded in the certificate.
pub fn validate_certificate(cert: &TuningCertificate, surface: &SurfaceModel) -> Result<MarginReport> {
    let mut report =
        validate_params(&cert.params, surface, &cert.zone, cert.v, cert.u_max, cert.kappa, cert.k, cert.big_delta)?;
    push_initial_margin(&mut report, cert.u_h0, cert.params.u_h);
    Ok(report)
}

/// Input of the closed-form tuners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevolutionProblem {
    pub sigma: Side,
    #[serde(flatten)]
    pub bounds: SurfaceBounds,
    #[serde(flatten)]
    pub band: AltitudeBand,
    pub v: f64,
    pub u_max: f64,
    pub d0: f64,
    pub d_safe: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(flatten)]
    pub options: TuningOptions,
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

impl RevolutionProblem {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn turning_radius(&self) -> f64 {
        self.v / self.u_max
    }
}

fn require(name: &str, lhs: f64, rhs: f64) -> Result<()> {
    if lhs > rhs {
        Ok(())
    } else {
        Err(Error::Precondition { name: name.into(), lhs, rhs })
    }
}

/// Standoff and start-clearance quantities fixed by the scan geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RevolutionGeometry {
    /// `d*` for outer scans, `d†` for inner scans.
    pub d_edge: f64,
    pub delta_rho: f64,
    pub u_h0: f64,
    /// Radius seen from the zone edge in the turning-radius condition.
    pub reach: f64,
    pub zone: OperationalZone,
}

/// Checks the start preconditions and computes the zone edge, clearance and
/// initial-disk bound for an outer or inner scan.
pub fn revolution_geometry(problem: &RevolutionProblem) -> Result<RevolutionGeometry> {
    let p = problem;
    p.bounds.validate()?;
    p.band.validate()?;
    let b = &p.bounds;
    let r = p.turning_radius();
    let (d_edge, delta_rho, reach, d_minus, d_plus) = match p.sigma {
        Side::Outer => {
            require("far_start", b.rho_in_minus, b.rho_plus + p.d_safe + 2.0 * r)?;
            require("start_band_width", b.rho_in_minus, 3.0 * r + b.rho_plus - b.rho_minus)?;
            require("reachable_standoff", b.rho_minus + p.d0, r)?;
            let d_star = 0.5 * (p.d_safe.max(r - b.rho_minus) + p.d0.min(b.rho_in_minus - b.rho_plus - 2.0 * r));
            let delta_rho = b.rho_in_minus - b.rho_plus - 2.0 * r - d_star;
            (d_star, delta_rho, b.rho_minus + d_star, d_star, b.rho_in_plus - b.rho_minus + 2.0 * r)
        }
        Side::Inner => {
            require("far_start", b.rho_minus, b.rho_in_plus + p.d_safe + 2.0 * r)?;
            require("start_band_width", b.rho_in_minus, 3.0 * r + b.rho_plus - b.rho_minus)?;
            require("reachable_standoff", b.rho_minus, p.d0 + r)?;
            let d_dagger = 0.5 * (p.d0.max(b.rho_plus - b.rho_in_minus + 2.0 * r) + b.rho_minus - r);
            let delta_rho = (d_dagger + b.rho_in_minus - b.rho_plus - 2.0 * r)
                .min(b.rho_minus - b.rho_in_plus - p.d_safe - 2.0 * r);
            (d_dagger, delta_rho, b.rho_minus - d_dagger, p.d_safe, d_dagger)
        }
    };
    let growth = 1.0 + delta_rho / (2.0 * r);
    let u_h0 = p.u_max * (1.0 - 1.0 / (growth * growth)).sqrt();
    let zone = OperationalZone::new(p.d_safe, d_minus, p.d0, d_plus, p.band)?;
    Ok(RevolutionGeometry { d_edge, delta_rho, u_h0, reach, zone })
}

/// Closed-form tuning for a surface of revolution from bound estimates.
pub fn tune_revolution(problem: &RevolutionProblem) -> Result<TuningCertificate> {
    let p = problem;
    check_kappa(p.kappa)?;
    let geo = revolution_geometry(p)?;
    let b = &p.bounds;
    let (v, u_max, kappa) = (p.v, p.u_max, p.kappa);
    let form = match p.sigma {
        Side::Outer => "turning_margin",
        Side::Inner => "turning_margin",
    };
    let (k, big_delta) =
        merit_k_delta(u_max / v, 1.0 / geo.reach).ok_or_else(|| Error::TuningFailure { constraint: form.into() })?;

    let (cos_b, tan_b) = (b.beta_bar.cos(), b.beta_bar.tan());
    let cot_b = if b.beta_bar == 0.0 { f64::INFINITY } else { 1.0 / tan_b };
    let tilt_bound = tilt_authority_bound(v, kappa, k, big_delta, tan_b);
    let u_h = SAFETY_FRACTION * (u_max * (1.0 - 1.0 / k).sqrt()).min(geo.u_h0).min(tilt_bound);

    let budget = decay_budget(v, kappa, k, big_delta);
    let bend = |eta: f64| eta * eta * b.c_plus / cos_b.powi(3);
    let ellipse = |eta: f64, mu: f64| eta * eta / (cos_b * cos_b) + 2.0 * eta * mu * tan_b + mu * mu;
    let rate_cap = reversal_speed(v, u_h, p.band.delta_h);
    let start = (p.options.eta_cap.unwrap_or(kappa.sqrt() * v), kappa.sqrt() * v);
    let (eta, mu) = shrink_ray(start, |eta, mu| {
        if !(ellipse(eta, mu) < kappa * v * v) {
            Some("speed_ellipse")
        } else if !(2.0 * eta * mu <= (k - 1.0) * v * v * cot_b) {
            Some("cross_coupling")
        } else if !(eta < rate_cap) {
            Some("reversal_rate")
        } else if !(bend(eta) < budget) {
            Some("standoff_decay")
        } else {
            None
        }
    })?;
    let gamma_max = (budget - bend(eta)) / mu;
    let gamma = 0.5 * gamma_max;
    let params = assemble_params(u_h, eta, mu, gamma, u_max, v, &geo.zone, &p.options);

    let entries = vec![
        Margin::scalar(form, u_max / v - k / geo.reach - 2.0 * big_delta, true),
        Margin::scalar("k_gt_one", k - 1.0, true),
        Margin::scalar("delta_positive", big_delta, true),
        Margin::scalar("initial_disks", geo.u_h0 - u_h, false),
        Margin::scalar("vertical_authority", u_max * (1.0 - 1.0 / k).sqrt() - u_h, false),
        Margin::scalar("vertical_authority_tilt", tilt_bound - u_h, false),
        Margin::scalar("speed_ellipse", kappa * v * v - ellipse(eta, mu), true),
        Margin::scalar("cross_coupling", (k - 1.0) * v * v * cot_b - 2.0 * eta * mu, false),
        Margin::scalar("reversal_rate", rate_cap - eta, true),
        Margin::scalar("standoff_decay", budget - bend(eta), true),
        Margin::scalar("gamma_budget", gamma_max - gamma, false),
        Margin::scalar("initial_duration", params.t_in - initial_duration_bound(u_max, u_h), true),
    ];
    let (d_star, d_dagger, method) = match p.sigma {
        Side::Outer => (Some(geo.d_edge), None, TuningMethod::RevolutionOuter),
        Side::Inner => (None, Some(geo.d_edge), TuningMethod::RevolutionInner),
    };
    Ok(TuningCertificate {
        method,
        v,
        u_max,
        kappa,
        k,
        big_delta,
        d_star,
        d_dagger,
        delta_rho: Some(geo.delta_rho),
        u_h0: Some(geo.u_h0),
        zone: geo.zone,
        bounds: Some(*b),
        params,
        margins: MarginReport { entries },
    })
}

/// Outer-scan tuner; `problem.sigma` is overridden.
pub fn tune_revolution_outer(problem: &RevolutionProblem) -> Result<TuningCertificate> {
    tune_revolution(&RevolutionProblem { sigma: Side::Outer, ..*problem })
}

/// Inner-scan tuner; `problem.sigma` is overridden.
pub fn tune_revolution_inner(problem: &RevolutionProblem) -> Result<TuningCertificate> {
    tune_revolution(&RevolutionProblem { sigma: Side::Inner, ..*problem })
}
