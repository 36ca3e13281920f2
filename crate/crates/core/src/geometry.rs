//! Surfaces of revolution about the vertical axis `x = y = 0`.
//!
//! A surface is the graph of a radius profile `rho(h)` swept around the axis,
//! together with the side from which it is scanned. The robot senses only its
//! altitude `h = <r, e_z>` and the horizontal distance to the slice of the
//! surface at that altitude; everything here is built around those two
//! observations.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames;

pub type Vec3 = Vector3<f64>;

/// Unit vertical direction.
pub fn vertical() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

/// Altitude of a point. The additive constant of the altitude sensor is zero.
pub fn altitude(r: &Vec3) -> f64 {
    r.z
}

/// Distance from a point to the vertical axis.
pub fn axis_distance(r: &Vec3) -> f64 {
    r.x.hypot(r.y)
}

/// Which side of the surface hosts the free space the robot moves in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Side {
    /// Robot outside the body (`sigma = 0`).
    Outer,
    /// Robot inside a cavity (`sigma = 1`).
    Inner,
}

impl Side {
    /// `(-1)^sigma`.
    pub fn sign(self) -> f64 {
        match self {
            Side::Outer => 1.0,
            Side::Inner => -1.0,
        }
    }

    pub fn sigma(self) -> u8 {
        match self {
            Side::Outer => 0,
            Side::Inner => 1,
        }
    }
}

impl TryFrom<u8> for Side {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Side::Outer),
            1 => Ok(Side::Inner),
            other => Err(format!("sigma must be 0 or 1, got {other}")),
        }
    }
}

impl From<Side> for u8 {
    fn from(s: Side) -> u8 {
        s.sigma()
    }
}

/// Value and first two derivatives of the radius profile at one altitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfilePoint {
    pub rho: f64,
    pub d_rho: f64,
    pub dd_rho: f64,
}

impl ProfilePoint {
    /// Angle `beta = atan(rho')` from the vertical to the generatrix tangent.
    pub fn tangent_angle(&self) -> f64 {
        self.d_rho.atan()
    }

    /// Signed curvature `rho'' / (1 + rho'^2)^(3/2)` of the generatrix.
    pub fn curvature(&self) -> f64 {
        self.dd_rho / (1.0 + self.d_rho * self.d_rho).powf(1.5)
    }
}

/// Natural cubic spline through tabulated `(h, rho)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidConfig(format!("spline has {} knots but {} values", knots.len(), values.len())));
        }
        if knots.len() < 3 {
            return Err(Error::InvalidConfig("spline needs at least 3 knots".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("spline knots must be strictly increasing".into()));
        }
        if knots.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("spline data must be finite".into()));
        }

        // Tridiagonal system for the interior second derivatives (Thomas algorithm).
        let n = knots.len();
        let mut second = vec![0.0; n];
        let m = n - 2;
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for j in 0..m {
            let i = j + 1;
            let h0 = knots[i] - knots[i - 1];
            let h1 = knots[i + 1] - knots[i];
            diag[j] = 2.0 * (h0 + h1);
            upper[j] = h1;
            rhs[j] = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
        }
        for j in 1..m {
            let lower = knots[j + 1] - knots[j];
            let w = lower / diag[j - 1];
            diag[j] -= w * upper[j - 1];
            rhs[j] -= w * rhs[j - 1];
        }
        for j in (0..m).rev() {
            let next = if j + 1 < m { second[j + 2] } else { 0.0 };
            second[j + 1] = (rhs[j] - upper[j] * next) / diag[j];
        }

        Ok(Self { knots, values, second })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn eval(&self, h: f64) -> ProfilePoint {
        let last = self.knots.len() - 2;
        let seg = match self.knots.partition_point(|&k| k <= h) {
            0 => 0,
            p => (p - 1).min(last),
        };
        let (x0, x1) = (self.knots[seg], self.knots[seg + 1]);
        let (y0, y1) = (self.values[seg], self.values[seg + 1]);
        let (m0, m1) = (self.second[seg], self.second[seg + 1]);
        let step = x1 - x0;
        let a = (x1 - h) / step;
        let b = (h - x0) / step;
        ProfilePoint {
            rho: a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * step * step / 6.0,
            d_rho: (y1 - y0) / step - (3.0 * a * a - 1.0) / 6.0 * step * m0 + (3.0 * b * b - 1.0) / 6.0 * step * m1,
            dd_rho: a * m0 + b * m1,
        }
    }
}

/// Radius profile `h -> rho(h)` of the generatrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Cylinder {
        radius: f64,
    },
    /// `rho = base + amplitude * sin(frequency * h + phase)`.
    Vase {
        base: f64,
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// `rho = base + slope * h`.
    Cone {
        base: f64,
        slope: f64,
    },
    Spline(CubicSpline),
}

impl Profile {
    /// Evaluates the profile without any band check.
    pub fn eval(&self, h: f64) -> ProfilePoint {
        match self {
            Profile::Cylinder { radius } => ProfilePoint { rho: *radius, d_rho: 0.0, dd_rho: 0.0 },
            Profile::Vase { base, amplitude, frequency, phase } => {
                let arg = frequency * h + phase;
                let (s, c) = arg.sin_cos();
                ProfilePoint {
                    rho: base + amplitude * s,
                    d_rho: amplitude * frequency * c,
                    dd_rho: -amplitude * frequency * frequency * s,
                }
            }
            Profile::Cone { base, slope } => ProfilePoint { rho: base + slope * h, d_rho: *slope, dd_rho: 0.0 },
            Profile::Spline(s) => s.eval(h),
        }
    }
}

/// Scan altitude range `[h_minus, h_plus]` and the transition margin `delta_h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AltitudeBand {
    pub h_minus: f64,
    pub h_plus: f64,
    pub delta_h: f64,
}

impl AltitudeBand {
    pub fn new(h_minus: f64, h_plus: f64, delta_h: f64) -> Result<Self> {
        let band = Self { h_minus, h_plus, delta_h };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_minus < self.h_plus) {
            return Err(Error::InvalidConfig(format!(
                "h_minus ({}) must be below h_plus ({})",
                self.h_minus, self.h_plus
            )));
        }
        if !(self.delta_h >= 0.0) {
            return Err(Error::InvalidConfig("delta_h must be non-negative".into()));
        }
        Ok(())
    }

    /// `[h_minus - delta_h, h_plus + delta_h]`.
    pub fn extended(&self) -> (f64, f64) {
        (self.h_minus - self.delta_h, self.h_plus + self.delta_h)
    }

    pub fn in_scan_range(&self, h: f64) -> bool {
        (self.h_minus..=self.h_plus).contains(&h)
    }

    pub fn in_extended(&self, h: f64) -> bool {
        let (lo, hi) = self.extended();
        (lo..=hi).contains(&h)
    }
}

/// A surface of revolution together with its scan side and altitude band.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceModel {
    profile: Profile,
    side: Side,
    band: AltitudeBand,
}

impl SurfaceModel {
    /// Builds a surface, checking that the generatrix stays away from the axis
    /// over the extended band.
    pub fn new(profile: Profile, side: Side, band: AltitudeBand) -> Result<Self> {
        band.validate()?;
        let (lo, hi) = band.extended();
        if let Profile::Spline(s) = &profile {
            let (k0, k1) = s.domain();
            if k0 > lo || k1 < hi {
                return Err(Error::InvalidConfig(format!(
                    "spline knots [{k0}, {k1}] do not cover the band [{lo}, {hi}]"
                )));
            }
        }
        const SAMPLES: usize = 2000;
        for j in 0..=SAMPLES {
            let h = lo + (hi - lo) * j as f64 / SAMPLES as f64;
            let p = profile.eval(h);
            if !(p.rho.is_finite() && p.d_rho.is_finite() && p.dd_rho.is_finite()) {
                return Err(Error::InvalidConfig(format!("profile is not finite at h = {h}")));
            }
            if p.rho <= 0.0 {
                return Err(Error::InvalidConfig(format!("profile radius {} is not positive at h = {h}", p.rho)));
            }
        }
        Ok(Self { profile, side, band })
    }

    pub fn cylinder(radius: f64, side: Side, band: AltitudeBand) -> Result<Self> {
        Self::new(Profile::Cylinder { radius }, side, band)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn band(&self) -> &AltitudeBand {
        &self.band
    }

    /// Profile value and derivatives, restricted to the extended band.
    pub fn profile_eval(&self, h: f64) -> Result<ProfilePoint> {
        let (lo, hi) = self.band.extended();
        if !(lo..=hi).contains(&h) {
            return Err(Error::BandViolation { h, lo, hi });
        }
        Ok(self.profile.eval(h))
    }

    /// Surface point at altitude `h` and azimuth `phi`.
    pub fn point_at(&self, h: f64, phi: f64) -> Result<Vec3> {
        let rho = self.profile_eval(h)?.rho;
        Ok(Vec3::new(rho * phi.cos(), rho * phi.sin(), h))
    }

    /// `(-1)^sigma (rho_r - rho(h))`, the offset from the slice circle measured
    /// towards the free space. Positive on the scan side.
    pub fn signed_offset(&self, r: &Vec3) -> Result<f64> {
        let p = self.profile_eval(altitude(r))?;
        Ok(self.side.sign() * (axis_distance(r) - p.rho))
    }

    /// Horizontal distance from `r` to the slice of the surface through `r`.
    pub fn horizontal_distance(&self, r: &Vec3) -> Result<f64> {
        let offset = self.signed_offset(r)?;
        if offset <= 0.0 {
            return Err(Error::SideViolation { offset });
        }
        Ok(offset)
    }

    /// Horizontally nearest surface point: the radial projection of `r` onto
    /// the slice circle at its altitude.
    pub fn nearest_boundary_point(&self, r: &Vec3) -> Result<Vec3> {
        let rho_r = axis_distance(r);
        if self.side == Side::Inner && rho_r <= 1e-12 {
            return Err(Error::NonuniqueProjection { axis_distance: rho_r });
        }
        self.horizontal_distance(r)?;
        let rho = self.profile_eval(altitude(r))?.rho;
        let scale = rho / rho_r;
        Ok(Vec3::new(r.x * scale, r.y * scale, r.z))
    }

    /// Slack of the turning-radius condition at boundary point `b` and
    /// standoff `d`: `sin(theta)/|II(T0,T0)| + d sgn II(T0,T0) - v/u_max`,
    /// infinite where the slice is straight.
    pub fn necessary_condition_margin(&self, b: &Vec3, d: f64, v: f64, u_max: f64) -> Result<f64> {
        let frame = frames::frame_at(self, b)?;
        let ii = frame.ii_00;
        let reach = if ii == 0.0 { f64::INFINITY } else { frame.sin_theta() / ii.abs() + d * ii.signum() };
        Ok(reach - v / u_max)
    }
}

/// Standoff distances and altitudes bounding the operational zone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperationalZone {
    pub d_minus: f64,
    pub d0: f64,
    pub d_plus: f64,
    pub d_safe: f64,
    pub band: AltitudeBand,
}

impl OperationalZone {
    pub fn new(d_safe: f64, d_minus: f64, d0: f64, d_plus: f64, band: AltitudeBand) -> Result<Self> {
        let zone = Self { d_minus, d0, d_plus, d_safe, band };
        zone.validate()?;
        Ok(zone)
    }

    pub fn validate(&self) -> Result<()> {
        self.band.validate()?;
        if !(self.d_safe > 0.0 && self.d_safe <= self.d_minus && self.d_minus < self.d0 && self.d0 < self.d_plus) {
            return Err(Error::InvalidConfig(format!(
                "zone must satisfy 0 < d_safe <= d_minus < d0 < d_plus, got {} / {} / {} / {}",
                self.d_safe, self.d_minus, self.d0, self.d_plus
            )));
        }
        Ok(())
    }

    /// Strict interior test on the `(h, d)` box.
    pub fn contains_strictly(&self, h: f64, d: f64) -> bool {
        let (lo, hi) = self.band.extended();
        h > lo && h < hi && d > self.d_minus && d < self.d_plus
    }
}

/// Profile part of the surface description file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileSpec {
    Cylinder {
        radius: f64,
    },
    Vase {
        base: f64,
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Cone {
        base: f64,
        slope: f64,
    },
    Spline {
        h_knots: Vec<f64>,
        rho_knots: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

/// Surface description file:
/// `{"kind": ..., <profile parameters>, "sigma", "h_minus", "h_plus", "delta_h"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDescription {
    #[serde(flatten)]
    pub profile: ProfileSpec,
    pub sigma: Side,
    pub h_minus: f64,
    pub h_plus: f64,
    pub delta_h: f64,
}

impl SurfaceDescription {
    pub fn build(&self) -> Result<SurfaceModel> {
        let profile = match &self.profile {
            ProfileSpec::Cylinder { radius } => Profile::Cylinder { radius: *radius },
            ProfileSpec::Vase { base, amplitude, frequency, phase } => {
                Profile::Vase { base: *base, amplitude: *amplitude, frequency: *frequency, phase: *phase }
            }
            ProfileSpec::Cone { base, slope } => Profile::Cone { base: *base, slope: *slope },
            ProfileSpec::Spline { h_knots, rho_knots } => {
                Profile::Spline(CubicSpline::new(h_knots.clone(), rho_knots.clone())?)
            }
        };
        SurfaceModel::new(profile, self.sigma, AltitudeBand::new(self.h_minus, self.h_plus, self.delta_h)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl From<&SurfaceModel> for SurfaceDescription {
    fn from(s: &SurfaceModel) -> Self {
        let profile = match s.profile() {
            Profile::Cylinder { radius } => ProfileSpec::Cylinder { radius: *radius },
            Profile::Vase { base, amplitude, frequency, phase } => {
                ProfileSpec::Vase { base: *base, amplitude: *amplitude, frequency: *frequency, phase: *phase }
            }
            Profile::Cone { base, slope } => ProfileSpec::Cone { base: *base, slope: *slope },
            Profile::Spline(sp) => {
                ProfileSpec::Spline { h_knots: sp.knots().to_vec(), rho_knots: sp.values().to_vec() }
            }
        };
        let band = s.band();
        Self { profile, sigma: s.side(), h_minus: band.h_minus, h_plus: band.h_plus, delta_h: band.delta_h }
    }
}
