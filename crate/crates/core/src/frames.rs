//! Moving frame `(N, T0, T_perp, n)` and second fundamental form on the
//! scanned surface.
//!
//! `N` is the unit normal pointing into the body, `theta` its angle to the
//! vertical, `T0 = N x e_z / sin(theta)` the slice tangent with the body on
//! the left, `T_perp = N x T0` and `n = (N - cos(theta) e_z) / sin(theta)` the
//! horizontal inner normal of the slice.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::geometry::{vertical, SurfaceModel, Vec3};

/// Lower bound on `sin(theta)` below which the normal counts as vertical.
pub const VERTICAL_NORMAL_TOL: f64 = 1e-9;

/// Tolerance on the normal component of a vector declared tangent.
pub const TANGENCY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceFrame {
    pub point: Vec3,
    pub normal: Vec3,
    pub theta: f64,
    pub t0: Vec3,
    pub t_perp: Vec3,
    pub n: Vec3,
    /// `II(T0, T0)`
    pub ii_00: f64,
    /// `II(T0, T_perp)`
    pub ii_0p: f64,
    /// `II(T_perp, T_perp)`
    pub ii_pp: f64,
}

impl SurfaceFrame {
    pub fn sin_theta(&self) -> f64 {
        self.normal.x.hypot(self.normal.y)
    }

    pub fn cos_theta(&self) -> f64 {
        self.normal.z
    }

    pub fn cot_theta(&self) -> f64 {
        self.cos_theta() / self.sin_theta()
    }

    /// `sin(theta) + d II(T0, T0)`, positive throughout a feasible zone.
    pub fn standoff_denominator(&self, d: f64) -> f64 {
        self.sin_theta() + d * self.ii_00
    }

    /// Coordinates of a tangent vector in the `(T0, T_perp)` basis.
    pub fn tangent_coords(&self, v: &Vec3) -> Result<(f64, f64)> {
        let residual = v.dot(&self.normal);
        if residual.abs() > TANGENCY_TOL * v.norm().max(1.0) {
            return Err(Error::NotTangent { residual });
        }
        Ok((v.dot(&self.t0), v.dot(&self.t_perp)))
    }

    /// `II(V, W) = <S(V), W>` for tangent `V`, `W`.
    pub fn second_fundamental_form(&self, v: &Vec3, w: &Vec3) -> Result<f64> {
        let (a0, ap) = self.tangent_coords(v)?;
        let (b0, bp) = self.tangent_coords(w)?;
        Ok(a0 * b0 * self.ii_00 + (a0 * bp + ap * b0) * self.ii_0p + ap * bp * self.ii_pp)
    }

    /// Shape operator `S(V) = -D_V N` as a tangent vector.
    pub fn shape_operator(&self, v: &Vec3) -> Result<Vec3> {
        let (a0, ap) = self.tangent_coords(v)?;
        Ok(self.t0 * (a0 * self.ii_00 + ap * self.ii_0p) + self.t_perp * (a0 * self.ii_0p + ap * self.ii_pp))
    }

    /// Largest deviation from the algebraic frame identities
    /// (orthonormality of `{N, T0, T_perp}` and the projections of `e_z`
    /// and `n` onto the frame).
    pub fn identity_residual(&self) -> f64 {
        let h = vertical();
        let (s, c) = self.theta.sin_cos();
        let residuals = [
            self.normal.norm() - 1.0,
            self.t0.norm() - 1.0,
            self.t_perp.norm() - 1.0,
            self.n.norm() - 1.0,
            self.normal.dot(&h) - c,
            self.normal.dot(&self.t0),
            self.normal.dot(&self.t_perp),
            h.dot(&self.t0),
            h.dot(&self.n),
            h.dot(&self.t_perp) + s,
            self.normal.dot(&self.n) - s,
            self.n.dot(&self.t0),
            self.t_perp.dot(&self.t0),
            self.n.dot(&self.t_perp) - c,
        ];
        residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Frame at the surface point with the altitude and azimuth of `b`.
pub fn frame_at(surface: &SurfaceModel, b: &Vec3) -> Result<SurfaceFrame> {
    let h = b.z;
    let p = surface.profile_eval(h)?;
    let sign = surface.side().sign();
    let phi = b.y.atan2(b.x);
    let (sin_phi, cos_phi) = phi.sin_cos();

    let slope_norm = (1.0 + p.d_rho * p.d_rho).sqrt();
    let beta = p.d_rho.atan();
    let theta = FRAC_PI_2 - sign * beta;
    let sin_theta = 1.0 / slope_norm;
    if sin_theta <= VERTICAL_NORMAL_TOL {
        return Err(Error::VerticalNormal { h, sin_theta });
    }
    let cos_theta = sign * p.d_rho / slope_norm;

    let normal = Vec3::new(cos_phi, sin_phi, -p.d_rho) * (-sign / slope_norm);
    let up = vertical();
    let t0 = normal.cross(&up) / sin_theta;
    let n = (normal - up * cos_theta) / sin_theta;
    let t_perp = normal.cross(&t0);

    Ok(SurfaceFrame {
        point: Vec3::new(p.rho * cos_phi, p.rho * sin_phi, h),
        normal,
        theta,
        t0,
        t_perp,
        n,
        ii_00: sign / (p.rho * slope_norm),
        ii_0p: 0.0,
        ii_pp: -sign * p.dd_rho / slope_norm.powi(3),
    })
}

/// Derivatives of `theta`, `n`, `T0` and `T_perp` along a tangent direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameDerivatives {
    pub theta: f64,
    pub n: Vec3,
    pub t0: Vec3,
    pub t_perp: Vec3,
}

/// Closed-form derivatives of the frame fields along `v`, expressed through
/// the second fundamental form.
pub fn directional_derivatives(surface: &SurfaceModel, b: &Vec3, v: &Vec3) -> Result<FrameDerivatives> {
    let f = frame_at(surface, b)?;
    let ii_v0 = f.second_fundamental_form(v, &f.t0)?;
    let ii_vp = f.second_fundamental_form(v, &f.t_perp)?;
    let s = f.sin_theta();
    Ok(FrameDerivatives {
        theta: -ii_vp,
        n: f.t0 * (-ii_v0 / s),
        t0: f.n * (ii_v0 / s),
        t_perp: f.normal * ii_vp - f.t0 * (f.cot_theta() * ii_v0),
    })
}
