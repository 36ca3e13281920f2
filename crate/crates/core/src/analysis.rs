//! Post-processing of recorded trajectories: scan legs and their accuracy,
//! coverage of the scanned band, winding counts and safety.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::controller::{chi, vertical_rate, ControllerParams, ModeKind};
use crate::error::{Error, Result};
use crate::geometry::{OperationalZone, SurfaceModel, Vec3};
use crate::vehicle::TrajectorySample;

/// Fraction of the first leg treated as the reaching transient.
pub const FIRST_LEG_TRANSIENT: f64 = 0.1;

/// Altitude and azimuth of a boundary point. On a surface of revolution the
/// flow lines of `-T_perp / sin(theta)` are meridians, so the azimuth is the
/// second coordinate.
pub fn pseudo_cylindrical(surface: &SurfaceModel, b: &Vec3) -> Result<(f64, f64)> {
    surface.profile_eval(b.z)?;
    Ok((b.z, b.y.atan2(b.x).rem_euclid(2.0 * PI)))
}

/// Maximal run of samples in one scan mode with the altitude inside the band.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LegSpan {
    /// First and last sample index, inclusive.
    pub start: usize,
    pub end: usize,
    pub mode: ModeKind,
    /// The run crossed the whole band: it entered through the near edge and
    /// left through the far edge.
    pub complete: bool,
}

pub fn leg_spans(trajectory: &[TrajectorySample], h_minus: f64, h_plus: f64) -> Vec<LegSpan> {
    let in_leg = |s: &TrajectorySample| s.mode.is_scan() && s.h >= h_minus && s.h <= h_plus;
    let mut spans = Vec::new();
    let mut j = 0;
    while j < trajectory.len() {
        if !in_leg(&trajectory[j]) {
            j += 1;
            continue;
        }
        let start = j;
        let mode = trajectory[j].mode;
        while j + 1 < trajectory.len() && in_leg(&trajectory[j + 1]) && trajectory[j + 1].mode == mode {
            j += 1;
        }
        let entered = start.checked_sub(1).is_some_and(|p| match mode {
            ModeKind::SPlus => trajectory[p].h < h_minus,
            ModeKind::SMinus => trajectory[p].h > h_plus,
            ModeKind::In => false,
        });
        let left = trajectory.get(j + 1).is_some_and(|next| match mode {
            ModeKind::SPlus => next.h > h_plus,
            ModeKind::SMinus => next.h < h_minus,
            ModeKind::In => false,
        });
        let complete = entered && left;
        if j > start {
            spans.push(LegSpan { start, end: j, mode, complete });
        }
        j += 1;
    }
    spans
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanLeg {
    pub t_start: f64,
    pub t_end: f64,
    pub mode: ModeKind,
    /// Commanded vertical rate `+eta*` or `-eta*`.
    pub eta_k: f64,
    /// `max(sup |h' - eta_k|, sup |d'|)` over the evaluation window.
    pub eps: f64,
    /// `sup |d - d0|` over the evaluation window.
    pub eps_d: f64,
    pub complete: bool,
    /// Start of the evaluation window; later than `t_start` on the first leg only.
    pub window_start: f64,
}

impl ScanLeg {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Suprema of the scan errors over the given samples.
pub fn epsilons_over(samples: &[TrajectorySample], eta_k: f64, d0: f64) -> (f64, f64) {
    samples.iter().fold((0.0, 0.0), |(eps, eps_d), s| {
        (eps.max((s.h_dot - eta_k).abs()).max(s.d_dot.abs()), eps_d.max((s.d - d0).abs()))
    })
}

/// `(eps, eps_d)` over every sample of the leg.
pub fn leg_epsilons(leg: &ScanLeg, trajectory: &[TrajectorySample], d0: f64) -> (f64, f64) {
    let samples: Vec<_> = trajectory.iter().filter(|s| s.t >= leg.t_start && s.t <= leg.t_end).copied().collect();
    epsilons_over(&samples, leg.eta_k, d0)
}

/// All scan legs of the trajectory, possibly fewer than two.
pub fn segment_scan_legs(trajectory: &[TrajectorySample], params: &ControllerParams) -> Vec<ScanLeg> {
    leg_spans(trajectory, params.h_minus, params.h_plus)
        .iter()
        .enumerate()
        .map(|(k, span)| {
            let samples = &trajectory[span.start..=span.end];
            let (t_start, t_end) = (samples[0].t, samples[samples.len() - 1].t);
            let window_start = if k == 0 { t_start + FIRST_LEG_TRANSIENT * (t_end - t_start) } else { t_start };
            let window: Vec<_> = samples.iter().filter(|s| s.t >= window_start).copied().collect();
            let eta_k = vertical_rate(span.mode, params.eta_star);
            let (eps, eps_d) = epsilons_over(&window, eta_k, params.d0);
            ScanLeg { t_start, t_end, mode: span.mode, eta_k, eps, eps_d, complete: span.complete, window_start }
        })
        .collect()
}

/// Scan legs of the trajectory; at least two are required.
pub fn detect_scan_legs(trajectory: &[TrajectorySample], params: &ControllerParams) -> Result<Vec<ScanLeg>> {
    let legs = segment_scan_legs(trajectory, params);
    if legs.len() < 2 {
        return Err(Error::InsufficientRun { legs: legs.len() });
    }
    Ok(legs)
}

/// Transition interval between consecutive legs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGap {
    pub t_start: f64,
    pub t_end: f64,
}

impl ScanGap {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

pub fn scan_gaps(legs: &[ScanLeg]) -> Vec<ScanGap> {
    legs.windows(2).map(|w| ScanGap { t_start: w[0].t_end, t_end: w[1].t_start }).collect()
}

/// Azimuth of the trajectory, unwrapped across the branch cut.
pub fn unwrapped_azimuth(samples: &[TrajectorySample]) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut prev: Option<(f64, f64)> = None;
    for s in samples {
        let raw = s.y.atan2(s.x);
        let phi = match prev {
            None => raw,
            Some((last_raw, last)) => {
                let step = (raw - last_raw + PI).rem_euclid(2.0 * PI) - PI;
                last + step
            }
        };
        out.push(phi);
        prev = Some((raw, phi));
    }
    out
}

/// Winding data of one leg.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegWinding {
    /// Whole revolutions about the axis.
    pub windings: u64,
    /// Signed azimuth change [rad].
    pub azimuth_change: f64,
    /// Revolutions predicted from the mean altitude and azimuth rates.
    pub predicted: f64,
    /// Altitude gained per revolution, `2 pi mean|h'| / mean|phi'|`.
    pub pitch: f64,
}

fn leg_winding(samples: &[TrajectorySample], band_height: f64) -> LegWinding {
    let phi = unwrapped_azimuth(samples);
    let n = samples.len();
    let mut azimuth_rate = 0.0;
    let mut climb_rate = 0.0;
    for j in 1..n {
        let dt = samples[j].t - samples[j - 1].t;
        azimuth_rate += (phi[j] - phi[j - 1]).abs();
        climb_rate += 0.5 * (samples[j].h_dot.abs() + samples[j - 1].h_dot.abs()) * dt;
    }
    let duration = samples[n - 1].t - samples[0].t;
    let (azimuth_rate, climb_rate) = (azimuth_rate / duration, climb_rate / duration);
    let pitch = 2.0 * PI * climb_rate / azimuth_rate;
    let change = phi[n - 1] - phi[0];
    LegWinding {
        windings: (change.abs() / (2.0 * PI)).floor() as u64,
        azimuth_change: change,
        predicted: band_height / pitch,
        pitch,
    }
}

pub fn leg_windings(trajectory: &[TrajectorySample], h_minus: f64, h_plus: f64) -> Vec<LegWinding> {
    leg_spans(trajectory, h_minus, h_plus)
        .iter()
        .map(|s| leg_winding(&trajectory[s.start..=s.end], h_plus - h_minus))
        .collect()
}

/// Mean realized spiral pitch over the legs of the trajectory.
pub fn mean_pitch(trajectory: &[TrajectorySample], h_minus: f64, h_plus: f64) -> Option<f64> {
    let w = leg_windings(trajectory, h_minus, h_plus);
    (!w.is_empty()).then(|| w.iter().map(|l| l.pitch).sum::<f64>() / w.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Altitude of the bottom edge of row 0.
    pub h_minus: f64,
    pub rows: usize,
    pub cols: usize,
    /// Cell extents actually used: altitude [length] and azimuth [rad].
    pub cell_h: f64,
    pub cell_s: f64,
    /// `visited[row][col]`; row 0 is the lowest altitude.
    pub visited: Vec<Vec<bool>>,
    pub coverage_fraction: f64,
    /// Diameter of the largest cluster of unvisited cells [length].
    pub max_gap: f64,
    /// Total whole revolutions accumulated over the scan legs.
    pub windings: u64,
    pub legs: Vec<LegWinding>,
}

/// Marks the `(h, azimuth)` cell of the nearest boundary point of each sample
/// within the scan band.
pub fn coverage_report(
    trajectory: &[TrajectorySample],
    surface: &SurfaceModel,
    cell_h: f64,
    cell_s: f64,
) -> Result<CoverageReport> {
    if !(cell_h > 0.0 && cell_s > 0.0) {
        return Err(Error::InvalidConfig("coverage cell sizes must be positive".into()));
    }
    let band = surface.band();
    let height = band.h_plus - band.h_minus;
    let rows = ((height / cell_h).floor() as usize).max(1);
    let cols = (2.0 * PI / cell_s).ceil() as usize;
    let (row_h, col_s) = (height / rows as f64, 2.0 * PI / cols as f64);
    let mut visited = vec![vec![false; cols]; rows];
    for s in trajectory.iter().filter(|s| band.in_scan_range(s.h)) {
        let phi = s.y.atan2(s.x).rem_euclid(2.0 * PI);
        let row = (((s.h - band.h_minus) / row_h) as usize).min(rows - 1);
        let col = ((phi / col_s) as usize).min(cols - 1);
        visited[row][col] = true;
    }
    let count = visited.iter().flatten().filter(|&&v| v).count();
    let max_gap = largest_gap(&visited, row_h, col_s, |row| {
        let h = band.h_minus + (row as f64 + 0.5) * row_h;
        surface.profile_eval(h).map(|p| p.rho).unwrap_or(0.0)
    });
    let legs = leg_windings(trajectory, band.h_minus, band.h_plus);
    Ok(CoverageReport {
        h_minus: band.h_minus,
        rows,
        cols,
        cell_h: row_h,
        cell_s: col_s,
        coverage_fraction: count as f64 / (rows * cols) as f64,
        visited,
        max_gap,
        windings: legs.iter().map(|l| l.windings).sum(),
        legs,
    })
}

/// Largest 4-connected cluster of unvisited cells (periodic in azimuth),
/// measured as the diagonal of its bounding box on the surface.
fn largest_gap(visited: &[Vec<bool>], row_h: f64, col_s: f64, radius_at_row: impl Fn(usize) -> f64) -> f64 {
    let rows = visited.len();
    let cols = visited.first().map_or(0, Vec::len);
    let mut seen = vec![vec![false; cols]; rows];
    let mut best: f64 = 0.0;
    for r0 in 0..rows {
        for c0 in 0..cols {
            if visited[r0][c0] || seen[r0][c0] {
                continue;
            }
            let mut queue = VecDeque::from([(r0, c0)]);
            seen[r0][c0] = true;
            let (mut lo, mut hi) = (r0, r0);
            let mut columns = vec![false; cols];
            let mut row_sum = 0usize;
            let mut cells = 0usize;
            while let Some((r, c)) = queue.pop_front() {
                lo = lo.min(r);
                hi = hi.max(r);
                columns[c] = true;
                row_sum += r;
                cells += 1;
                let mut next = vec![(r, (c + 1) % cols), (r, (c + cols - 1) % cols)];
                if r > 0 {
                    next.push((r - 1, c));
                }
                if r + 1 < rows {
                    next.push((r + 1, c));
                }
                for (nr, nc) in next {
                    if !visited[nr][nc] && !seen[nr][nc] {
                        seen[nr][nc] = true;
                        queue.push_back((nr, nc));
                    }
                }
            }
            let span_cols = circular_span(&columns);
            let radius = radius_at_row(row_sum / cells);
            let vertical = (hi - lo + 1) as f64 * row_h;
            let horizontal = span_cols as f64 * col_s * radius;
            best = best.max(vertical.hypot(horizontal));
        }
    }
    best
}

/// Number of columns covered by the shortest circular arc containing all marked columns.
fn circular_span(columns: &[bool]) -> usize {
    let n = columns.len();
    let marked: Vec<usize> = (0..n).filter(|&c| columns[c]).collect();
    if marked.is_empty() {
        return 0;
    }
    let mut largest_hole = 0;
    for (j, &c) in marked.iter().enumerate() {
        let next = marked[(j + 1) % marked.len()];
        let hole = (next + n - c - 1) % n;
        largest_hole = largest_hole.max(if marked.len() == 1 { n - 1 } else { hole });
    }
    n - largest_hole
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetyVerdict {
    pub passed: bool,
    pub min_d: f64,
    pub min_d_time: f64,
    /// Time of the first sample with `d < d_safe`.
    pub first_violation: Option<f64>,
    pub min_h: f64,
    pub max_h: f64,
    pub extended_band: (f64, f64),
    pub within_extended_band: bool,
    /// Smallest angle between the heading and the vertical axis [rad].
    pub min_heading_clearance: f64,
}

/// Checks `d >= d_safe` at every sample and reports the altitude range
/// against the extended band.
pub fn safety_monitor(trajectory: &[TrajectorySample], zone: &OperationalZone) -> SafetyVerdict {
    let extended_band = zone.band.extended();
    let mut v = SafetyVerdict {
        passed: true,
        min_d: f64::INFINITY,
        min_d_time: f64::NAN,
        first_violation: None,
        min_h: f64::INFINITY,
        max_h: f64::NEG_INFINITY,
        extended_band,
        within_extended_band: true,
        min_heading_clearance: PI / 2.0,
    };
    for s in trajectory {
        if s.d < v.min_d {
            v.min_d = s.d;
            v.min_d_time = s.t;
        }
        if s.d < zone.d_safe && v.first_violation.is_none() {
            v.first_violation = Some(s.t);
        }
        v.min_h = v.min_h.min(s.h);
        v.max_h = v.max_h.max(s.h);
        let alpha = s.iz.clamp(-1.0, 1.0).acos();
        v.min_heading_clearance = v.min_heading_clearance.min(alpha.min(PI - alpha));
    }
    v.within_extended_band = trajectory.is_empty() || (v.min_h >= extended_band.0 && v.max_h <= extended_band.1);
    v.passed = v.first_violation.is_none() && v.within_extended_band;
    v
}

/// Share of in-leg samples (after the first leg) lying within `tolerance` of
/// both sliding surfaces `h' = eta_k` and `d' + chi(d - d0) = 0`.
pub fn sliding_fraction(
    trajectory: &[TrajectorySample],
    legs: &[ScanLeg],
    params: &ControllerParams,
    tolerance: f64,
) -> f64 {
    let mut total = 0usize;
    let mut inside = 0usize;
    for leg in legs.iter().skip(1) {
        for s in trajectory.iter().filter(|s| s.t >= leg.t_start && s.t <= leg.t_end) {
            total += 1;
            let lateral = s.d_dot + chi(s.d - params.d0, params.gamma, params.delta);
            if lateral.abs() <= tolerance && (s.h_dot - leg.eta_k).abs() <= tolerance {
                inside += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        inside as f64 / total as f64
    }
}

/// Summary written after a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub legs: Vec<ScanLeg>,
    pub gaps: Vec<ScanGap>,
    pub complete_legs: usize,
    pub coverage_fraction: f64,
    pub max_gap: f64,
    pub windings: u64,
    pub leg_windings: Vec<LegWinding>,
    pub coverage_cell_h: f64,
    pub coverage_cell_s: f64,
    pub safety: SafetyVerdict,
    /// Safety holds and at least two complete legs were observed.
    pub passed: bool,
}

impl ScanReport {
    pub fn build(
        trajectory: &[TrajectorySample],
        zone: &OperationalZone,
        params: &ControllerParams,
        coverage: &CoverageReport,
    ) -> Self {
        let legs = segment_scan_legs(trajectory, params);
        let safety = safety_monitor(trajectory, zone);
        let complete_legs = legs.iter().filter(|l| l.complete).count();
        Self {
            gaps: scan_gaps(&legs),
            complete_legs,
            coverage_fraction: coverage.coverage_fraction,
            max_gap: coverage.max_gap,
            windings: coverage.windings,
            leg_windings: coverage.legs.clone(),
            coverage_cell_h: coverage.cell_h,
            coverage_cell_s: coverage.cell_s,
            passed: safety.passed && complete_legs >= 2,
            safety,
            legs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{ControllerConfig, TieBreak};
    use crate::frames::frame_at;
    use crate::geometry::{AltitudeBand, Profile, Side};
    use approx::assert_relative_eq;

    fn params() -> ControllerParams {
        ControllerConfig {
            u_h: 0.4,
            eta_star: 0.1,
            gamma: 0.5,
            delta: 0.4,
            t_in: 4.0,
            h_minus: 0.0,
            h_plus: 2.0,
            d0: 1.0,
            boundary_layer: Some(1e-3),
            tiebreak: TieBreak::SPlus,
        }
        .into_params(1.0)
    }

    #[allow(clippy::too_many_arguments)]
    fn sample(t: f64, phi: f64, rho: f64, h: f64, h_dot: f64, d: f64, d_dot: f64, mode: ModeKind) -> TrajectorySample {
        TrajectorySample {
            t,
            x: rho * phi.cos(),
            y: rho * phi.sin(),
            z: h,
            ix: -phi.sin(),
            iy: phi.cos(),
            iz: 0.0,
            h,
            d,
            h_dot,
            d_dot,
            mode,
            ux: 0.0,
            uy: 0.0,
            uz: 0.0,
        }
    }

    /// Ideal zig-zag spiral on the cylinder of radius 2 at standoff 1:
    /// IN at mid-band for `t_in`, then legs at `+-eta` reversing on the first
    /// sample outside the band, stopping 1 s after the last of `reversals`.
    fn synthetic(t_in: f64, eta: f64, reversals: usize, dt: f64, omega: f64) -> Vec<TrajectorySample> {
        let p = params();
        let mut out = Vec::new();
        let mut t = 0.0;
        let mut h = 1.0;
        while t < t_in {
            out.push(sample(t, omega * t, 3.0, h, 0.0, 1.0, 0.0, ModeKind::In));
            t += dt;
        }
        let mut mode = ModeKind::SPlus;
        let mut done = 0;
        while done < reversals {
            let rate = vertical_rate(mode, eta);
            h += rate * dt;
            let outside = (mode == ModeKind::SPlus && h > p.h_plus) || (mode == ModeKind::SMinus && h < p.h_minus);
            if outside {
                done += 1;
                mode = if mode == ModeKind::SPlus { ModeKind::SMinus } else { ModeKind::SPlus };
            }
            out.push(sample(t, omega * t, 3.0, h, rate, 1.0, 0.0, mode));
            t += dt;
        }
        let t_stop = t + 1.0;
        while t < t_stop {
            let rate = vertical_rate(mode, eta);
            h += rate * dt;
            out.push(sample(t, omega * t, 3.0, h, rate, 1.0, 0.0, mode));
            t += dt;
        }
        out
    }

    #[test]
    fn cylinder_coordinates() {
        let s = SurfaceModel::cylinder(2.0, Side::Outer, AltitudeBand::new(0.0, 10.0, 0.0).unwrap()).unwrap();
        let (h, phi) = pseudo_cylindrical(&s, &Vec3::new(2.0, 0.0, 5.0)).unwrap();
        assert_eq!((h, phi), (5.0, 0.0));
        let (h, phi) = pseudo_cylindrical(&s, &Vec3::new(0.0, 2.0, 5.0)).unwrap();
        assert_eq!(h, 5.0);
        assert_relative_eq!(phi, PI / 2.0);
    }

    #[test]
    fn flow_lines_are_meridians() {
        let s = SurfaceModel::new(
            Profile::Vase { base: 2.0, amplitude: 0.3, frequency: 1.0, phase: 0.0 },
            Side::Outer,
            AltitudeBand::new(0.0, 3.0, 0.0).unwrap(),
        )
        .unwrap();
        let phi0 = 0.7;
        let field = |b: &Vec3| {
            let f = frame_at(&s, b).unwrap();
            -f.t_perp / f.sin_theta()
        };
        let mut b = s.point_at(0.5, phi0).unwrap();
        let dt = 1e-3;
        while b.z > 0.2 && b.z < 2.5 {
            let k1 = field(&b);
            let k2 = field(&(b + k1 * (dt / 2.0)));
            let k3 = field(&(b + k2 * (dt / 2.0)));
            let k4 = field(&(b + k3 * dt));
            b += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            let rho = s.profile_eval(b.z).unwrap().rho;
            b = Vec3::new(b.x, b.y, 0.0).normalize() * rho + Vec3::new(0.0, 0.0, b.z);
        }
        let (h, phi) = pseudo_cylindrical(&s, &b).unwrap();
        assert!(h >= 2.5);
        assert!((phi - phi0).abs() <= 1e-8, "{}", phi - phi0);
    }

    #[test]
    fn coordinates_round_trip() {
        let s = SurfaceModel::new(
            Profile::Cone { base: 2.0, slope: 0.2 },
            Side::Outer,
            AltitudeBand::new(0.0, 3.0, 0.0).unwrap(),
        )
        .unwrap();
        for j in 0..50 {
            let (h, phi) = (3.0 * j as f64 / 49.0, 2.0 * PI * j as f64 / 50.0);
            let (h2, phi2) = pseudo_cylindrical(&s, &s.point_at(h, phi).unwrap()).unwrap();
            assert!((h2 - h).abs() <= 1e-9 && (phi2 - phi).abs() <= 1e-9);
        }
    }

    #[test]
    fn synthetic_legs_are_recovered() {
        let traj = synthetic(4.0, 0.1, 5, 0.01, 0.3);
        let legs = detect_scan_legs(&traj, &params()).unwrap();
        assert_eq!(legs.len(), 6);
        assert!(legs[1..5].iter().all(|l| l.complete));
        // The first leg starts mid-band, the last one is cut by the end of the run.
        assert!(!legs[0].complete && !legs[5].complete);
        for (k, l) in legs.iter().enumerate() {
            assert_eq!(l.eta_k, if k % 2 == 0 { 0.1 } else { -0.1 });
            assert_eq!((l.eps, l.eps_d), (0.0, 0.0));
        }
        // The first leg starts where IN ends, inside the band.
        assert_relative_eq!(legs[0].t_start, 4.0, epsilon = 0.011);
        assert_relative_eq!(legs[1].duration(), 20.0, epsilon = 0.02);
        for g in scan_gaps(&legs) {
            assert!(g.duration() > 0.0 && g.duration() <= 0.021);
        }
    }

    #[test]
    fn legs_and_gaps_alternate() {
        let traj = synthetic(3.0, 0.2, 7, 0.005, 0.4);
        let legs = segment_scan_legs(&traj, &params());
        let gaps = scan_gaps(&legs);
        for (k, g) in gaps.iter().enumerate() {
            assert_eq!(g.t_start, legs[k].t_end);
            assert_eq!(g.t_end, legs[k + 1].t_start);
            assert_eq!(legs[k].eta_k, -legs[k + 1].eta_k);
        }
    }

    #[test]
    fn in_mode_only_is_insufficient() {
        let traj: Vec<_> =
            (0..100).map(|j| sample(j as f64 * 0.1, 0.0, 3.0, 1.0, 0.0, 1.0, 0.0, ModeKind::In)).collect();
        assert!(matches!(detect_scan_legs(&traj, &params()), Err(Error::InsufficientRun { legs: 0 })));
    }

    #[test]
    fn sinusoidal_standoff_epsilons() {
        let traj: Vec<_> = (0..=7000)
            .map(|j| {
                let t = j as f64 * 1e-3;
                sample(t, 0.0, 3.0, 0.1 * t, 0.1, 1.0 + 0.01 * t.sin(), 0.01 * t.cos(), ModeKind::SPlus)
            })
            .collect();
        let leg = ScanLeg {
            t_start: 0.0,
            t_end: 7.0,
            mode: ModeKind::SPlus,
            eta_k: 0.1,
            eps: 0.0,
            eps_d: 0.0,
            complete: false,
            window_start: 0.0,
        };
        let (eps, eps_d) = leg_epsilons(&leg, &traj, 1.0);
        assert_relative_eq!(eps, 0.01, epsilon = 1e-12);
        assert_relative_eq!(eps_d, 0.01, epsilon = 1e-6);
    }

    #[test]
    fn first_leg_transient_is_excluded() {
        let mut traj = synthetic(4.0, 0.1, 3, 0.01, 0.3);
        let legs = segment_scan_legs(&traj, &params());
        let early = traj.iter().position(|s| s.t >= legs[0].t_start + 0.05 * legs[0].duration()).unwrap();
        traj[early].d = 1.5;
        let late = traj.iter().position(|s| s.t >= legs[0].t_start + 0.5 * legs[0].duration()).unwrap();
        let legs = segment_scan_legs(&traj, &params());
        assert_eq!(legs[0].eps_d, 0.0);
        traj[late].d = 1.2;
        let legs = segment_scan_legs(&traj, &params());
        assert_relative_eq!(legs[0].eps_d, 0.2, epsilon = 1e-12);
    }

    /// Helix on the cylinder of radius 2 at standoff 1 with pitch `pitch`.
    fn helix(pitch: f64, reversals: usize) -> Vec<TrajectorySample> {
        let omega = 0.3;
        let eta = pitch * omega / (2.0 * PI);
        synthetic(0.0, eta, reversals, 0.002, omega)
    }

    fn cylinder() -> SurfaceModel {
        SurfaceModel::cylinder(2.0, Side::Outer, AltitudeBand::new(0.0, 2.0, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn helix_covers_rows_of_its_pitch() {
        let pitch = 0.25;
        let traj = helix(pitch, 2);
        let c = coverage_report(&traj, &cylinder(), pitch, 2.0 * PI / 64.0).unwrap();
        assert_eq!(c.rows, 8);
        assert_eq!(c.cols, 64);
        assert_eq!(c.coverage_fraction, 1.0);
        assert_eq!(c.max_gap, 0.0);
    }

    #[test]
    fn helix_windings_match_pitch() {
        for pitch in [0.3, 0.45, 0.7] {
            let traj = helix(pitch, 3);
            let w = leg_windings(&traj, 0.0, 2.0);
            // The first leg starts mid-band.
            for leg in &w[1..3] {
                assert_eq!(leg.windings, (2.0 / pitch).floor() as u64, "pitch {pitch}");
                assert_relative_eq!(leg.pitch, pitch, epsilon = 1e-3);
                assert!((leg.predicted - leg.windings as f64).abs() < 1.0);
            }
        }
    }

    #[test]
    fn coverage_is_monotone() {
        let traj = helix(0.5, 2);
        let s = cylinder();
        let mut last = 0.0;
        for n in (100..traj.len()).step_by(traj.len() / 10) {
            let c = coverage_report(&traj[..n], &s, 0.25, 2.0 * PI / 32.0).unwrap();
            assert!(c.coverage_fraction >= last);
            last = c.coverage_fraction;
        }
    }

    #[test]
    fn gap_spans_the_azimuth_seam() {
        let mut visited = vec![vec![true; 8]; 4];
        for row in visited.iter_mut().take(3).skip(1) {
            row[0] = false;
            row[7] = false;
        }
        let gap = largest_gap(&visited, 0.5, 2.0 * PI / 8.0, |_| 2.0);
        let expected = 1.0f64.hypot(2.0 * 2.0 * PI / 8.0 * 2.0);
        assert_relative_eq!(gap, expected, epsilon = 1e-12);
    }

    #[test]
    fn safety_verdicts() {
        let zone = OperationalZone::new(0.2, 0.3, 1.0, 4.0, AltitudeBand::new(0.0, 2.0, 0.5).unwrap()).unwrap();
        let mut traj: Vec<_> =
            (0..100).map(|j| sample(j as f64 * 0.1, 0.0, 3.0, 1.0, 0.0, 0.3, 0.0, ModeKind::In)).collect();
        let v = safety_monitor(&traj, &zone);
        assert!(v.passed);
        assert_relative_eq!(v.min_d, 0.3);
        traj[37].d = 0.19;
        traj[60].d = 0.1;
        let v = safety_monitor(&traj, &zone);
        assert!(!v.passed);
        assert_eq!(v.first_violation, Some(traj[37].t));
        assert_eq!(v.min_d_time, traj[60].t);
        traj[37].d = 0.3;
        traj[60].d = 0.3;
        traj[80].h = 2.6;
        let v = safety_monitor(&traj, &zone);
        assert!(!v.passed && !v.within_extended_band);
    }

    #[test]
    fn sliding_fraction_of_ideal_scan() {
        let traj = synthetic(4.0, 0.1, 4, 0.01, 0.3);
        let p = params();
        let legs = segment_scan_legs(&traj, &p);
        assert_eq!(sliding_fraction(&traj, &legs, &p, 1e-9), 1.0);
    }
}
