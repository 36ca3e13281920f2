use approx::assert_relative_eq;
use proptest::prelude::*;
use spiral_scan::geometry::{AltitudeBand, OperationalZone, Profile, Side, SurfaceModel};
use spiral_scan::tuning::{
    check_initial_disks, revolution_geometry, tune_generic, tune_revolution_inner, tune_revolution_outer,
    validate_certificate, validate_params, RevolutionProblem, SurfaceBounds, TuningCertificate, TuningOptions,
};
use spiral_scan::vehicle::VehicleState;
use spiral_scan::{Error, Vec3};

fn band() -> AltitudeBand {
    AltitudeBand::new(0.0, 2.0, 0.5).unwrap()
}

fn cylinder_bounds(rho: f64, rho_in_minus: f64, rho_in_plus: f64) -> SurfaceBounds {
    SurfaceBounds { beta_bar: 0.0, rho_minus: rho, rho_plus: rho, c_plus: 0.0, rho_in_minus, rho_in_plus }
}

fn problem(sigma: Side, bounds: SurfaceBounds) -> RevolutionProblem {
    RevolutionProblem {
        sigma,
        bounds,
        band: band(),
        v: 1.0,
        u_max: 2.0,
        d0: 1.0,
        d_safe: 0.2,
        kappa: 0.5,
        options: TuningOptions { eta_cap: Some(0.2), ..TuningOptions::default() },
    }
}

// Hand evaluation of the outer-scan edge standoff and start clearance.
fn outer_by_hand(rho: f64, r: f64, d_safe: f64, d0: f64, rho_in_minus: f64) -> (f64, f64) {
    let lower = if d_safe > r - rho { d_safe } else { r - rho };
    let upper = if d0 < rho_in_minus - rho - 2.0 * r { d0 } else { rho_in_minus - rho - 2.0 * r };
    let d_star = (lower + upper) / 2.0;
    (d_star, rho_in_minus - rho - 2.0 * r - d_star)
}

#[test]
fn outer_worked_example_numbers() {
    let (d_star, delta_rho) = outer_by_hand(2.0, 0.5, 0.2, 1.0, 4.5);
    assert_relative_eq!(d_star, 0.6, epsilon = 1e-15);
    assert_relative_eq!(delta_rho, 0.9, epsilon = 1e-15);

    let geo = revolution_geometry(&problem(Side::Outer, cylinder_bounds(2.0, 4.5, 5.0))).unwrap();
    assert_relative_eq!(geo.d_edge, d_star, epsilon = 1e-15);
    assert_relative_eq!(geo.delta_rho, delta_rho, epsilon = 1e-15);
    let u_h0 = 2.0 * (1.0 - 1.0 / (1.9f64 * 1.9)).sqrt();
    assert_relative_eq!(geo.u_h0, u_h0, epsilon = 1e-14);

    let cert = tune_revolution_outer(&problem(Side::Outer, cylinder_bounds(2.0, 4.5, 5.0))).unwrap();
    assert_eq!(cert.d_star, Some(geo.d_edge));
    assert!(cert.margins.all_hold(), "{:?}", cert.margins.failures());
    // Flat generatrix: the hyperbola constraint is vacuous.
    assert_eq!(cert.margins.get("cross_coupling").unwrap().slack, f64::INFINITY);
}

#[test]
fn inner_worked_example_edge_standoff() {
    // rho = 4, R = 0.5, rho_in in [1.8, 2.0]
    let d_dagger = 0.5 * (f64::max(1.0, 4.0 - 1.8 + 1.0) + 4.0 - 0.5);
    assert_relative_eq!(d_dagger, 3.35, epsilon = 1e-15);

    let p = problem(Side::Inner, cylinder_bounds(4.0, 1.8, 2.0));
    let geo = revolution_geometry(&p).unwrap();
    assert_relative_eq!(geo.d_edge, 3.35, epsilon = 1e-14);
    assert_relative_eq!(geo.delta_rho, 0.15, epsilon = 1e-14);
    // The scan edge stays more than a turning radius from the wall.
    assert!(4.0 - geo.d_edge > 0.5);
    let cert = tune_revolution_inner(&p).unwrap();
    assert!(cert.margins.all_hold(), "{:?}", cert.margins.failures());
}

#[test]
fn inner_example_with_narrow_start_band_gives_full_certificate() {
    let cert = tune_revolution_inner(&problem(Side::Inner, cylinder_bounds(4.0, 2.2, 2.4))).unwrap();
    assert!(cert.margins.entries.iter().all(|m| m.slack > 0.0), "{:?}", cert.margins);
    let surface = SurfaceModel::cylinder(4.0, Side::Inner, band()).unwrap();
    let audit = validate_certificate(&cert, &surface).unwrap();
    assert!(audit.all_hold(), "{:?}", audit.failures());
}

#[test]
fn wide_cavity_start_band_is_rejected_by_name() {
    match tune_revolution_inner(&problem(Side::Inner, cylinder_bounds(4.0, 0.5, 1.0))) {
        Err(Error::Precondition { name, .. }) => assert_eq!(name, "start_band_width"),
        other => panic!("expected a precondition failure, got {other:?}"),
    }
}

#[test]
fn outer_start_too_close_is_rejected_by_name() {
    match tune_revolution_outer(&problem(Side::Outer, cylinder_bounds(2.0, 3.0, 3.5))) {
        Err(Error::Precondition { name, .. }) => assert_eq!(name, "far_start"),
        other => panic!("expected a precondition failure, got {other:?}"),
    }
}

#[test]
fn revolution_and_generic_tuners_share_a_parameter_set_on_cylinders() {
    let cert = tune_revolution_outer(&problem(Side::Outer, cylinder_bounds(2.0, 4.5, 5.0))).unwrap();
    let surface = SurfaceModel::cylinder(2.0, Side::Outer, band()).unwrap();
    let report = validate_params(&cert.params, &surface, &cert.zone, 1.0, 2.0, 0.5, cert.k, cert.big_delta).unwrap();
    assert!(report.all_hold(), "{:?}", report.failures());

    let generic = tune_generic(&surface, &cert.zone, 1.0, 2.0, 0.5, &TuningOptions::default(), None).unwrap();
    let report =
        validate_params(&cert.params, &surface, &cert.zone, 1.0, 2.0, 0.5, generic.k, generic.big_delta).unwrap();
    assert!(report.all_hold(), "{:?}", report.failures());
}

#[test]
fn certificates_survive_a_json_round_trip() {
    let cert = tune_revolution_outer(&problem(Side::Outer, cylinder_bounds(2.0, 4.5, 5.0))).unwrap();
    let text = serde_json::to_string(&cert).unwrap();
    assert_eq!(TuningCertificate::from_json(&text).unwrap(), cert);
}

fn vase() -> (SurfaceModel, OperationalZone) {
    let b = AltitudeBand::new(0.0, 3.0, 0.5).unwrap();
    let s = SurfaceModel::new(Profile::Vase { base: 2.0, amplitude: 0.3, frequency: 1.0, phase: 0.0 }, Side::Outer, b)
        .unwrap();
    (s, OperationalZone::new(0.2, 0.3, 1.0, 4.0, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shrinking_parameters_preserves_validity(f in 0.01f64..1.0) {
        let (s, z) = vase();
        let cert = tune_generic(&s, &z, 1.0, 2.0, 0.5, &TuningOptions::default(), None).unwrap();
        let mut p = cert.params;
        p.eta_star *= f;
        p.gamma *= f;
        p.mu = p.gamma * p.delta;
        p.u_h *= f;
        let report = validate_params(&p, &s, &z, 1.0, 2.0, 0.5, cert.k, cert.big_delta).unwrap();
        for name in ["vertical_authority", "vertical_authority_tilt", "speed_ellipse", "cross_coupling", "standoff_decay"] {
            let m = report.get(name).unwrap();
            prop_assert!(m.holds(), "{name} slack {}", m.slack);
        }
    }
}

#[test]
fn disks_well_inside_the_zone_pass() {
    let b = AltitudeBand::new(-1.0, 1.0, 0.5).unwrap();
    let s = SurfaceModel::cylinder(2.0, Side::Outer, b).unwrap();
    let z = OperationalZone::new(0.2, 0.5, 1.0, 10.0, b).unwrap();
    let state = VehicleState::new(Vec3::new(5.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)).unwrap();
    // radius 1 / sqrt(4 - u_h^2) = 0.6
    let u_h = (4.0 - 1.0 / 0.36f64).sqrt();
    let verdict = check_initial_disks(&state, &s, &z, 1.0, 2.0, u_h);
    assert!(verdict.inside && !verdict.preliminary_maneuver_needed);
    // Nearest boundary point of the inner disk is at radius 3.8, d = 1.8.
    assert_relative_eq!(verdict.worst_violation, -(10.0 - 4.2f64).min(1.8 - 0.5), epsilon = 1e-4);
}

#[test]
fn disk_crossing_the_inner_edge_is_reported() {
    let b = AltitudeBand::new(-1.0, 1.0, 0.5).unwrap();
    let s = SurfaceModel::cylinder(2.0, Side::Outer, b).unwrap();
    let z = OperationalZone::new(0.2, 0.5, 1.0, 10.0, b).unwrap();
    let state = VehicleState::new(Vec3::new(2.51, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)).unwrap();
    let verdict = check_initial_disks(&state, &s, &z, 1.0, 2.0, 3.0f64.sqrt());
    assert!(!verdict.inside);
    assert!(verdict.worst_violation > 0.0);
}

#[test]
fn climbing_heading_needs_a_preliminary_maneuver() {
    let b = AltitudeBand::new(-1.0, 1.0, 0.5).unwrap();
    let s = SurfaceModel::cylinder(2.0, Side::Outer, b).unwrap();
    let z = OperationalZone::new(0.2, 0.5, 1.0, 10.0, b).unwrap();
    let state = VehicleState::new(Vec3::new(5.0, 0.0, 0.0), Vec3::new(0.0, 0.8, 0.6)).unwrap();
    let verdict = check_initial_disks(&state, &s, &z, 1.0, 2.0, 0.5);
    assert!(verdict.preliminary_maneuver_needed);
    assert!(!verdict.inside);
}
