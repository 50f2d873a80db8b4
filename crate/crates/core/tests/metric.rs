use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use llarull_core::families::{make_metric, FamilySpec};
use llarull_core::metric::WarpedMetric;
use llarull_core::{ClassParams, LabError, RadialGrid};
use proptest::prelude::*;

fn round(n: usize) -> WarpedMetric {
    make_metric(&FamilySpec::new("round"), RadialGrid::uniform(n).unwrap()).unwrap()
}

fn scaled(c: f64, n: usize) -> WarpedMetric {
    make_metric(&FamilySpec::new("scaled").with("c", c), RadialGrid::uniform(n).unwrap()).unwrap()
}

/// `m` of the scaled sphere: `R = 6/c²` everywhere and volume `2π²c³`.
fn scaled_deficit(c: f64) -> f64 {
    let gap = 6.0 - 6.0 / (c * c);
    (gap * gap * 2.0 * PI * PI * c.powi(3)).powf(0.25)
}

#[test]
fn round_sphere_has_curvature_six_and_volume_two_pi_squared() {
    let m = round(801);
    let r = m.scalar_curvature().unwrap();
    assert!(r.iter().all(|r| (r - 6.0).abs() < 1e-9));
    assert_abs_diff_eq!(m.volume(), 2.0 * PI * PI, epsilon = 1e-9);
    assert!(m.scalar_deficit().unwrap() < 1e-6);
    assert!(m.validate().pass);
}

#[test]
fn scaled_sphere_matches_closed_forms() {
    for c in [1.1, 1.5] {
        let m = scaled(c, 801);
        let r = m.scalar_curvature().unwrap();
        assert!(r.iter().all(|r| (r - 6.0 / (c * c)).abs() < 1e-8));
        assert_abs_diff_eq!(m.volume(), 2.0 * PI * PI * c.powi(3), epsilon = 1e-8);
        assert_abs_diff_eq!(m.scalar_deficit().unwrap(), scaled_deficit(c), epsilon = 1e-8);
        assert_abs_diff_eq!(m.cheeger_levelset().value, 4.0 / (PI * c), epsilon = 1e-4);
    }
}

#[test]
fn level_set_cheeger_of_the_round_sphere_is_four_over_pi() {
    let c = round(2001).cheeger_levelset();
    assert_abs_diff_eq!(c.value, 4.0 / PI, epsilon = 1e-4);
    assert_abs_diff_eq!(c.colatitude, PI / 2.0, epsilon = 1e-3);
}

#[test]
fn diameter_bracket_contains_the_exact_diameter() {
    let b = round(401).diameter_bound().unwrap();
    assert!(b.contains(PI), "{b:?}");
    assert!(b.upper - b.lower < 0.05);
    let b = scaled(1.3, 401).diameter_bound().unwrap();
    assert!(b.contains(1.3 * PI), "{b:?}");
}

#[test]
fn round_ball_volume_is_closed_form_anywhere() {
    let m = round(401);
    for q in [0.0, 0.4, PI / 2.0, 2.9, PI] {
        for r in [0.05f64, 0.1, 0.7] {
            let exact = PI * (2.0 * r - (2.0 * r).sin());
            assert_abs_diff_eq!(m.ball_volume(q, r).unwrap(), exact, epsilon = 1e-10);
        }
    }
    assert_abs_diff_eq!(m.ball_volume(1.0, PI).unwrap(), 2.0 * PI * PI, epsilon = 1e-8);
    assert!(m.ball_volume(1.0, -0.1).is_err());
}

#[test]
fn validation_flags_metrics_below_the_round_one() {
    let g = RadialGrid::uniform(201).unwrap();
    let x = g.nodes().to_vec();
    let thin = WarpedMetric::from_samples(
        g.clone(),
        vec![1.0; x.len()],
        x.iter().map(|t| 0.9 * t.sin()).collect(),
        "thin",
    )
    .unwrap();
    let v = thin.validate();
    assert!(!v.pass);
    assert!(!v.get("f_at_least_sin").unwrap().pass);
    let short = WarpedMetric::from_samples(g, vec![0.8; x.len()], x.iter().map(|t| t.sin()).collect(), "short")
        .unwrap();
    assert!(!short.validate().get("phi_at_least_one").unwrap().pass);
}

#[test]
fn sampled_metrics_round_trip_through_tables() {
    let m = scaled(1.2, 301);
    let back = WarpedMetric::from_table(&m.to_table(), "back").unwrap();
    assert_eq!(back.theta(), m.theta());
    assert_abs_diff_eq!(back.volume(), m.volume(), epsilon = 1e-10);
    let r = back.scalar_curvature().unwrap();
    let mid = r.len() / 2;
    assert_abs_diff_eq!(r[mid], 6.0 / 1.44, epsilon = 1e-5);
}

#[test]
fn malformed_tables_are_parse_errors() {
    assert!(WarpedMetric::from_table("0 1\n1 2 3\n", "bad").is_err());
    assert!(WarpedMetric::from_table("0 1 x\n", "bad").is_err());
}

#[test]
fn membership_reports_each_condition() {
    let m = round(401);
    let rep = m.class_membership(&ClassParams::new(40.0, 10.0, 1.0, 1.0).unwrap()).unwrap();
    assert!(rep.member);
    assert!(rep.cheeger_from_surrogate);
    let rep = m.class_membership(&ClassParams::new(40.0, 10.0, 1.0, 2.0).unwrap()).unwrap();
    assert_eq!(rep.failed(), vec!["v"]);
    let rep = m.class_membership(&ClassParams::new(10.0, 3.0, 1.0, 1.0).unwrap()).unwrap();
    assert_eq!(rep.failed(), vec!["ii", "iii"]);
}

#[test]
fn class_parameters_must_be_positive() {
    assert!(matches!(ClassParams::new(0.0, 1.0, 1.0, 1.0), Err(LabError::Config(_))));
    assert!(ClassParams::new(1.0, 1.0, f64::NAN, 1.0).is_err());
}

#[test]
fn bump_curvature_defect_is_linear_in_amplitude() {
    let sup = |eta: f64| {
        let m = make_metric(&FamilySpec::new("bump").with("eta", eta), RadialGrid::uniform(801).unwrap()).unwrap();
        m.scalar_curvature()
            .unwrap()
            .iter()
            .map(|r| (r - 6.0).abs())
            .fold(0.0, f64::max)
    };
    let (a, b) = (sup(0.02), sup(0.01));
    assert!(a > 0.0);
    assert_abs_diff_eq!(a / b, 2.0, epsilon = 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scaling_multiplies_volume_by_c_cubed(c in 1.0f64..2.5) {
        let m = scaled(c, 257);
        prop_assert!((m.volume() - 2.0 * PI * PI * c.powi(3)).abs() < 1e-7 * c.powi(3));
        prop_assert!((m.scalar_deficit().unwrap() - scaled_deficit(c)).abs() < 1e-6);
    }

    #[test]
    fn ball_volumes_are_monotone_in_radius(q in 0.0f64..PI, r in 0.01f64..1.5, dr in 0.001f64..0.5) {
        let m = scaled(1.2, 201);
        let small = m.ball_volume(q, r).unwrap();
        let big = m.ball_volume(q, r + dr).unwrap();
        prop_assert!(big >= small - 1e-12);
    }
}
