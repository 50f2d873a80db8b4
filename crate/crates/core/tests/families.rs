use std::f64::consts::PI;

use llarull_core::families::{FamilyRegistry, FamilySpec, POLAR_GRADING};
use llarull_core::{LabError, RadialGrid};
use proptest::prelude::*;

fn reg() -> FamilyRegistry {
    FamilyRegistry::builtin()
}

#[test]
fn builtin_catalog_is_sorted_and_complete() {
    let r = reg();
    assert_eq!(r.names(), vec!["bubble", "bump", "round", "scaled", "tendril"]);
    let cat = r.catalog();
    let heads: Vec<&str> = cat.lines().filter(|l| !l.starts_with(' ')).collect();
    assert_eq!(heads.len(), 5);
    assert!(heads.windows(2).all(|w| w[0] < w[1]));
    assert!(cat.contains("eta") && cat.contains("required"));
}

#[test]
fn unknown_family_and_parameters_are_rejected() {
    let r = reg();
    assert!(matches!(r.get("torus"), Err(LabError::Unknown { .. })));
    assert!(r.resolve(&FamilySpec::new("bump")).is_err(), "eta is required");
    assert!(r.resolve(&FamilySpec::new("round").with("c", 1.0)).is_err());
    assert!(r.resolve(&FamilySpec::new("scaled").with("c", f64::NAN)).is_err());
    let p = r.resolve(&FamilySpec::new("bump").with("eta", 0.1)).unwrap();
    assert_eq!(p["eta"], 0.1);
    assert_eq!(p.len(), 4);
}

#[test]
fn out_of_range_parameters_fail_to_build() {
    let g = || RadialGrid::uniform(101).unwrap();
    let r = reg();
    assert!(r.make_metric(&FamilySpec::new("scaled").with("c", 0.9), g()).is_err());
    assert!(r.make_metric(&FamilySpec::new("bump").with("eta", -0.1), g()).is_err());
    let bad_tendril = FamilySpec::new("tendril").with("L", 1.0).with("w", 0.2).with("theta0", 0.1);
    assert!(r.make_metric(&bad_tendril, g()).is_err());
    assert!(r.make_metric(&FamilySpec::new("bubble").with("A", -1.0), g()).is_err());
}

#[test]
fn bump_stays_within_its_amplitude_of_the_round_profile() {
    let eta = 0.3;
    let m = reg()
        .make_metric(&FamilySpec::new("bump").with("eta", eta), RadialGrid::uniform(801).unwrap())
        .unwrap();
    let height = 0.02;
    for (t, f) in m.theta().iter().zip(m.f()) {
        assert!((f - t.sin()).abs() <= eta * height * t.sin() + 1e-15);
        assert!(*f >= t.sin() - 1e-15);
    }
    assert!(m.phi().iter().all(|p| *p >= 1.0 && *p <= 1.0 + eta * height + 1e-15));
}

#[test]
fn polar_families_get_graded_grids_that_resolve_their_features() {
    let r = reg();
    let spec = FamilySpec::new("tendril").with("L", 2.0).with("w", 0.1).with("theta0", 0.3);
    let g = r.grid_for(&spec, 2001).unwrap();
    assert!(g.max_step() <= PI / 2000.0 * (1.0 + 1e-12));
    // cells inside the spline are at most w/16
    let x = g.nodes();
    let widest = x
        .windows(2)
        .filter(|w| w[0] >= 0.2 && w[1] <= 0.4)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    assert!(widest <= 0.1 / 16.0 + 1e-12, "{widest}");
    let round = r.grid_for(&FamilySpec::new("round"), 2001).unwrap();
    assert_eq!(round.len(), 2001);
    let fine = r.grid_with_step(&spec, PI / 1000.0).unwrap();
    assert!(fine.max_step() <= PI / 1000.0 * (1.0 + 1e-12));
    assert!(POLAR_GRADING > 0.0 && POLAR_GRADING < 1.0);
}

#[test]
fn every_reference_metric_dominates_the_round_one() {
    let r = reg();
    for spec in [
        FamilySpec::new("round"),
        FamilySpec::new("scaled").with("c", 1.1),
        FamilySpec::new("bump").with("eta", 0.1),
        FamilySpec::new("tendril").with("L", 2.0).with("w", 0.1).with("theta0", 0.3),
        FamilySpec::new("bubble").with("A", 2.0).with("delta", 0.1),
    ] {
        let m = r.make_metric(&spec, r.grid_for(&spec, 1001).unwrap()).unwrap();
        assert!(m.validate().pass, "{}", spec.name);
        assert!(m.volume() >= 2.0 * PI * PI - 1e-8, "{}", spec.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tendril_volume_shrinks_with_width(k in 3i32..8) {
        let r = reg();
        let vol = |w: f64| {
            let s = FamilySpec::new("tendril").with("L", 1.0).with("w", w).with("theta0", 2.0 * w);
            r.make_metric(&s, r.grid_for(&s, 401).unwrap()).unwrap().volume()
        };
        let w = 2f64.powi(-k);
        prop_assert!(vol(w) > vol(w / 2.0));
    }

    #[test]
    fn bubble_volume_grows_with_amplitude(a in 0.0f64..4.0) {
        let r = reg();
        let vol = |a: f64| {
            let s = FamilySpec::new("bubble").with("A", a).with("delta", 0.1);
            r.make_metric(&s, r.grid_for(&s, 401).unwrap()).unwrap().volume()
        };
        prop_assert!(vol(a + 0.5) > vol(a));
    }
}
