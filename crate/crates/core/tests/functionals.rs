use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use llarull_core::families::{FamilyRegistry, FamilySpec};
use llarull_core::functionals::{
    alignment_constants, core_integrals, l1_gap, point_pick, polar_average, polar_csc3, ratio_deviation_volume,
    ratio_seminorm, round_ball_volume, shell_integral, shell_select, sublevel_round_volume, tol_disc,
    weighted_median, Pole, SHELL_WINDOW, TOL_FLOOR,
};
use llarull_core::metric::WarpedMetric;
use llarull_core::potential::{solve_quadrature, Potential, SolverConfig};
use proptest::prelude::*;

fn solved(spec: &FamilySpec, n: usize) -> (WarpedMetric, Potential) {
    let r = FamilyRegistry::builtin();
    let m = r.make_metric(spec, r.grid_for(spec, n).unwrap()).unwrap();
    let p = solve_quadrature(&m, &SolverConfig::default()).unwrap();
    (m, p)
}

fn round(n: usize) -> (WarpedMetric, Potential) {
    solved(&FamilySpec::new("round"), n)
}

#[test]
fn round_identities_are_sharp() {
    let (m, p) = round(2001);
    let c = core_integrals(&m, &p, 1e-2).unwrap();
    // ∫ csc θ dV over the unit sphere
    assert_abs_diff_eq!(c.i_csc2, 8.0 * PI, epsilon = 8.0 * PI * 1e-6);
    assert!(c.i_align.abs() <= 1e-8);
    assert!(c.i_mass.abs() <= 1e-8);
    assert!(c.i_deficit.abs() <= 1e-8);
    // ∫ |∇cos θ| dV = 4π ∫ sin³ = 16π/3
    assert_abs_diff_eq!(c.grad_l1, 16.0 * PI / 3.0, epsilon = 1e-8);
    // ‖∇cos θ‖² = 4π ∫ sin⁴ = 3π²/2
    assert_abs_diff_eq!(c.grad_l2, (1.5 * PI * PI).sqrt(), epsilon = 1e-8);
    assert!(ratio_seminorm(&m, &p) < 1e-5);
}

#[test]
fn shell_and_polar_integrals_have_closed_forms_on_the_round_sphere() {
    let (m, p) = round(2001);
    let s = PI / 8.0;
    let shell = 4.0 * PI * s.sin().powi(3);
    for pole in [Pole::North, Pole::South] {
        assert_abs_diff_eq!(shell_integral(&m, &p, pole, s), shell, epsilon = 1e-5);
        assert_abs_diff_eq!(polar_csc3(&m, &p, pole, s).unwrap(), PI * PI / 2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(polar_average(&m, &p, pole, 0.2).unwrap().abs(), 0.2f64.cos(), epsilon = 1e-9);
    }
    assert!(polar_csc3(&m, &p, Pole::North, 0.5).is_err());
    assert!(polar_average(&m, &p, Pole::North, 0.0).is_err());
}

#[test]
fn shell_selection_stays_in_its_window() {
    for spec in [
        FamilySpec::new("round"),
        FamilySpec::new("bump").with("eta", 0.1),
        FamilySpec::new("tendril").with("L", 2.0).with("w", 0.1).with("theta0", 0.3),
    ] {
        let (m, p) = solved(&spec, 1001);
        let sel = shell_select(&m, &p);
        for s in [sel.sigma_p, sel.sigma_mp] {
            assert!(s >= SHELL_WINDOW.0 && s <= SHELL_WINDOW.1, "{} {s}", spec.name);
        }
        assert_abs_diff_eq!(sel.shell_integral_p, shell_integral(&m, &p, Pole::North, sel.sigma_p), epsilon = 1e-12);
    }
}

#[test]
fn sublevel_volume_of_the_height_function() {
    let (m, p) = round(2001);
    let r = PI / 8.0;
    // cos θ > cos(π/8) inside the ball, so low levels miss it
    for gamma in [0.0, 0.5, 0.9] {
        assert_eq!(sublevel_round_volume(&m, &p, Pole::North, r, gamma).unwrap(), 0.0);
    }
    let gamma: f64 = 0.95;
    let exact = round_ball_volume(r) - round_ball_volume(gamma.acos());
    for pole in [Pole::North, Pole::South] {
        assert_abs_diff_eq!(sublevel_round_volume(&m, &p, pole, r, gamma).unwrap(), exact, epsilon = 1e-6);
    }
    assert!(sublevel_round_volume(&m, &p, Pole::North, r, 1.0).is_err());
}

#[test]
fn round_alignment_constants_are_trivial() {
    let (m, p) = round(1001);
    let c = alignment_constants(&m, &p);
    assert_abs_diff_eq!(c.a, 1.0, epsilon = 1e-6);
    assert_abs_diff_eq!(c.sigma, 0.0, epsilon = 1e-6);
    assert!(c.attained_l1_gap_ratio < 1e-5);
    assert_eq!(ratio_deviation_volume(&m, &p, c.a, 0.05), 0.0);
}

#[test]
fn point_pick_on_the_round_sphere() {
    let (m, _) = round(2001);
    let r: f64 = 0.1;
    let res = point_pick(&m, r, 2.0 * PI * PI).unwrap();
    let exact = 2.0 * PI * (2.0 * r - (2.0 * r).sin());
    assert_abs_diff_eq!(res.sum_ball_volumes, exact, epsilon = 1e-10);
    assert_abs_diff_eq!(res.certificate_rhs, 1e12 * 1e-3 * 2.0 * PI * PI, epsilon = 1e-3);
    assert!(res.certified);
    assert!(res.beyond_proof_range);
    assert!(point_pick(&m, -0.1, 1.0).is_err());
}

#[test]
fn point_pick_avoids_the_bubble() {
    let (m, _) = solved(&FamilySpec::new("bubble").with("A", 2.0).with("delta", 0.1), 1001);
    let res = point_pick(&m, 0.1, m.volume()).unwrap();
    let at_pole = res.scan[0].1;
    assert!(res.sum_ball_volumes <= at_pole);
    assert!(res.scan.iter().all(|s| s.1 >= res.sum_ball_volumes));
}

#[test]
fn discretization_tolerance_has_a_floor() {
    assert_eq!(tol_disc(1e-5), TOL_FLOOR);
    assert_abs_diff_eq!(tol_disc(0.01), 1e-4, epsilon = 1e-18);
}

#[test]
fn weighted_median_splits_ties_at_the_midpoint() {
    assert_eq!(weighted_median(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), 2.0);
    assert_eq!(weighted_median(&[1.0, 3.0], &[1.0, 1.0]), 2.0);
    assert_eq!(weighted_median(&[1.0, 3.0, 10.0], &[1.0, 5.0, 1.0]), 3.0);
    assert_eq!(weighted_median(&[5.0], &[0.0]), 0.0);
}

proptest! {
    #[test]
    fn weighted_median_minimizes_the_l1_gap(
        pairs in prop::collection::vec((-10.0f64..10.0, 0.01f64..5.0), 1..40),
    ) {
        let (v, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let k = weighted_median(&v, &w);
        let best = l1_gap(&v, &w, k);
        // a minimizer of a piecewise-linear convex function sits at a node
        for &c in &v {
            prop_assert!(best <= l1_gap(&v, &w, c) + 1e-9 * (1.0 + best));
        }
    }

    #[test]
    fn sublevel_volume_is_monotone_in_the_level(g1 in 0.0f64..0.99, dg in 0.0f64..0.5, eta in 0.0f64..0.5) {
        let (m, p) = solved(&FamilySpec::new("bump").with("eta", eta), 401);
        let g2 = (g1 + dg).min(0.999);
        let r = PI / 8.0;
        let a = sublevel_round_volume(&m, &p, Pole::North, r, g1).unwrap();
        let b = sublevel_round_volume(&m, &p, Pole::North, r, g2).unwrap();
        prop_assert!(a <= b + 1e-14);
        prop_assert!(b <= round_ball_volume(r) + 1e-12);
    }
}
