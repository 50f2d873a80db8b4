use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use llarull_core::grid::{gauss_legendre, integrate_fn, RadialGrid, Spacing, MIN_NODES};
use proptest::prelude::*;

fn sample(g: &RadialGrid, f: impl Fn(f64) -> f64) -> Vec<f64> {
    g.nodes().iter().map(|&x| f(x)).collect()
}

#[test]
fn rejects_tiny_and_unsorted_grids() {
    assert!(RadialGrid::uniform(MIN_NODES - 1).is_err());
    let mut nodes: Vec<f64> = RadialGrid::uniform(64).unwrap().nodes().to_vec();
    nodes.swap(10, 11);
    assert!(RadialGrid::from_nodes(nodes).is_err());
    let short: Vec<f64> = (0..64).map(|i| i as f64 * 3.0 / 63.0).collect();
    assert!(RadialGrid::from_nodes(short).is_err());
    assert!(RadialGrid::graded(101, 1.0).is_err());
}

#[test]
fn from_nodes_recognizes_uniform_spacing() {
    let g = RadialGrid::from_nodes(RadialGrid::uniform(101).unwrap().nodes().to_vec()).unwrap();
    assert_eq!(g.spacing(), Spacing::Uniform);
    let g = RadialGrid::from_nodes(RadialGrid::graded(101, 0.5).unwrap().nodes().to_vec()).unwrap();
    assert_eq!(g.spacing(), Spacing::Sampled);
}

#[test]
fn simpson_integrals_match_closed_forms() {
    for g in [
        RadialGrid::uniform(201).unwrap(),
        RadialGrid::uniform(200).unwrap(),
        RadialGrid::graded(301, 0.9).unwrap(),
    ] {
        assert_abs_diff_eq!(g.integrate(&sample(&g, f64::sin)), 2.0, epsilon = 1e-7);
        assert_abs_diff_eq!(g.integrate(&sample(&g, |x| x.cos().powi(2))), PI / 2.0, epsilon = 1e-7);
        // 4π ∫ sin² = 2π², the round volume
        let vol = g.integrate(&sample(&g, |x| 4.0 * PI * x.sin().powi(2)));
        assert_abs_diff_eq!(vol, 2.0 * PI * PI, epsilon = 1e-6);
    }
}

#[test]
fn simpson_converges_at_fourth_order() {
    let err = |n| {
        let g = RadialGrid::uniform(n).unwrap();
        (g.integrate(&sample(&g, |x| (x * x).exp() * 0.1)) - 0.1 * erfi_integral()).abs()
    };
    let (e1, e2) = (err(101), err(201));
    let order = (e1 / e2).log2();
    assert!(order > 3.7, "observed order {order}");
}

/// `∫₀^π exp(x²) dx` by a fine Gauss-Legendre rule.
fn erfi_integral() -> f64 {
    integrate_fn(|x| (x * x).exp(), 0.0, PI, 400, &gauss_legendre(8))
}

#[test]
fn positive_part_cuts_at_the_sign_change() {
    let g = RadialGrid::uniform(401).unwrap();
    let c = sample(&g, f64::cos);
    // ∫ cos⁺ sin = ∫₀^{π/2} cos sin = 1/2
    assert_abs_diff_eq!(g.integrate_positive_part(&c, &sample(&g, f64::sin)), 0.5, epsilon = 1e-9);
    assert_abs_diff_eq!(g.integrate_positive_part(&c, &c), PI / 4.0, epsilon = 1e-9);
}

#[test]
fn positive_part_of_a_negative_function_is_zero() {
    let g = RadialGrid::uniform(101).unwrap();
    let neg = vec![-1.0; g.len()];
    assert_eq!(g.integrate_positive_part(&neg, &neg), 0.0);
}

#[test]
fn cumulative_and_partial_integrals() {
    let g = RadialGrid::graded(401, 0.9).unwrap();
    let s = sample(&g, f64::sin);
    let cum = g.cumulative(&s);
    for (x, c) in g.nodes().iter().zip(&cum) {
        assert_abs_diff_eq!(*c, 1.0 - x.cos(), epsilon = 1e-8);
    }
    let part = g.integrate_between(&s, &cum, 0.3, 1.7);
    assert_abs_diff_eq!(part, 0.3f64.cos() - 1.7f64.cos(), epsilon = 1e-8);
}

#[test]
fn interpolation_and_derivative_are_fourth_order_accurate() {
    let g = RadialGrid::uniform(801).unwrap();
    let s = sample(&g, f64::sin);
    for x in [0.0123, 1.0, 2.5, 3.1] {
        assert_abs_diff_eq!(g.interpolate(&s, x), x.sin(), epsilon = 1e-10);
    }
    let d = g.derivative(&s);
    for (x, d) in g.nodes().iter().zip(&d) {
        assert_abs_diff_eq!(*d, x.cos(), epsilon = 1e-8);
    }
}

#[test]
fn graded_step_gives_the_requested_widest_cell() {
    let g = RadialGrid::graded_with_step(PI / 500.0, 0.0).unwrap();
    assert_eq!(g.len(), 501);
    for k in [500.0, 1000.0] {
        let h = PI / k;
        let g = RadialGrid::graded_with_step(h, 0.9).unwrap();
        assert!(g.max_step() <= h * (1.0 + 1e-12));
        let fewer = RadialGrid::graded(g.len() - 1, 0.9).unwrap();
        assert!(fewer.max_step() > h);
    }
}

#[test]
fn gauss_legendre_integrates_polynomials_exactly() {
    let rule = gauss_legendre(4);
    // degree 7 is the exactness limit of four nodes
    let v = integrate_fn(|x| x.powi(7) + x.powi(2), 0.0, 1.0, 1, &rule);
    assert_abs_diff_eq!(v, 1.0 / 8.0 + 1.0 / 3.0, epsilon = 1e-14);
}

proptest! {
    #[test]
    fn integration_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, n in 40usize..300) {
        let g = RadialGrid::uniform(n).unwrap();
        let f = sample(&g, f64::sin);
        let h = sample(&g, |x| x * x);
        let mix: Vec<f64> = f.iter().zip(&h).map(|(f, h)| a * f + b * h).collect();
        let lhs = g.integrate(&mix);
        let rhs = a * g.integrate(&f) + b * g.integrate(&h);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn interpolation_reproduces_nodes(n in 40usize..200, kappa in 0.0f64..0.95, k in 0usize..1000) {
        let g = RadialGrid::graded(n, kappa).unwrap();
        let v = sample(&g, |x| (3.0 * x).cos() + x);
        let i = k % n;
        let x = g.nodes()[i];
        prop_assert!((g.interpolate(&v, x) - v[i]).abs() < 1e-12);
    }

    #[test]
    fn graded_grids_span_zero_to_pi(n in 33usize..500, kappa in 0.0f64..0.99) {
        let g = RadialGrid::graded(n, kappa).unwrap();
        prop_assert_eq!(g.nodes()[0], 0.0);
        prop_assert_eq!(g.nodes()[n - 1], PI);
        prop_assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn positive_part_never_exceeds_the_absolute_integral(shift in -1.0f64..1.0) {
        let g = RadialGrid::uniform(201).unwrap();
        let v = sample(&g, |x| x.cos() + shift);
        let ones = vec![1.0; v.len()];
        let pos = g.integrate_positive_part(&v, &ones);
        let abs: Vec<f64> = v.iter().map(|v| v.abs()).collect();
        prop_assert!(pos >= 0.0);
        prop_assert!(pos <= g.integrate(&abs) + 1e-6);
    }
}
