use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use llarull_core::ledger::ConstantLedger;
use llarull_core::ClassParams;
use proptest::prelude::*;

fn ledger(v: f64, d: f64, mbar: f64, lambda: f64) -> ConstantLedger {
    ConstantLedger::new(&ClassParams::new(v, d, mbar, lambda).unwrap()).unwrap()
}

#[test]
fn gradient_constants_at_unit_deficit() {
    let l = ledger(40.0, 10.0, 1.0, 1.0);
    assert_abs_diff_eq!(l.c2, 24.0 * PI + 1.5, epsilon = 1e-12);
    assert_abs_diff_eq!(l.c3, 8.0 * PI + 0.5 * l.c2, epsilon = 1e-12);
    assert_abs_diff_eq!(l.c5, 2.0 * l.c_align, epsilon = 1e-12);
    assert_abs_diff_eq!(l.c4, l.c5, epsilon = 1e-12);
    assert_abs_diff_eq!(l.c13, 1e12 * 40.0, epsilon = 1.0);
}

#[test]
fn every_constant_is_traced_and_finite() {
    let l = ledger(40.0, 10.0, 1.0, 1.0);
    assert_eq!(l.entries.len(), 15);
    for e in &l.entries {
        assert!(e.value.is_finite() && e.value > 0.0, "{}", e.name);
        assert!(!e.trace.is_empty());
    }
    assert_eq!(l.get("c6"), Some(l.c6));
    assert_eq!(l.get("c99"), None);
}

#[test]
fn invalid_class_parameters_are_rejected() {
    assert!(ClassParams::new(40.0, 10.0, 1.0, -1.0).is_err());
    assert!(ClassParams::new(40.0, f64::INFINITY, 1.0, 1.0).is_err());
}

proptest! {
    #[test]
    fn constants_grow_with_the_deficit_bound(mbar in 0.01f64..50.0, dm in 0.0f64..10.0) {
        let a = ledger(40.0, 10.0, mbar, 1.0);
        let b = ledger(40.0, 10.0, mbar + dm, 1.0);
        for (x, y) in a.entries.iter().zip(&b.entries) {
            prop_assert!(y.value >= x.value * (1.0 - 1e-12), "{}", x.name);
        }
    }

    #[test]
    fn poincare_constants_shrink_with_the_cheeger_bound(lambda in 0.01f64..5.0, dl in 0.0f64..5.0) {
        let a = ledger(40.0, 10.0, 2.0, lambda);
        let b = ledger(40.0, 10.0, 2.0, lambda + dl);
        prop_assert!(b.c4 <= a.c4 * (1.0 + 1e-12));
        prop_assert!(b.c_cos <= a.c_cos * (1.0 + 1e-12));
        prop_assert!(b.c12 <= a.c12 * (1.0 + 1e-12));
        prop_assert_eq!(a.c2, b.c2);
    }

    #[test]
    fn volume_enters_only_the_late_constants(v in 1.0f64..100.0) {
        let a = ledger(v, 10.0, 1.0, 1.0);
        let b = ledger(2.0 * v, 10.0, 1.0, 1.0);
        prop_assert_eq!(a.c8, b.c8);
        prop_assert!(b.c12 > a.c12);
        prop_assert!((b.c13 - 2.0 * a.c13).abs() <= 1e-3 * a.c13);
    }
}
