mod common;

use proptest::prelude::*;

use pollregen::parameters::{
    classify, critical_exponent, eta, eta_prime_at_zero, mean_log_drift, moment_matrix, CriticalExponent, Phase, S_MAX,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eta_at_zero_is_one(spec in common::arb_spec()) {
        prop_assert!((eta(&spec, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_eta_is_convex(spec in common::arb_spec()) {
        let h = 0.25;
        let le = |s: f64| eta(&spec, s).unwrap().ln();
        for k in 1..16 {
            let s = k as f64 * h;
            prop_assert!(le(s) <= 0.5 * (le(s - h) + le(s + h)) + 1e-9, "s = {s}");
        }
    }

    #[test]
    fn eta_slope_at_zero_is_the_drift(spec in common::arb_spec()) {
        let d = eta_prime_at_zero(&spec).unwrap();
        prop_assert!((d - mean_log_drift(&spec).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn moment_matrix_follows_routing(spec in common::arb_spec(), s in 0.0f64..4.0) {
        let m = moment_matrix(&spec, s).unwrap();
        let chain = spec.chain();
        for i in 0..spec.stations() {
            for j in 0..spec.stations() {
                let entry = m.m[(i, j)];
                if chain.prob(i, j) == 0.0 {
                    prop_assert_eq!(entry, 0.0);
                } else {
                    prop_assert!(entry > 0.0);
                }
            }
        }
    }

    #[test]
    fn root_is_a_crossing(spec in common::arb_spec()) {
        if let CriticalExponent::Root(s) = critical_exponent(&spec).unwrap() {
            prop_assert!((eta(&spec, s).unwrap() - 1.0).abs() < 1e-9);
            // eta is above 1 for negative orders.
            prop_assert!(eta(&spec, (s - 0.01).max(0.5 * s)).unwrap() < 1.0);
            prop_assert!(eta(&spec, s + 0.01).unwrap() > 1.0);
        }
    }

    #[test]
    fn time_unit_does_not_matter(spec in common::arb_spec(), factor in 0.5f64..2.0) {
        let scaled = spec.time_rescaled(factor).unwrap();
        let (a, b) = (classify(&spec).unwrap(), classify(&scaled).unwrap());
        prop_assert_eq!(a.phase, b.phase);
        for s in [0.5, 1.0, 2.0] {
            let (x, y) = (eta(&spec, s).unwrap(), eta(&scaled, s).unwrap());
            prop_assert!((x - y).abs() <= 1e-10 * x.max(1.0));
        }
    }

    #[test]
    fn relabelling_keeps_eta(spec in common::arb_spec()) {
        let d = spec.stations();
        let perm: Vec<usize> = (0..d).rev().collect();
        let moved = spec.permuted(&perm).unwrap();
        for s in [0.3, 1.0, 2.5] {
            let (x, y) = (eta(&spec, s).unwrap(), eta(&moved, s).unwrap());
            prop_assert!((x - y).abs() <= 1e-10 * x.max(1.0));
        }
    }
}

#[test]
fn entries_grow_with_s_when_slopes_exceed_one() {
    let spec = common::constant_slope(1.5);
    let mut last = moment_matrix(&spec, 0.0).unwrap().m;
    for k in 1..=20 {
        let m = moment_matrix(&spec, k as f64 * 0.2).unwrap().m;
        for (a, b) in m.iter().zip(last.iter()) {
            assert!(a >= b);
        }
        last = m;
    }
}

#[test]
fn constant_slopes_classify_by_sign_of_log() {
    assert_eq!(classify(&common::constant_slope(0.5)).unwrap().phase, Phase::PositiveRecurrent);
    assert_eq!(classify(&common::constant_slope(2.0)).unwrap().phase, Phase::Transient);
    // eta(s) = 0.5^s < 1 for every s > 0.
    assert_eq!(
        critical_exponent(&common::constant_slope(0.5)).unwrap(),
        CriticalExponent::RootBeyondCap { cap: S_MAX }
    );
    assert_eq!(critical_exponent(&common::constant_slope(2.0)).unwrap(), CriticalExponent::NoFiniteRoot);
    let unit = classify(&common::constant_slope(1.0)).unwrap();
    assert_eq!(unit.phase, Phase::Critical);
}
