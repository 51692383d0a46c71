mod common;

use rand::Rng;

use pollregen::fluid::{
    advance_trajectory, find_s_neutral_tilt, initial_value, remaining_life, total_time, FieldTilt, Omega, Stop,
    TiltMode,
};
use pollregen::multiplicative::{Multiplicative, TotalTimeConfig};
use pollregen::parameters::{classify, two_rate_example, Phase, ScenarioSpec};
use pollregen::rng::{replication_rng, rng_from_seed};

fn natural(spec: &ScenarioSpec, seed: u64) -> Omega {
    Omega::random(spec, FieldTilt::NATURAL, 0, replication_rng(seed, 0)).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

#[test]
fn coefficient_recursions() {
    let mut worst_ratio = 0.0f64;
    for seed in 0..40 {
        let spec = common::random_spec(seed, 4, false);
        if classify(&spec).unwrap().phase == Phase::Transient {
            continue;
        }
        let upper = spec.bounds().upper;
        let mut omega = natural(&spec, seed);
        let tr = advance_trajectory(&mut omega, 1.0, Stop::Epochs(30)).unwrap();
        for r in 0..tr.epochs() {
            let (a, b) = (tr.lyapunov_a[r], tr.lyapunov_b[r]);
            let f = omega.epoch(r + 1).drift;
            let residual = a * f.d1 - b * f.d2 - 1.0;
            assert!(residual.abs() <= 1e-12 * a * f.d1, "seed {seed} epoch {}: {residual}", r + 1);
            if r > 0 {
                assert_eq!(a, tr.lyapunov_b[r - 1]);
            }
            assert!(tr.phi[r] >= 1.0 / upper);
            worst_ratio = worst_ratio.max(a / b).max(b / a);
        }
    }
    // a / b = Y + 1 / (b d1) with b >= 1 and d1 >= m0 / M0.
    assert!(worst_ratio.is_finite() && worst_ratio <= 10.0 + 100.0, "{worst_ratio}");
    println!("largest a/b or b/a: {worst_ratio}");
}

#[test]
fn boundary_positions_follow_slope_products() {
    for seed in 0..200 {
        let spec = common::random_spec(seed, 5, false);
        let x0 = rng_from_seed(seed).random_range(0.1..100.0);
        let tr = advance_trajectory(&mut natural(&spec, seed), x0, Stop::Epochs(60)).unwrap();
        let mut product = 1.0;
        for (r, y) in tr.slopes.iter().enumerate() {
            product *= y;
            assert!(close(tr.boundary_positions[r + 1], x0 * product, 1e-12));
            // g = c_{r+1} v1 at the start of epoch r + 1 stays at x0.
            if r + 1 < tr.epochs() {
                assert!(close(tr.lyapunov_c[r + 1] * tr.boundary_positions[r + 1], x0, 1e-12));
            }
        }
    }
}

#[test]
fn initial_value_is_constant_along_the_flow() {
    for seed in 0..50 {
        let spec = common::random_spec(seed, 4, false);
        let x0 = 3.0;
        let mut omega = natural(&spec, seed);
        let tr = advance_trajectory(&mut omega, x0, Stop::Epochs(12)).unwrap();
        for r in 1..=tr.epochs() {
            let f = omega.epoch(r).drift;
            let v = tr.boundary_positions[r - 1];
            for k in 0..=8 {
                let t = (v / f.d1) * k as f64 / 8.0;
                let g = initial_value(&mut omega, r, (v - f.d1 * t, f.d2 * t)).unwrap();
                assert!(close(g, x0, 1e-10), "seed {seed} epoch {r}: {g}");
            }
        }
    }
}

#[test]
fn times_scale_with_the_start() {
    for seed in 0..50 {
        let spec = common::random_spec(seed, 4, false);
        let one = advance_trajectory(&mut natural(&spec, seed), 1.0, Stop::Epochs(25)).unwrap();
        let c = 7.25;
        let scaled = advance_trajectory(&mut natural(&spec, seed), c, Stop::Epochs(25)).unwrap();
        for (a, b) in one.epoch_times.iter().zip(&scaled.epoch_times) {
            assert!(close(c * a, *b, 1e-12));
        }
        let x = (2.0, 5.0);
        let f = remaining_life(&mut natural(&spec, seed), 1, x, 0.5);
        if let Ok(f) = f {
            let g = remaining_life(&mut natural(&spec, seed), 1, (c * x.0, c * x.1), c * 0.5).unwrap();
            if f.is_finite() {
                assert!(close(c * f, g, 1e-10), "seed {seed}: {f} {g}");
            } else {
                assert_eq!(g, f64::INFINITY);
            }
        }
    }
}

#[test]
fn remaining_life_lower_bound() {
    let spec = two_rate_example(0.3);
    let upper = spec.bounds().upper;
    let mut rng = rng_from_seed(21);
    for k in 0..10_000u64 {
        let x = (rng.random_range(0.0..500.0), rng.random_range(0.0..500.0));
        if x.0 + x.1 < 2.0 {
            continue;
        }
        let mut omega = natural(&spec, k);
        let f = remaining_life(&mut omega, 1, x, 1.0).unwrap();
        assert!(f >= (x.0 + x.1) / upper, "{x:?}: {f}");
    }
}

#[test]
fn product_series_matches_multiplicative_total() {
    for seed in 0..50 {
        let spec = common::random_spec(seed, 4, false);
        if classify(&spec).unwrap().phase == Phase::Transient {
            continue;
        }
        let fluid = total_time(&mut natural(&spec, seed), 1.0, 1e-12, 100_000);
        let chain = Multiplicative::new(&spec);
        let (t, steps) = chain.sample_total_time(&TotalTimeConfig::default(), &mut replication_rng(seed, 0));
        if t.is_truncated() {
            continue;
        }
        assert_eq!(steps as usize, fluid.epochs);
        assert!(close(t.value() - 1.0, fluid.product_series, 1e-12), "{} vs {}", t.value(), fluid.product_series);
    }
}

#[test]
fn empty_time_is_sandwiched_by_the_series() {
    for seed in 0..40 {
        let spec = common::random_spec(seed, 4, false);
        if classify(&spec).unwrap().phase == Phase::Transient {
            continue;
        }
        let mut omega = natural(&spec, seed);
        let x0 = 4.0;
        let tt = total_time(&mut omega, x0, 1e-12, 100_000);
        if tt.t_empty.is_truncated() {
            continue;
        }
        let k = omega
            .drawn()
            .iter()
            .map(|e| (1.0 / e.drift.d2).max(e.drift.d2))
            .fold(1.0, f64::max);
        let t = tt.t_empty.value();
        assert!(x0 / k * tt.product_series < t && t < k * x0 * tt.product_series, "seed {seed}");
    }
}

#[test]
fn transient_below_tilt_escapes() {
    let spec = two_rate_example(0.7);
    let t = find_s_neutral_tilt(&spec, 0.5, TiltMode::Below).unwrap();
    let bound = 1e6;
    let escaped = (0..1_000u64)
        .filter(|&k| {
            let mut omega = Omega::random(&spec, t, 0, replication_rng(33, k)).unwrap();
            let tr = advance_trajectory(&mut omega, 1.0, Stop::Epochs(2_000)).unwrap();
            tr.boundary_positions.iter().any(|&v| v > bound)
        })
        .count();
    assert!(escaped >= 990, "{escaped}");
}
