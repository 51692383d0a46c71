mod common;

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};

use pollregen::parameters::{two_rate_example, ServiceDistribution};
use pollregen::rng::rng_from_seed;
use pollregen::sim::{arrivals_during, EventKind, InitialCondition, PollingSim, SystemState};

fn params_hash(s: &SystemState) -> u64 {
    let e = &s.epoch;
    let mut h = DefaultHasher::new();
    (e.from, e.server, e.other, e.atom_index).hash(&mut h);
    for v in [e.atom.mu(), e.atom.lambda1, e.atom.lambda2, e.atom.weight] {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

#[test]
fn queue_and_epoch_invariants() {
    for seed in 0..30 {
        let spec = common::random_spec(seed, 4, true);
        let sim = PollingSim::new(&spec);
        let mut rng = rng_from_seed(seed);
        let init = InitialCondition { x1: 5, x2: 2, station: 0 };
        let s0 = sim.initial_state(init, &mut rng).unwrap();
        let mut prev = s0;
        let mut epoch_hash = params_hash(&s0);
        sim.run_observed(&s0, 20_000, &mut rng, |kind, s| {
            assert!(s.x1 + 1 >= prev.x1, "x1 fell from {} to {}", prev.x1, s.x1);
            match kind {
                EventKind::Service => {
                    assert_eq!(s.epoch_index, prev.epoch_index);
                    assert_eq!(params_hash(s), epoch_hash);
                }
                EventKind::Switch => {
                    assert_eq!(prev.x1, 0);
                    assert_eq!(s.epoch_index, prev.epoch_index + 1);
                    assert_eq!(s.epoch.server, prev.epoch.other);
                    epoch_hash = params_hash(s);
                }
            }
            assert_eq!(s.event_index, prev.event_index + 1);
            prev = *s;
        });
    }
}

#[test]
fn epochs_last_at_least_their_starting_queue() {
    let spec = two_rate_example(0.3);
    let sim = PollingSim::new(&spec);
    let mut rng = rng_from_seed(3);
    for _ in 0..200 {
        let s0 = sim.initial_state(InitialCondition { x1: 20, x2: 0, station: 0 }, &mut rng).unwrap();
        let mut start_queue = s0.x1;
        let mut services = 0u64;
        sim.run_observed(&s0, 100_000, &mut rng, |kind, s| match kind {
            EventKind::Service => services += 1,
            EventKind::Switch => {
                assert!(services >= start_queue, "{services} < {start_queue}");
                start_queue = s.x1;
                services = 0;
            }
        });
    }
}

#[test]
fn server_moves_follow_routing() {
    let rows = vec![vec![0.0, 0.2, 0.8], vec![0.5, 0.0, 0.5], vec![0.9, 0.1, 0.0]];
    let spec = common::with_routing(rows.clone());
    let sim = PollingSim::new(&spec);
    let mut rng = rng_from_seed(8);
    let mut state = sim.initial_state(InitialCondition::default(), &mut rng).unwrap();
    let mut counts = [[0u64; 3]; 3];
    let mut visits = [0u64; 3];
    let mut switches = 0;
    while switches < 100_000 {
        let from = state.epoch.server;
        let (kind, next) = sim.next_event(&state, &mut rng);
        if kind == EventKind::Switch {
            counts[from][next.epoch.server] += 1;
            visits[from] += 1;
            switches += 1;
        }
        state = next;
    }
    for i in 0..3 {
        for j in 0..3 {
            let n = visits[i] as f64;
            let p = rows[i][j];
            let sd = (n * p * (1.0 - p)).sqrt();
            assert!((counts[i][j] as f64 - n * p).abs() <= 3.0 * sd.max(1e-9), "{i}->{j}: {} of {n}", counts[i][j]);
        }
    }
}

#[test]
fn service_increments_match_drift_per_atom() {
    let spec = two_rate_example(0.3);
    let sim = PollingSim::new(&spec);
    let mut rng = rng_from_seed(12);
    // (server, other, atom) -> increments of (x1, x2)
    let mut samples: BTreeMap<(usize, usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
    let init = InitialCondition { x1: 1, x2: 0, station: 0 };
    let mut state = sim.initial_state(init, &mut rng).unwrap();
    let mut n = 0;
    while n < 300_000 {
        // Without switching time the empty state never refills.
        if state.is_empty() {
            state = sim.initial_state(init, &mut rng).unwrap();
        }
        let (kind, next) = sim.next_event(&state, &mut rng);
        if kind == EventKind::Service {
            let key = (state.epoch.server, state.epoch.other, state.epoch.atom_index);
            let d = (next.x1 as f64 - state.x1 as f64, next.x2 as f64 - state.x2 as f64);
            samples.entry(key).or_default().push(d);
            n += 1;
        }
        state = next;
    }
    assert_eq!(samples.len(), 3);
    for ((i, j, k), xs) in &samples {
        let atom = spec.measure(*i, *j).unwrap().atoms()[*k];
        let want = (atom.lambda1 / atom.mu() - 1.0, atom.lambda2 / atom.mu());
        let m = xs.len() as f64;
        for (c, target) in [(0, want.0), (1, want.1)] {
            let vals: Vec<f64> = xs.iter().map(|v| if c == 0 { v.0 } else { v.1 }).collect();
            let mean = vals.iter().sum::<f64>() / m;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
            let se = (var / m).sqrt();
            assert!((mean - target).abs() <= 3.0 * se, "({i},{j}) atom {k} coord {c}: {mean} vs {target}");
        }
    }
}

#[test]
fn same_seed_same_trace() {
    let spec = common::random_spec(77, 4, true);
    let sim = PollingSim::new(&spec);
    let trace = |seed| {
        let mut rng = rng_from_seed(seed);
        let s0 = sim.initial_state(InitialCondition { x1: 10, x2: 3, station: 1 }, &mut rng).unwrap();
        let mut out = Vec::new();
        sim.run_observed(&s0, 50_000, &mut rng, |k, s| out.push((k, *s)));
        out
    };
    assert_eq!(trace(5), trace(5));
    assert_ne!(trace(5), trace(6));
}

#[test]
fn exponential_service_arrivals_are_geometric() {
    let (mu, lambda) = (2.0, 1.5);
    let q = lambda / (lambda + mu);
    let n = 200_000u64;
    let bins = 12;
    let mut rng = rng_from_seed(4);
    let mut hist: HashMap<usize, u64> = HashMap::new();
    let dist = ServiceDistribution::Exponential { rate: mu };
    for _ in 0..n {
        let k = arrivals_during(&dist, lambda, &mut rng) as usize;
        *hist.entry(k.min(bins)).or_default() += 1;
    }
    let mut chi2 = 0.0;
    for k in 0..=bins {
        let p = if k < bins { (1.0 - q) * q.powi(k as i32) } else { q.powi(bins as i32) };
        let expected = n as f64 * p;
        let observed = *hist.get(&k).unwrap_or(&0) as f64;
        chi2 += (observed - expected).powi(2) / expected;
    }
    // 12 degrees of freedom; the 0.999 quantile is 32.9.
    assert!(chi2 < 32.9, "chi-square {chi2}");
}

#[test]
fn zero_switching_hands_over_without_arrivals() {
    let spec = two_rate_example(0.3);
    assert!(spec.switching(0, 1).is_zero());
    let sim = PollingSim::new(&spec);
    let mut rng = rng_from_seed(1);
    let s0 = sim.initial_state(InitialCondition { x1: 4, x2: 0, station: 0 }, &mut rng).unwrap();
    let mut prev = s0;
    sim.run_observed(&s0, 10_000, &mut rng, |kind, s| {
        if kind == EventKind::Switch {
            assert_eq!((s.x1, s.x2), (prev.x2, 0));
        }
        prev = *s;
    });
}
