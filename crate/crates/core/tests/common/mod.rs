#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::Rng;

use pollregen::parameters::{
    ConditionBounds, ParamAtom, RegenerationMeasure, ScenarioSpec, ServiceDistribution, SwitchingDistribution,
};
use pollregen::rng::{rng_from_seed, SimRng};
use pollregen::routing::RoutingChain;

pub const BOUNDS: (f64, f64) = (0.1, 10.0);

/// Irreducible routing on `d` stations with a guaranteed cycle edge.
pub fn random_chain(d: usize, rng: &mut SimRng) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; d]; d];
    for (i, row) in rows.iter_mut().enumerate() {
        row[(i + 1) % d] = rng.random_range(0.2..1.0);
        for (j, v) in row.iter_mut().enumerate() {
            if j != i && j != (i + 1) % d && rng.random_bool(0.5) {
                *v = rng.random_range(0.0..1.0);
            }
        }
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= sum);
    }
    rows
}

/// An atom inside `BOUNDS` with slope in `(e^-1.5, e^1.5)`.
pub fn random_atom(weight: f64, rng: &mut SimRng) -> ParamAtom {
    loop {
        let lambda1 = rng.random_range(0.2..3.0);
        let mu = rng.random_range(lambda1 + 0.2..9.5);
        let slope = rng.random_range(-1.5f64..1.5).exp();
        let lambda2 = slope * (mu - lambda1);
        if lambda2 > 0.11 && lambda2 < 9.9 {
            let service = if rng.random_bool(0.5) {
                ServiceDistribution::Exponential { rate: mu }
            } else {
                ServiceDistribution::Deterministic { rate: mu }
            };
            return ParamAtom {
                weight,
                service,
                lambda1,
                lambda2,
            };
        }
    }
}

/// Validated scenario with 2..=`max_d` stations and 1..=3 atoms per pair.
pub fn random_spec(seed: u64, max_d: usize, with_switching: bool) -> ScenarioSpec {
    let mut rng = rng_from_seed(seed);
    let d = rng.random_range(2..=max_d);
    let rows = random_chain(d, &mut rng);
    let mut nu = BTreeMap::new();
    let mut switching = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, &pij) in row.iter().enumerate() {
            if pij == 0.0 {
                continue;
            }
            let n = rng.random_range(1..=3);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let atoms = raw.iter().map(|w| random_atom(w / total, &mut rng)).collect();
            nu.insert((i, j), RegenerationMeasure::new(atoms).unwrap());
            if with_switching {
                let mean = rng.random_range(0.0..2.0);
                let law = if rng.random_bool(0.5) {
                    SwitchingDistribution::Deterministic { mean }
                } else {
                    SwitchingDistribution::Exponential { mean }
                };
                switching.insert((i, j), law);
            }
        }
    }
    ScenarioSpec::new(
        RoutingChain::new(rows).unwrap(),
        nu,
        switching,
        ConditionBounds::new(BOUNDS.0, BOUNDS.1).unwrap(),
    )
    .unwrap()
}

pub fn arb_spec() -> impl Strategy<Value = ScenarioSpec> {
    (any::<u64>(), any::<bool>()).prop_map(|(seed, sw)| random_spec(seed, 5, sw))
}

/// Every slope equal to `y`: `mu = 3`, `lambda1 = 1`, `lambda2 = 2 y`.
pub fn constant_slope(y: f64) -> ScenarioSpec {
    let atom = ParamAtom::exponential(1.0, 3.0, 1.0, 2.0 * y);
    let nu = [
        ((0, 1), RegenerationMeasure::single(atom).unwrap()),
        ((1, 0), RegenerationMeasure::single(atom).unwrap()),
    ]
    .into();
    ScenarioSpec::new(
        RoutingChain::cycle(2).unwrap(),
        nu,
        BTreeMap::new(),
        ConditionBounds::new(BOUNDS.0, BOUNDS.1).unwrap(),
    )
    .unwrap()
}

/// Scenario on `rows` with one exponential atom per edge and unit switching.
pub fn with_routing(rows: Vec<Vec<f64>>) -> ScenarioSpec {
    let atom = ParamAtom::exponential(1.0, 3.0, 1.0, 1.5);
    let mut nu = BTreeMap::new();
    let mut switching = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                nu.insert((i, j), RegenerationMeasure::single(atom).unwrap());
                switching.insert((i, j), SwitchingDistribution::Exponential { mean: 1.0 });
            }
        }
    }
    ScenarioSpec::new(
        RoutingChain::new(rows).unwrap(),
        nu,
        switching,
        ConditionBounds::new(BOUNDS.0, BOUNDS.1).unwrap(),
    )
    .unwrap()
}
