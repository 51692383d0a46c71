use std::collections::BTreeMap;

use super::{ConditionBounds, ParamAtom, RegenerationMeasure, ScenarioSpec};
use crate::routing::RoutingChain;

/// Two stations with unit arrival rates everywhere.
///
/// Station 0 (first label) is always served at rate 2.  When the server
/// arrives at station 1 it works at rate 5/4 with probability `p` and at rate
/// 5 otherwise, giving slopes 4 and 1/4.  The recurrence phases are:
/// positive for `p < 1/5`, null for `1/5 <= p < 1/2`, transient for `p > 1/2`.
///
/// Atoms of zero weight are dropped, so `p = 0` and `p = 1` give one-atom
/// measures.  Switching is instantaneous; see [`ScenarioSpec::with_switching`].
///
/// # Panics
/// If `p` is outside `[0, 1]`.
pub fn two_rate_example(p: f64) -> ScenarioSpec {
    assert!((0.0..=1.0).contains(&p), "mixture weight {p} outside [0, 1]");
    let steady = RegenerationMeasure::single(ParamAtom::exponential(1.0, 2.0, 1.0, 1.0)).unwrap();
    let atoms: Vec<ParamAtom> = [(p, 1.25), (1.0 - p, 5.0)]
        .into_iter()
        .filter(|&(w, _)| w > 0.0)
        .map(|(w, mu)| ParamAtom::exponential(w, mu, 1.0, 1.0))
        .collect();
    let mixed = RegenerationMeasure::new(atoms).unwrap();
    let nu: BTreeMap<_, _> = [((0, 1), steady), ((1, 0), mixed)].into();
    ScenarioSpec::new(
        RoutingChain::cycle(2).unwrap(),
        nu,
        BTreeMap::new(),
        ConditionBounds::new(0.1, 10.0).unwrap(),
    )
    .expect("built-in example satisfies Condition E")
}
