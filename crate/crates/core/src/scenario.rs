//! Scenario files.
//!
//! A scenario is a JSON document with stations numbered from 1:
//!
//! ```json
//! {
//!   "stations": 2,
//!   "routing": [[0, 1], [1, 0]],
//!   "regeneration": [
//!     {"from": 1, "to": 2, "atoms": [
//!       {"weight": 1, "service": {"family": "exponential", "rate": 2}, "lambda1": 1, "lambda2": 1}]},
//!     {"from": 2, "to": 1, "atoms": [
//!       {"weight": 0.3, "service": {"family": "exponential", "rate": 1.25}, "lambda1": 1, "lambda2": 1},
//!       {"weight": 0.7, "service": {"family": "exponential", "rate": 5}, "lambda1": 1, "lambda2": 1}]}
//!   ],
//!   "switching": [{"from": 1, "to": 2, "law": {"family": "deterministic", "mean": 1}}],
//!   "bounds": {"m0": 0.1, "M0": 10},
//!   "sweep": {"pair": [2, 1], "atom": 1, "grid": "0.05:0.95:0.05"}
//! }
//! ```
//!
//! `switching` and `sweep` are optional; missing switching entries mean the
//! switch takes no time.  A `description` string is allowed at the top level.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parameters::{
    check_atom, ConditionBounds, ParamAtom, RegenerationMeasure, ScenarioSpec, SwitchingDistribution,
};
use crate::routing::{validate as validate_routing, RoutingChain, RoutingError};

/// Largest number of points a grid may expand to.
pub const MAX_GRID_POINTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub stations: usize,
    pub routing: Vec<Vec<f64>>,
    pub regeneration: Vec<PairMeasure>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub switching: Vec<PairSwitching>,
    pub bounds: ConditionBounds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairMeasure {
    pub from: usize,
    pub to: usize,
    pub atoms: Vec<ParamAtom>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSwitching {
    pub from: usize,
    pub to: usize,
    pub law: SwitchingDistribution,
}

/// Sweeps the weight of one atom; the other atoms of the pair share the
/// remaining mass in their original proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub pair: [usize; 2],
    pub atom: usize,
    pub grid: GridSpec,
}

/// A list of values or a `"start:stop:step"` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range(String),
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>, GridError> {
        match self {
            Self::List(v) => {
                if v.is_empty() {
                    return Err(GridError::Empty);
                }
                if let Some(&x) = v.iter().find(|x| !x.is_finite()) {
                    return Err(GridError::NotFinite(x.to_string()));
                }
                Ok(v.clone())
            }
            Self::Range(s) => parse_grid(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("empty grid")]
    Empty,
    #[error("cannot read {0:?} as a number")]
    NotFinite(String),
    #[error("range {0:?} needs start:stop:step with step > 0 and start <= stop")]
    BadRange(String),
    #[error("grid has more than {MAX_GRID_POINTS} points")]
    TooLong,
}

fn parse_number(s: &str) -> Result<f64, GridError> {
    let t = s.trim();
    t.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| GridError::NotFinite(t.to_string()))
}

/// Rounds to 12 significant digits, so `0.05 + 3 * 0.05` reads as `0.2`.
fn snap(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Reads `"a:b:step"` (inclusive of `b` up to rounding) or `"x,y,z"`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, GridError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(GridError::Empty);
    }
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(GridError::BadRange(text.to_string()));
        }
        let (a, b, step) = (parse_number(parts[0])?, parse_number(parts[1])?, parse_number(parts[2])?);
        if !(step > 0.0 && a <= b) {
            return Err(GridError::BadRange(text.to_string()));
        }
        let span = (b - a) / step;
        if span > MAX_GRID_POINTS as f64 {
            return Err(GridError::TooLong);
        }
        // Tolerate the rounding in decimal steps such as 0.05.
        let n = (span + 1e-9).floor() as usize;
        return Ok((0..=n).map(|k| snap(a + k as f64 * step)).collect());
    }
    let values = text.split(',').map(parse_number).collect::<Result<Vec<_>, _>>()?;
    if values.len() > MAX_GRID_POINTS {
        return Err(GridError::TooLong);
    }
    Ok(values)
}

/// One problem found in a scenario file; positions are as written (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioIssue {
    pub location: String,
    pub message: String,
}

impl fmt::Display for ScenarioIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioFileError {
    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{} problem(s) in scenario; first: {}", .0.len(), .0[0])]
    Invalid(Vec<ScenarioIssue>),
}

/// Parses the JSON text without validating it.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioFileError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ScenarioFileError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: strip_position(&inner),
        }
    })?;
    de.end().map_err(|e| ScenarioFileError::Parse {
        path: ".".to_string(),
        line: e.line(),
        column: e.column(),
        message: strip_position(&e),
    })?;
    Ok(file)
}

/// serde_json appends " at line L column C"; the position is reported separately.
fn strip_position(e: &serde_json::Error) -> String {
    let text = e.to_string();
    let suffix = format!(" at line {} column {}", e.line(), e.column());
    text.strip_suffix(&suffix).unwrap_or(&text).to_string()
}

/// Parses and validates in one go.
pub fn load_scenario(text: &str) -> Result<ScenarioSpec, ScenarioFileError> {
    parse_scenario(text)?.to_spec()
}

fn routing_message(e: &RoutingError) -> String {
    match *e {
        RoutingError::TooFewStations(d) => format!("need at least two stations, got {d}"),
        RoutingError::NotSquare { row, len, expected } => {
            format!("row {} has {len} entries, expected {expected}", row + 1)
        }
        RoutingError::BadEntry { row, col, value } => {
            format!("entry ({}, {}) = {value} is negative or not finite", row + 1, col + 1)
        }
        RoutingError::NotStochastic { row, sum } => format!("row {} sums to {sum}, not 1", row + 1),
        RoutingError::SelfLoop { station, value } => {
            format!("entry ({0}, {0}) = {value}; the diagonal must be zero", station + 1)
        }
        RoutingError::Reducible { from, unreachable } => {
            format!("station {} cannot be reached from station {}", unreachable + 1, from + 1)
        }
        RoutingError::Singular(ref m) => m.clone(),
    }
}

impl ScenarioFile {
    /// Every problem in the file.  Empty means [`Self::to_spec`] succeeds.
    pub fn issues(&self) -> Vec<ScenarioIssue> {
        let mut out = Vec::new();
        let mut push = |location: String, message: String| out.push(ScenarioIssue { location, message });
        let d = self.stations;
        if self.routing.len() != d {
            push(
                "routing".into(),
                format!("{} rows for {d} stations", self.routing.len()),
            );
        }
        let report = validate_routing(&self.routing);
        for e in &report.issues {
            push("routing".into(), routing_message(e));
        }
        let edge = |i: usize, j: usize| {
            self.routing
                .get(i)
                .and_then(|r| r.get(j))
                .is_some_and(|&p| p > crate::routing::EDGE_THRESHOLD)
        };
        let bounds_ok = ConditionBounds::new(self.bounds.m0, self.bounds.upper);
        if let Err(ref e) = bounds_ok {
            push("bounds".into(), e.to_string());
        }
        let in_range = |s: usize| (1..=d).contains(&s);
        let mut seen = BTreeMap::new();
        for (k, pm) in self.regeneration.iter().enumerate() {
            let loc = format!("regeneration[{}] ({} -> {})", k + 1, pm.from, pm.to);
            if !in_range(pm.from) || !in_range(pm.to) {
                push(loc, format!("stations are numbered 1..={d}"));
                continue;
            }
            let (i, j) = (pm.from - 1, pm.to - 1);
            if seen.insert((i, j), k).is_some() {
                push(loc.clone(), "pair listed more than once".into());
            }
            if !edge(i, j) {
                push(loc.clone(), "routing probability of this pair is 0".into());
            }
            if pm.atoms.is_empty() {
                push(loc.clone(), "no atoms".into());
                continue;
            }
            for (a, atom) in pm.atoms.iter().enumerate() {
                let aloc = format!("{loc} atom {}", a + 1);
                if let Err(e) = atom.check() {
                    push(aloc, e.to_string());
                    continue;
                }
                if let Ok(b) = &bounds_ok {
                    let clauses = check_atom(atom, b);
                    if !clauses.is_empty() {
                        let names: Vec<String> = clauses.iter().map(|c| c.to_string()).collect();
                        push(aloc, format!("Condition E fails: {}", names.join(", ")));
                    }
                }
            }
            let total: f64 = pm.atoms.iter().map(|a| a.weight).sum();
            if (total - 1.0).abs() > crate::parameters::WEIGHT_SUM_TOLERANCE {
                push(loc, format!("atom weights sum to {total}, not 1"));
            }
        }
        if report.issues.is_empty() {
            for i in 0..d {
                for j in 0..d {
                    if edge(i, j) && !seen.contains_key(&(i, j)) {
                        push(
                            "regeneration".into(),
                            format!("no measure for pair ({} -> {})", i + 1, j + 1),
                        );
                    }
                }
            }
        }
        let mut seen_sw = BTreeMap::new();
        for (k, ps) in self.switching.iter().enumerate() {
            let loc = format!("switching[{}] ({} -> {})", k + 1, ps.from, ps.to);
            if !in_range(ps.from) || !in_range(ps.to) || ps.from == ps.to {
                push(loc, format!("need two distinct stations in 1..={d}"));
                continue;
            }
            if seen_sw.insert((ps.from, ps.to), k).is_some() {
                push(loc.clone(), "pair listed more than once".into());
            }
            let m = ps.law.mean();
            if !(m.is_finite() && m >= 0.0) {
                push(loc, format!("mean {m} must be finite and non-negative"));
            }
        }
        if let Some(sw) = &self.sweep {
            let [from, to] = sw.pair;
            match self.regeneration.iter().find(|pm| pm.from == from && pm.to == to) {
                None => push("sweep".into(), format!("no regeneration entry for pair ({from} -> {to})")),
                Some(pm) if sw.atom == 0 || sw.atom > pm.atoms.len() => {
                    push("sweep".into(), format!("atom {} out of range 1..={}", sw.atom, pm.atoms.len()))
                }
                Some(_) => {}
            }
            if let Err(e) = sw.grid.values() {
                push("sweep.grid".into(), e.to_string());
            } else if let Ok(v) = sw.grid.values() {
                if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                    push("sweep.grid".into(), format!("weight {x} outside [0, 1]"));
                }
            }
        }
        out
    }

    pub fn to_spec(&self) -> Result<ScenarioSpec, ScenarioFileError> {
        let issues = self.issues();
        if !issues.is_empty() {
            return Err(ScenarioFileError::Invalid(issues));
        }
        let wrap = |message: String| {
            ScenarioFileError::Invalid(vec![ScenarioIssue {
                location: "scenario".into(),
                message,
            }])
        };
        let chain = RoutingChain::new(self.routing.clone()).map_err(|e| wrap(routing_message(&e)))?;
        let mut nu = BTreeMap::new();
        for pm in &self.regeneration {
            let m = RegenerationMeasure::new(pm.atoms.clone()).map_err(|e| wrap(e.to_string()))?;
            nu.insert((pm.from - 1, pm.to - 1), m);
        }
        let switching = self
            .switching
            .iter()
            .map(|ps| ((ps.from - 1, ps.to - 1), ps.law))
            .collect();
        ScenarioSpec::new(chain, nu, switching, self.bounds).map_err(|e| wrap(e.to_string()))
    }

    /// The file describing `spec`, without a sweep.
    pub fn from_spec(spec: &ScenarioSpec) -> Self {
        let regeneration = spec
            .measures()
            .map(|((i, j), m)| PairMeasure {
                from: i + 1,
                to: j + 1,
                atoms: m.atoms().to_vec(),
            })
            .collect();
        let switching = spec
            .switching_entries()
            .map(|((i, j), law)| PairSwitching {
                from: i + 1,
                to: j + 1,
                law,
            })
            .collect();
        Self {
            description: None,
            stations: spec.stations(),
            routing: spec.chain().rows().to_vec(),
            regeneration,
            switching,
            bounds: spec.bounds(),
            sweep: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Copy with the swept atom's weight set to `w`; atoms left with zero
    /// weight are dropped.
    pub fn with_sweep_weight(&self, w: f64) -> Result<Self, ScenarioFileError> {
        let sw = self.sweep.as_ref().ok_or_else(|| {
            ScenarioFileError::Invalid(vec![ScenarioIssue {
                location: "sweep".into(),
                message: "scenario has no sweep section".into(),
            }])
        })?;
        let mut out = self.clone();
        let bad = |message: String| {
            ScenarioFileError::Invalid(vec![ScenarioIssue {
                location: "sweep".into(),
                message,
            }])
        };
        let pm = out
            .regeneration
            .iter_mut()
            .find(|pm| pm.from == sw.pair[0] && pm.to == sw.pair[1])
            .ok_or_else(|| bad(format!("no regeneration entry for pair ({} -> {})", sw.pair[0], sw.pair[1])))?;
        let k = sw.atom.checked_sub(1).filter(|&k| k < pm.atoms.len());
        let k = k.ok_or_else(|| bad(format!("atom {} out of range", sw.atom)))?;
        if !(0.0..=1.0).contains(&w) {
            return Err(bad(format!("weight {w} outside [0, 1]")));
        }
        let rest: f64 = pm.atoms.iter().enumerate().filter(|&(a, _)| a != k).map(|(_, x)| x.weight).sum();
        if pm.atoms.len() > 1 && rest <= 0.0 {
            return Err(bad("other atoms carry no weight to rescale".into()));
        }
        for (a, atom) in pm.atoms.iter_mut().enumerate() {
            atom.weight = if a == k { w } else { atom.weight * (1.0 - w) / rest };
        }
        pm.atoms.retain(|a| a.weight > 0.0);
        Ok(out)
    }
}
