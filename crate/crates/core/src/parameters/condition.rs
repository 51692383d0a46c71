use std::fmt;

use super::{ConditionBounds, ParamAtom, ScenarioSpec};

/// The clause of Condition E an atom fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConditionClause {
    /// `lambda1 + m0 < mu` fails: the server does not drain fast enough.
    ServiceAboveLoad,
    /// `mu < M0` fails.
    ServiceBelowCap,
    /// `Y > 1/M0` fails, i.e. `F_ij(1/M0) > 0`.
    SlopeAboveFloor,
    /// `Y <= M0` fails, i.e. `F_ij(M0) < 1`.
    SlopeBelowCap,
    /// An arrival rate lies outside `(m0, M0)`.
    ArrivalRateRange,
}

impl fmt::Display for ConditionClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ServiceAboveLoad => "lambda1 + m0 < mu",
            Self::ServiceBelowCap => "mu < M0",
            Self::SlopeAboveFloor => "F_ij(1/M0) = 0 (slope > 1/M0)",
            Self::SlopeBelowCap => "F_ij(M0) = 1 (slope <= M0)",
            Self::ArrivalRateRange => "m0 < lambda < M0",
        })
    }
}

/// Indices are 0-based; the display is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionViolation {
    pub from: usize,
    pub to: usize,
    pub atom: usize,
    pub clauses: Vec<ConditionClause>,
}

impl fmt::Display for ConditionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "pair ({}, {}) atom {} violates ",
            self.from + 1,
            self.to + 1,
            self.atom + 1
        )?;
        for (k, c) in self.clauses.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConditionReport {
    pub violations: Vec<ConditionViolation>,
}

impl ConditionReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every clause of Condition E that `atom` fails under `bounds`.
pub fn check_atom(atom: &ParamAtom, bounds: &ConditionBounds) -> Vec<ConditionClause> {
    let ConditionBounds { m0, upper } = *bounds;
    let mu = atom.mu();
    let mut out = Vec::new();
    if !(atom.lambda1 + m0 < mu) {
        out.push(ConditionClause::ServiceAboveLoad);
    }
    if !(mu < upper) {
        out.push(ConditionClause::ServiceBelowCap);
    }
    // A non-positive denominator means an unbounded slope.
    let y = if mu > atom.lambda1 {
        atom.lambda2 / (mu - atom.lambda1)
    } else {
        f64::INFINITY
    };
    if !(y > 1.0 / upper) {
        out.push(ConditionClause::SlopeAboveFloor);
    }
    if !(y <= upper) {
        out.push(ConditionClause::SlopeBelowCap);
    }
    let in_range = |l: f64| l > m0 && l < upper;
    if !(in_range(atom.lambda1) && in_range(atom.lambda2)) {
        out.push(ConditionClause::ArrivalRateRange);
    }
    out
}

/// Checks every atom of every `nu_ij`, one violation record per failing atom.
pub fn validate_condition_e(spec: &ScenarioSpec) -> ConditionReport {
    let bounds = spec.bounds();
    let violations = spec
        .measures()
        .flat_map(|((i, j), m)| {
            m.atoms().iter().enumerate().filter_map(move |(k, atom)| {
                let clauses = check_atom(atom, &bounds);
                (!clauses.is_empty()).then_some(ConditionViolation {
                    from: i,
                    to: j,
                    atom: k,
                    clauses,
                })
            })
        })
        .collect();
    ConditionReport { violations }
}
