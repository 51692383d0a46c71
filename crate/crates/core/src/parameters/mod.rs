//! Regeneration measures, Condition E and the spectral stability quantities.
//!
//! At every switch the server moves to station `i`, station `j` opens, and the
//! service law together with the arrival rates `(lambda1, lambda2)` are drawn
//! from `nu[i][j]`, a finite mixture of [`ParamAtom`]s.  Each atom has a slope
//! `Y = lambda2 / (mu - lambda1)`: the factor by which the other queue has
//! grown by the time the served one drains.

mod condition;
mod example;
mod regen;
mod spectral;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::routing::{RoutingChain, RoutingError};

pub use condition::{check_atom, validate_condition_e, ConditionClause, ConditionReport, ConditionViolation};
pub use example::two_rate_example;
pub use regen::Regenerator;
pub use spectral::{
    classify, critical_exponent, eta, eta_prime_at_zero, log_drift, mean_log_drift, moment_matrix,
    perron_eigenvalue, product_moment_exact, Classification, CriticalExponent, MomentMatrix,
    PerronEigen, Phase, SlopeLaw, SpectralError, BISECTION_TOLERANCE, CRITICAL_DRIFT_TOLERANCE,
    ETA_BOUNDARY_TOLERANCE, FINITE_DIFFERENCE_STEP, S_MAX,
};

/// Weight sums farther than this from 1 are rejected.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParameterError {
    #[error("service rate {mu} does not exceed lambda1 = {lambda1}; the epoch never ends on average")]
    UnstableEpoch { mu: f64, lambda1: f64 },
    #[error("{what} must be positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("atom weight {0} outside (0, 1]")]
    BadWeight(f64),
    #[error("regeneration measure has no atoms")]
    EmptyMeasure,
    #[error("atom weights sum to {0}, not 1")]
    WeightSum(f64),
    #[error("Condition E bounds need 0 < m0 < M0, got m0 = {m0}, M0 = {upper}")]
    BadBounds { m0: f64, upper: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error("pair ({from}, {to}): {source}")]
    Parameter {
        from: usize,
        to: usize,
        #[source]
        source: ParameterError,
    },
    #[error(transparent)]
    Bounds(ParameterError),
    #[error("station index {0} out of range")]
    StationOutOfRange(usize),
    #[error("no regeneration measure for pair ({0}, {1}) although P[{0}][{1}] > 0")]
    MissingMeasure(usize, usize),
    #[error("regeneration measure given for pair ({0}, {1}) but P[{0}][{1}] = 0")]
    UnexpectedMeasure(usize, usize),
    #[error("{} Condition E violation(s); first: {}", .0.len(), .0[0])]
    ConditionE(Vec<ConditionViolation>),
}

/// Service time law at the server's station.  Both families have mean `1/rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ServiceDistribution {
    Exponential { rate: f64 },
    Deterministic { rate: f64 },
}

impl ServiceDistribution {
    #[inline]
    pub fn rate(&self) -> f64 {
        match *self {
            Self::Exponential { rate } | Self::Deterministic { rate } => rate,
        }
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.rate()
    }

    pub fn second_moment(&self) -> f64 {
        let mu = self.rate();
        match self {
            Self::Exponential { .. } => 2.0 / (mu * mu),
            Self::Deterministic { .. } => 1.0 / (mu * mu),
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
            Self::Deterministic { rate } => 1.0 / rate,
        }
    }
}

/// Law of the time the server needs to move between stations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum SwitchingDistribution {
    #[default]
    Zero,
    Deterministic { mean: f64 },
    Exponential { mean: f64 },
}

impl SwitchingDistribution {
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Deterministic { mean } | Self::Exponential { mean } => mean,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mean() == 0.0
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Deterministic { mean } => mean,
            Self::Exponential { mean } => {
                mean * rng.sample::<f64, _>(Exp1)
            }
        }
    }

    fn check(&self) -> Result<(), ParameterError> {
        match *self {
            Self::Zero => Ok(()),
            Self::Deterministic { mean } | Self::Exponential { mean } => {
                if mean.is_finite() && mean >= 0.0 {
                    Ok(())
                } else {
                    Err(ParameterError::NonPositive { what: "switching mean", value: mean })
                }
            }
        }
    }
}

/// One support point of a regeneration measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamAtom {
    pub weight: f64,
    pub service: ServiceDistribution,
    /// Arrival rate at the server's station.
    pub lambda1: f64,
    /// Arrival rate at the other open station.
    pub lambda2: f64,
}

impl ParamAtom {
    pub fn exponential(weight: f64, mu: f64, lambda1: f64, lambda2: f64) -> Self {
        Self {
            weight,
            service: ServiceDistribution::Exponential { rate: mu },
            lambda1,
            lambda2,
        }
    }

    #[inline]
    pub fn mu(&self) -> f64 {
        self.service.rate()
    }

    /// `lambda2 / (mu - lambda1)`.
    pub fn slope(&self) -> Result<f64, ParameterError> {
        slope(self)
    }

    /// Same atom with every rate multiplied by `factor` (a change of time unit).
    pub fn rescaled(&self, factor: f64) -> Self {
        let service = match self.service {
            ServiceDistribution::Exponential { rate } => ServiceDistribution::Exponential { rate: rate * factor },
            ServiceDistribution::Deterministic { rate } => ServiceDistribution::Deterministic { rate: rate * factor },
        };
        Self {
            weight: self.weight,
            service,
            lambda1: self.lambda1 * factor,
            lambda2: self.lambda2 * factor,
        }
    }

    pub(crate) fn check(&self) -> Result<(), ParameterError> {
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(ParameterError::BadWeight(self.weight));
        }
        for (what, value) in [
            ("service rate", self.mu()),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParameterError::NonPositive { what, value });
            }
        }
        Ok(())
    }
}

/// Slope of the fluid drift for one atom.
pub fn slope(atom: &ParamAtom) -> Result<f64, ParameterError> {
    let mu = atom.mu();
    if !(mu > atom.lambda1) {
        return Err(ParameterError::UnstableEpoch { mu, lambda1: atom.lambda1 });
    }
    Ok(atom.lambda2 / (mu - atom.lambda1))
}

/// Finite mixture `nu_ij` over parameter atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamAtom>", into = "Vec<ParamAtom>")]
pub struct RegenerationMeasure {
    atoms: Vec<ParamAtom>,
}

impl RegenerationMeasure {
    pub fn new(atoms: Vec<ParamAtom>) -> Result<Self, ParameterError> {
        if atoms.is_empty() {
            return Err(ParameterError::EmptyMeasure);
        }
        for atom in &atoms {
            atom.check()?;
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(ParameterError::WeightSum(total));
        }
        Ok(Self { atoms })
    }

    pub fn single(atom: ParamAtom) -> Result<Self, ParameterError> {
        Self::new(vec![ParamAtom { weight: 1.0, ..atom }])
    }

    pub fn atoms(&self) -> &[ParamAtom] {
        &self.atoms
    }
}

impl TryFrom<Vec<ParamAtom>> for RegenerationMeasure {
    type Error = ParameterError;

    fn try_from(atoms: Vec<ParamAtom>) -> Result<Self, Self::Error> {
        Self::new(atoms)
    }
}

impl From<RegenerationMeasure> for Vec<ParamAtom> {
    fn from(m: RegenerationMeasure) -> Self {
        m.atoms
    }
}

/// Condition E constants: `lambda1 + m0 < mu < M0`, `1/M0 < Y <= M0`, and
/// arrival rates in `(m0, M0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionBounds {
    pub m0: f64,
    #[serde(rename = "M0")]
    pub upper: f64,
}

impl ConditionBounds {
    pub fn new(m0: f64, upper: f64) -> Result<Self, ParameterError> {
        if !(m0 > 0.0 && upper > m0 && upper.is_finite()) {
            return Err(ParameterError::BadBounds { m0, upper });
        }
        Ok(Self { m0, upper })
    }
}

/// Complete system description.  Stations are indexed from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    chain: RoutingChain,
    nu: Vec<Vec<Option<RegenerationMeasure>>>,
    switching: Vec<Vec<SwitchingDistribution>>,
    bounds: ConditionBounds,
    slopes: SlopeLaw,
}

impl ScenarioSpec {
    /// Builds a spec and requires every atom to satisfy Condition E.
    pub fn new(
        chain: RoutingChain,
        nu: BTreeMap<(usize, usize), RegenerationMeasure>,
        switching: BTreeMap<(usize, usize), SwitchingDistribution>,
        bounds: ConditionBounds,
    ) -> Result<Self, ScenarioError> {
        let spec = Self::new_unvalidated(chain, nu, switching, bounds)?;
        let report = validate_condition_e(&spec);
        if report.is_ok() {
            Ok(spec)
        } else {
            Err(ScenarioError::ConditionE(report.violations))
        }
    }

    /// Structural checks only: measures present exactly on the edges of `P`
    /// and every slope finite and positive.  Condition E is not enforced.
    pub fn new_unvalidated(
        chain: RoutingChain,
        nu: BTreeMap<(usize, usize), RegenerationMeasure>,
        switching: BTreeMap<(usize, usize), SwitchingDistribution>,
        bounds: ConditionBounds,
    ) -> Result<Self, ScenarioError> {
        ConditionBounds::new(bounds.m0, bounds.upper).map_err(ScenarioError::Bounds)?;
        let d = chain.stations();
        let mut table: Vec<Vec<Option<RegenerationMeasure>>> = vec![vec![None; d]; d];
        for ((i, j), measure) in nu {
            if i >= d || j >= d {
                return Err(ScenarioError::StationOutOfRange(i.max(j)));
            }
            if !chain.has_edge(i, j) {
                return Err(ScenarioError::UnexpectedMeasure(i, j));
            }
            for atom in measure.atoms() {
                slope(atom).map_err(|source| ScenarioError::Parameter { from: i, to: j, source })?;
            }
            table[i][j] = Some(measure);
        }
        for (i, row) in table.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                if chain.has_edge(i, j) && m.is_none() {
                    return Err(ScenarioError::MissingMeasure(i, j));
                }
            }
        }
        let mut sw = vec![vec![SwitchingDistribution::Zero; d]; d];
        for ((i, j), dist) in switching {
            if i >= d || j >= d {
                return Err(ScenarioError::StationOutOfRange(i.max(j)));
            }
            dist.check()
                .map_err(|source| ScenarioError::Parameter { from: i, to: j, source })?;
            sw[i][j] = dist;
        }
        let slopes = SlopeLaw::from_measures(&table);
        Ok(Self {
            chain,
            nu: table,
            switching: sw,
            bounds,
            slopes,
        })
    }

    pub fn stations(&self) -> usize {
        self.chain.stations()
    }

    pub fn chain(&self) -> &RoutingChain {
        &self.chain
    }

    pub fn bounds(&self) -> ConditionBounds {
        self.bounds
    }

    /// `nu[i][j]`, present exactly when `P[i][j] > 0`.
    pub fn measure(&self, i: usize, j: usize) -> Option<&RegenerationMeasure> {
        self.nu[i][j].as_ref()
    }

    /// All defined measures in `(i, j)` order.
    pub fn measures(&self) -> impl Iterator<Item = ((usize, usize), &RegenerationMeasure)> {
        self.nu.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(j, m)| m.as_ref().map(|m| ((i, j), m)))
        })
    }

    /// Switching-time law when the server moves from `from` to `to`.
    pub fn switching(&self, from: usize, to: usize) -> SwitchingDistribution {
        self.switching[from][to]
    }

    /// Non-zero switching laws in `(from, to)` order.
    pub fn switching_entries(&self) -> impl Iterator<Item = ((usize, usize), SwitchingDistribution)> + '_ {
        self.switching.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, s)| !matches!(s, SwitchingDistribution::Zero))
                .map(move |(j, s)| ((i, j), *s))
        })
    }

    /// Natural slope law `Y_ij`.
    pub fn slope_law(&self) -> &SlopeLaw {
        &self.slopes
    }

    /// Same spec with every switching law replaced by `dist`.
    pub fn with_switching(&self, dist: SwitchingDistribution) -> Self {
        let d = self.stations();
        let mut out = self.clone();
        out.switching = vec![vec![dist; d]; d];
        for i in 0..d {
            out.switching[i][i] = SwitchingDistribution::Zero;
        }
        out
    }

    /// Multiplies every service and arrival rate by `factor`.
    pub fn time_rescaled(&self, factor: f64) -> Result<Self, ScenarioError> {
        let nu = self
            .measures()
            .map(|(k, m)| {
                let atoms = m.atoms().iter().map(|a| a.rescaled(factor)).collect();
                RegenerationMeasure::new(atoms)
                    .map(|m| (k, m))
                    .map_err(|source| ScenarioError::Parameter { from: k.0, to: k.1, source })
            })
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        let bounds = ConditionBounds::new(self.bounds.m0 * factor.min(1.0), self.bounds.upper * factor.max(1.0))
            .map_err(ScenarioError::Bounds)?;
        // Shrinking m0 and growing M0 with the factor keeps every clause satisfied.
        Self::new(self.chain.clone(), nu, self.switching_entries().collect(), bounds)
    }

    /// Relabels stations so that new station `k` is old station `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ScenarioError> {
        let mut inverse = vec![0; perm.len()];
        for (k, &old) in perm.iter().enumerate() {
            inverse[old] = k;
        }
        let chain = self.chain.permuted(perm)?;
        let nu = self
            .measures()
            .map(|((i, j), m)| ((inverse[i], inverse[j]), m.clone()))
            .collect();
        let sw = self
            .switching_entries()
            .map(|((i, j), s)| ((inverse[i], inverse[j]), s))
            .collect();
        Self::new(chain, nu, sw, self.bounds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_examples() {
        let y = |mu| slope(&ParamAtom::exponential(1.0, mu, 1.0, 1.0)).unwrap();
        assert_eq!(y(1.25), 4.0);
        assert_eq!(y(5.0), 0.25);
        assert_eq!(y(2.0), 1.0);
    }

    #[test]
    fn slope_rejects_overloaded_epoch() {
        let atom = ParamAtom::exponential(1.0, 1.0, 1.0, 1.0);
        assert_eq!(
            slope(&atom),
            Err(ParameterError::UnstableEpoch { mu: 1.0, lambda1: 1.0 })
        );
    }

    #[test]
    fn service_moments() {
        let e = ServiceDistribution::Exponential { rate: 2.0 };
        let d = ServiceDistribution::Deterministic { rate: 2.0 };
        assert_eq!(e.mean(), 0.5);
        assert_eq!(d.mean(), 0.5);
        assert_eq!(e.second_moment(), 0.5);
        assert_eq!(d.second_moment(), 0.25);
    }

    #[test]
    fn measure_weights_must_sum_to_one() {
        let a = ParamAtom::exponential(0.5, 2.0, 1.0, 1.0);
        assert!(matches!(
            RegenerationMeasure::new(vec![a, a, a]),
            Err(ParameterError::WeightSum(_))
        ));
        assert!(RegenerationMeasure::new(vec![a, a]).is_ok());
        assert_eq!(RegenerationMeasure::new(vec![]), Err(ParameterError::EmptyMeasure));
        let zero = ParamAtom { weight: 0.0, ..a };
        assert_eq!(
            RegenerationMeasure::new(vec![zero, ParamAtom { weight: 1.0, ..a }]),
            Err(ParameterError::BadWeight(0.0))
        );
    }

    #[test]
    fn measures_must_match_routing_edges() {
        let chain = RoutingChain::cycle(3).unwrap();
        let m = RegenerationMeasure::single(ParamAtom::exponential(1.0, 2.0, 1.0, 1.0)).unwrap();
        let bounds = ConditionBounds::new(0.1, 10.0).unwrap();
        let mut nu: BTreeMap<_, _> = [((0, 1), m.clone()), ((1, 2), m.clone())].into();
        assert_eq!(
            ScenarioSpec::new(chain.clone(), nu.clone(), BTreeMap::new(), bounds),
            Err(ScenarioError::MissingMeasure(2, 0))
        );
        nu.insert((2, 0), m.clone());
        nu.insert((0, 2), m);
        assert_eq!(
            ScenarioSpec::new(chain, nu, BTreeMap::new(), bounds),
            Err(ScenarioError::UnexpectedMeasure(0, 2))
        );
    }

    #[test]
    fn bad_bounds() {
        assert!(ConditionBounds::new(1.0, 1.0).is_err());
        assert!(ConditionBounds::new(0.0, 1.0).is_err());
    }
}
