//! Spectral stability quantities.
//!
//! `L_i = sum_j P_ij E[log Y_ij]` and `M_ij(s) = P_ij E[Y_ij^s]`.  The Perron
//! root `eta(s)` of `M(s)` satisfies `eta(0) = 1`, is log-convex, and has
//! `eta'(0) = sum_i pi_i L_i`.  Moments of the hitting time of the empty state
//! of order `s` exist exactly when `eta(s) < 1`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{RegenerationMeasure, ScenarioSpec};
use crate::routing::{stationary_distribution, RoutingChain, RoutingError, StationaryLaw};

/// Upper end of the bracket searched for the critical exponent.
pub const S_MAX: f64 = 64.0;
/// Absolute tolerance on `s` for the critical-exponent bisection.
pub const BISECTION_TOLERANCE: f64 = 1e-12;
/// Central-difference step for `eta'(0)`.
pub const FINITE_DIFFERENCE_STEP: f64 = 1e-5;
/// `|sum pi_i L_i|` at or below this is classified as critical.
pub const CRITICAL_DRIFT_TOLERANCE: f64 = 1e-12;
/// `|eta(1) - 1|` at or below this counts as the positive/null boundary.
pub const ETA_BOUNDARY_TOLERANCE: f64 = 1e-9;

const POWER_ITERATION_CAP: usize = 100_000;
const POWER_ITERATION_TOLERANCE: f64 = 1e-12;
const SHIFT_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("power iteration did not converge in {iterations} iterations (bracket width {width:e})")]
    NoConvergence { iterations: usize, width: f64 },
    #[error("matrix has no positive entries")]
    ZeroMatrix,
    #[error("moment exponent must be non-negative and finite, got {0}")]
    BadExponent(f64),
    #[error(transparent)]
    Routing(#[from] RoutingError),
}

/// Per ordered pair, the law of `Y_ij` as `(weight, slope)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeLaw {
    pairs: Vec<Vec<Vec<(f64, f64)>>>,
}

impl SlopeLaw {
    pub(crate) fn from_measures(table: &[Vec<Option<RegenerationMeasure>>]) -> Self {
        let pairs = table
            .iter()
            .map(|row| {
                row.iter()
                    .map(|m| match m {
                        Some(m) => m
                            .atoms()
                            .iter()
                            .map(|a| (a.weight, a.lambda2 / (a.mu() - a.lambda1)))
                            .collect(),
                        None => Vec::new(),
                    })
                    .collect()
            })
            .collect();
        Self { pairs }
    }

    /// Builds a law from explicit `(weight, slope)` lists; absent pairs carry no mass.
    pub fn from_pairs(d: usize, entries: impl IntoIterator<Item = ((usize, usize), Vec<(f64, f64)>)>) -> Self {
        let mut pairs = vec![vec![Vec::new(); d]; d];
        for ((i, j), v) in entries {
            pairs[i][j] = v;
        }
        Self { pairs }
    }

    pub fn stations(&self) -> usize {
        self.pairs.len()
    }

    pub fn pair(&self, i: usize, j: usize) -> &[(f64, f64)] {
        &self.pairs[i][j]
    }

    /// Same weights with every slope replaced by `f(slope)`.
    pub fn map_slopes(&self, f: impl Fn(f64) -> f64) -> Self {
        let pairs = self
            .pairs
            .iter()
            .map(|row| {
                row.iter()
                    .map(|atoms| atoms.iter().map(|&(w, y)| (w, f(y))).collect())
                    .collect()
            })
            .collect();
        Self { pairs }
    }

    pub fn min_slope(&self) -> f64 {
        self.slopes().fold(f64::INFINITY, f64::min)
    }

    pub fn max_slope(&self) -> f64 {
        self.slopes().fold(0.0, f64::max)
    }

    fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().flatten().flatten().map(|&(_, y)| y)
    }

    /// `L_i`.
    pub fn log_drift(&self, chain: &RoutingChain, i: usize) -> f64 {
        (0..chain.stations())
            .filter(|&j| chain.has_edge(i, j))
            .map(|j| {
                let e: f64 = self.pairs[i][j].iter().map(|&(w, y)| w * y.ln()).sum();
                chain.prob(i, j) * e
            })
            .sum()
    }

    /// `sum_i pi_i L_i`.
    pub fn mean_log_drift(&self, chain: &RoutingChain, law: &StationaryLaw) -> f64 {
        law.pi
            .iter()
            .enumerate()
            .map(|(i, p)| p * self.log_drift(chain, i))
            .sum()
    }

    /// `M(s)` for any real `s`; negative exponents are used by the
    /// finite-difference derivative.
    pub fn moment_matrix(&self, chain: &RoutingChain, s: f64) -> MomentMatrix {
        let d = chain.stations();
        let m = DMatrix::from_fn(d, d, |i, j| {
            if !chain.has_edge(i, j) {
                return 0.0;
            }
            let e: f64 = self.pairs[i][j].iter().map(|&(w, y)| w * y.powf(s)).sum();
            chain.prob(i, j) * e
        });
        MomentMatrix { s, m }
    }

    pub fn eta(&self, chain: &RoutingChain, s: f64) -> Result<f64, SpectralError> {
        Ok(self.moment_matrix(chain, s).perron()?.eta)
    }

    /// Central difference of `eta` at 0.
    pub fn eta_prime_at_zero(&self, chain: &RoutingChain) -> Result<f64, SpectralError> {
        let h = FINITE_DIFFERENCE_STEP;
        Ok((self.eta(chain, h)? - self.eta(chain, -h)?) / (2.0 * h))
    }

    /// Root of `eta(s) = 1` on `(0, S_MAX]` when the mean log drift is negative.
    pub fn critical_exponent(&self, chain: &RoutingChain) -> Result<CriticalExponent, SpectralError> {
        let law = stationary_distribution(chain)?;
        let drift = self.mean_log_drift(chain, &law);
        if drift >= -CRITICAL_DRIFT_TOLERANCE {
            return Ok(CriticalExponent::NoFiniteRoot);
        }
        if self.eta(chain, S_MAX)? < 1.0 {
            return Ok(CriticalExponent::RootBeyondCap { cap: S_MAX });
        }
        // eta < 1 on (0, s*) and >= 1 beyond, by log-convexity with eta(0) = 1.
        let (mut lo, mut hi) = (0.0, S_MAX);
        while hi - lo > BISECTION_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eta(chain, mid)? < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(CriticalExponent::Root(0.5 * (lo + hi)))
    }
}

/// `M(s) = [P_ij E(Y_ij^s)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    pub s: f64,
    pub m: DMatrix<f64>,
}

impl MomentMatrix {
    pub fn perron(&self) -> Result<PerronEigen, SpectralError> {
        perron_eigenvalue(self)
    }

    /// `u M^n 1` with `u` the indicator of `start`.
    pub fn start_power_sum(&self, start: usize, n: usize) -> f64 {
        let d = self.m.nrows();
        let mut v = DVector::from_element(d, 1.0);
        for _ in 0..n {
            v = &self.m * v;
        }
        v[start]
    }
}

/// Perron root with strictly positive eigenvectors, each normalized to sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronEigen {
    pub eta: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub iterations: usize,
}

/// Power iteration on `M + c I` with `c > 0`, which is primitive even when
/// `M` inherits the period of `P`.
///
/// The Collatz-Wielandt bracket `min_i (Mx)_i / x_i <= eta <= max_i (Mx)_i / x_i`
/// does not depend on `c`; iteration stops once it is narrower than `1e-12`
/// times its upper end.  The shift starts at the geometric mean of the extreme
/// row sums and then follows the geometric mean of the bracket, since `c` near
/// the root damps the periodic eigenvalues fastest.
pub fn perron_eigenvalue(m: &MomentMatrix) -> Result<PerronEigen, SpectralError> {
    let max = m.m.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(SpectralError::ZeroMatrix);
    }
    let sums = m.m.row_iter().map(|r| r.sum());
    let (lo, hi) = sums.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let shift = if lo > 0.0 {
        (0.5 * (lo.ln() + hi.ln())).exp()
    } else {
        SHIFT_FRACTION * max
    };
    let (eta, right, it_r) = shifted_power(&m.m, shift)?;
    let (_, left, it_l) = shifted_power(&m.m.transpose(), shift)?;
    Ok(PerronEigen {
        eta,
        left,
        right,
        iterations: it_r.max(it_l),
    })
}

/// Root of `m` and its normalized eigenvector.
fn shifted_power(m: &DMatrix<f64>, mut shift: f64) -> Result<(f64, Vec<f64>, usize), SpectralError> {
    let d = m.nrows();
    let mut x = DVector::from_element(d, 1.0 / d as f64);
    let mut width = f64::INFINITY;
    for it in 1..=POWER_ITERATION_CAP {
        let mx = m * &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..d {
            let r = mx[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let y = mx + &x * shift;
        let sum: f64 = y.iter().sum();
        x = y / sum;
        width = hi - lo;
        if width <= POWER_ITERATION_TOLERANCE * hi {
            return Ok((0.5 * (lo + hi), x.iter().copied().collect(), it));
        }
        if lo > 0.0 {
            shift = (lo * hi).sqrt();
        }
    }
    Err(SpectralError::NoConvergence {
        iterations: POWER_ITERATION_CAP,
        width,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum CriticalExponent {
    /// `eta(s*) = 1` with `s*` in `(0, S_MAX]`.
    Root(f64),
    /// `eta(s) < 1` throughout `(0, cap]`.
    RootBeyondCap { cap: f64 },
    /// Mean log drift is non-negative, so `eta(s) >= 1` for every `s > 0`.
    NoFiniteRoot,
}

impl CriticalExponent {
    /// The root, `+inf` beyond the cap, `None` when there is no root.
    pub fn value(&self) -> Option<f64> {
        match *self {
            Self::Root(s) => Some(s),
            Self::RootBeyondCap { .. } => Some(f64::INFINITY),
            Self::NoFiniteRoot => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    PositiveRecurrent,
    NullRecurrent,
    Critical,
    Transient,
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Self::PositiveRecurrent => "RECURRENT/POSITIVE",
            Self::NullRecurrent => "RECURRENT/NULL",
            Self::Critical => "CRITICAL",
            Self::Transient => "TRANSIENT",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub phase: Phase,
    pub mean_log_drift: f64,
    pub critical_exponent: CriticalExponent,
    pub eta_at_one: f64,
    /// Whether every switching time is zero.
    pub zero_switching: bool,
}

impl Classification {
    /// Predicted finiteness of `E(tau^s)`: finite for `s < s*`, infinite for
    /// `s >= s*`.  `None` outside the recurrent phases.
    pub fn moment_finite(&self, s: f64) -> Option<bool> {
        match self.phase {
            Phase::PositiveRecurrent | Phase::NullRecurrent => self.critical_exponent.value().map(|r| s < r),
            Phase::Critical | Phase::Transient => None,
        }
    }

    pub fn note(&self) -> &'static str {
        match (self.phase, self.zero_switching) {
            (Phase::Critical, true) => "recurrent only under zero switching; zero switching holds, so tau < inf a.s.",
            (Phase::Critical, false) => "recurrent only under zero switching; switching times are nonzero, undetermined",
            (Phase::Transient, _) => "P(tau = inf) > 0",
            (Phase::PositiveRecurrent, _) => "E(tau) < inf given moment bounds on service and switching times",
            (Phase::NullRecurrent, _) => "tau < inf a.s. but E(tau) = inf",
        }
    }
}

/// `L_i` for station `i`.
pub fn log_drift(spec: &ScenarioSpec, i: usize) -> f64 {
    spec.slope_law().log_drift(spec.chain(), i)
}

/// `sum_i pi_i L_i`.
pub fn mean_log_drift(spec: &ScenarioSpec) -> Result<f64, SpectralError> {
    let law = stationary_distribution(spec.chain())?;
    Ok(spec.slope_law().mean_log_drift(spec.chain(), &law))
}

pub fn moment_matrix(spec: &ScenarioSpec, s: f64) -> Result<MomentMatrix, SpectralError> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(SpectralError::BadExponent(s));
    }
    Ok(spec.slope_law().moment_matrix(spec.chain(), s))
}

/// `eta(s)` for the natural slopes of `spec`.
pub fn eta(spec: &ScenarioSpec, s: f64) -> Result<f64, SpectralError> {
    Ok(moment_matrix(spec, s)?.perron()?.eta)
}

/// Finite-difference `eta'(0)`; a cross-check of [`mean_log_drift`].
pub fn eta_prime_at_zero(spec: &ScenarioSpec) -> Result<f64, SpectralError> {
    spec.slope_law().eta_prime_at_zero(spec.chain())
}

pub fn critical_exponent(spec: &ScenarioSpec) -> Result<CriticalExponent, SpectralError> {
    spec.slope_law().critical_exponent(spec.chain())
}

/// `E[(alpha_1 ... alpha_n)^s]` for the multiplicative chain started at
/// `start`, computed as `u M(s)^n 1`.
pub fn product_moment_exact(spec: &ScenarioSpec, s: f64, n: usize, start: usize) -> Result<f64, SpectralError> {
    Ok(moment_matrix(spec, s)?.start_power_sum(start, n))
}

/// Phase label from the sign of the mean log drift and the position of `eta(1)`.
pub fn classify(spec: &ScenarioSpec) -> Result<Classification, SpectralError> {
    let drift = mean_log_drift(spec)?;
    let critical = critical_exponent(spec)?;
    let eta_at_one = eta(spec, 1.0)?;
    let phase = if drift > CRITICAL_DRIFT_TOLERANCE {
        Phase::Transient
    } else if drift >= -CRITICAL_DRIFT_TOLERANCE {
        Phase::Critical
    } else if eta_at_one < 1.0 - ETA_BOUNDARY_TOLERANCE {
        Phase::PositiveRecurrent
    } else {
        // eta(1) >= 1 (boundary included) means E(tau) = inf.
        Phase::NullRecurrent
    };
    let zero_switching = spec.switching_entries().all(|(_, s)| s.is_zero());
    Ok(Classification {
        phase,
        mean_log_drift: drift,
        critical_exponent: critical,
        eta_at_one,
        zero_switching,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parameters::two_rate_example;

    fn closed_form_eta(p: f64, s: f64) -> f64 {
        (p * 4f64.powf(s) + (1.0 - p) * 4f64.powf(-s)).sqrt()
    }

    #[test]
    fn log_drifts_of_example() {
        let ln2 = std::f64::consts::LN_2;
        let spec = two_rate_example(0.0);
        assert!((log_drift(&spec, 1) + 2.0 * ln2).abs() < 1e-15);
        assert_eq!(log_drift(&spec, 0), 0.0);
        assert!(log_drift(&two_rate_example(0.5), 1).abs() < 1e-15);
    }

    #[test]
    fn mean_log_drift_of_example() {
        let ln2 = std::f64::consts::LN_2;
        let cases = [(0.3, -0.4 * ln2), (0.5, 0.0), (1.0, ln2)];
        for (p, want) in cases {
            let got = mean_log_drift(&two_rate_example(p)).unwrap();
            assert!((got - want).abs() < 1e-14, "p={p}: {got} vs {want}");
        }
    }

    #[test]
    fn moment_matrix_entries() {
        let m = moment_matrix(&two_rate_example(0.2), 1.0).unwrap();
        assert!((m.m[(1, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(m.m[(0, 1)], 1.0);
        let m = moment_matrix(&two_rate_example(0.3), 0.5).unwrap();
        assert!((m.m[(1, 0)] - 0.95).abs() < 1e-15);
        assert_eq!(m.m[(0, 0)], 0.0);
        assert_eq!(m.m[(1, 1)], 0.0);
        assert!(moment_matrix(&two_rate_example(0.3), -1.0).is_err());
    }

    #[test]
    fn moment_matrix_at_zero_is_routing_matrix() {
        let spec = two_rate_example(0.4);
        let m = moment_matrix(&spec, 0.0).unwrap();
        assert_eq!(m.m, spec.chain().to_matrix());
    }

    #[test]
    fn perron_of_example_matches_closed_form() {
        let spec = two_rate_example(0.3);
        let e = moment_matrix(&spec, 0.5).unwrap().perron().unwrap();
        assert!((e.eta - 0.95f64.sqrt()).abs() < 1e-12);
        assert!(e.left.iter().chain(&e.right).all(|&v| v > 0.0));
        assert!((e.right.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for s in [0.1, 1.0, 2.5, 4.0] {
            let got = eta(&spec, s).unwrap();
            assert!((got - closed_form_eta(0.3, s)).abs() < 1e-10);
        }
    }

    #[test]
    fn perron_of_stochastic_matrix_is_one() {
        let e = moment_matrix(&two_rate_example(0.7), 0.0).unwrap().perron().unwrap();
        assert!((e.eta - 1.0).abs() < 1e-12);
        assert!((e.right[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_is_rejected() {
        let m = MomentMatrix { s: 0.0, m: DMatrix::zeros(2, 2) };
        assert_eq!(m.perron(), Err(SpectralError::ZeroMatrix));
    }

    #[test]
    fn eta_prime_tracks_drift() {
        let spec = two_rate_example(0.3);
        let fd = eta_prime_at_zero(&spec).unwrap();
        assert!((fd - mean_log_drift(&spec).unwrap()).abs() < 1e-4);
        assert!(eta_prime_at_zero(&two_rate_example(0.5)).unwrap().abs() < 1e-6);
    }

    #[test]
    fn critical_exponents() {
        let s = |p| critical_exponent(&two_rate_example(p)).unwrap();
        match s(0.2) {
            CriticalExponent::Root(r) => assert!((r - 1.0).abs() < 1e-9, "{r}"),
            other => panic!("{other:?}"),
        }
        match s(0.3) {
            CriticalExponent::Root(r) => {
                let want = (7.0f64 / 3.0).ln() / 4f64.ln();
                assert!((r - want).abs() < 1e-9, "{r} vs {want}");
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(s(0.6), CriticalExponent::NoFiniteRoot);
        assert_eq!(s(0.5), CriticalExponent::NoFiniteRoot);
        assert_eq!(s(0.0), CriticalExponent::RootBeyondCap { cap: S_MAX });
    }

    #[test]
    fn phases_of_example() {
        let phase = |p| classify(&two_rate_example(p)).unwrap().phase;
        assert_eq!(phase(0.0), Phase::PositiveRecurrent);
        assert_eq!(phase(0.1), Phase::PositiveRecurrent);
        assert_eq!(phase(0.2), Phase::NullRecurrent);
        assert_eq!(phase(0.3), Phase::NullRecurrent);
        assert_eq!(phase(0.5), Phase::Critical);
        assert_eq!(phase(0.7), Phase::Transient);
    }

    #[test]
    fn moment_dichotomy_includes_boundary() {
        let c = classify(&two_rate_example(0.2)).unwrap();
        let r = c.critical_exponent.value().unwrap();
        assert_eq!(c.moment_finite(0.5), Some(true));
        assert_eq!(c.moment_finite(r), Some(false));
        assert_eq!(classify(&two_rate_example(0.7)).unwrap().moment_finite(0.1), None);
    }

    #[test]
    fn critical_note_depends_on_switching() {
        use crate::parameters::SwitchingDistribution;
        let spec = two_rate_example(0.5);
        assert!(classify(&spec).unwrap().zero_switching);
        let slow = spec.with_switching(SwitchingDistribution::Deterministic { mean: 1.0 });
        let c = classify(&slow).unwrap();
        assert_eq!(c.phase, Phase::Critical);
        assert!(!c.zero_switching);
        assert!(c.note().contains("undetermined"));
    }
}
