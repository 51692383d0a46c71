//! The open-stations routing chain.
//!
//! When the server empties its current station it moves to the other open
//! station `i`, and a new station `j != i` opens with probability `P[i][j]`.
//! The sequence of server locations is therefore a Markov chain on
//! `{0, .., d-1}` with transition matrix `P`.  `P` must be irreducible but is
//! allowed to be periodic (every two-station system has period 2).

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row sums farther than this from 1 are rejected.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Entries at or below this are treated as absent edges.
pub const EDGE_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoutingError {
    #[error("routing matrix needs at least two stations, got {0}")]
    TooFewStations(usize),
    #[error("row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("entry P[{row}][{col}] = {value} is negative or not finite")]
    BadEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("P[{station}][{station}] = {value}: a closing station cannot reopen immediately")]
    SelfLoop { station: usize, value: f64 },
    #[error("routing chain is reducible: station {unreachable} cannot be reached from station {from}")]
    Reducible { from: usize, unreachable: usize },
    #[error("stationary distribution solve failed: {0}")]
    Singular(String),
}

/// Outcome of [`validate`].  `issues` is exhaustive; periodicity is reported
/// but is never an issue.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<RoutingError>,
    /// Period of the chain, when the matrix was square and irreducible.
    pub period: Option<usize>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Validated, immutable routing chain.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct RoutingChain {
    rows: Vec<Vec<f64>>,
    period: usize,
}

impl fmt::Debug for RoutingChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RoutingChain")
            .field("d", &self.rows.len())
            .field("rows", &self.rows)
            .field("period", &self.period)
            .finish()
    }
}

impl RoutingChain {
    /// Validates `rows` and returns the chain, or the first issue found.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, RoutingError> {
        let report = validate(&rows);
        match report.issues.into_iter().next() {
            Some(err) => Err(err),
            None => Ok(Self {
                period: report.period.unwrap_or(1),
                rows,
            }),
        }
    }

    /// Deterministic cycle `0 -> 1 -> .. -> d-1 -> 0`.
    pub fn cycle(d: usize) -> Result<Self, RoutingError> {
        let rows = (0..d)
            .map(|i| {
                let mut row = vec![0.0; d];
                row[(i + 1) % d] = 1.0;
                row
            })
            .collect();
        Self::new(rows)
    }

    pub fn stations(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    #[inline]
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.rows[from][to]
    }

    /// Whether the transition `from -> to` is possible.
    #[inline]
    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.rows[from][to] > EDGE_THRESHOLD
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let d = self.stations();
        DMatrix::from_fn(d, d, |i, j| self.rows[i][j])
    }

    /// Reorders stations so that new station `k` is old station `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, RoutingError> {
        let rows = perm
            .iter()
            .map(|&i| perm.iter().map(|&j| self.rows[i][j]).collect())
            .collect();
        Self::new(rows)
    }
}

impl TryFrom<Vec<Vec<f64>>> for RoutingChain {
    type Error = RoutingError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Self::new(rows)
    }
}

impl From<RoutingChain> for Vec<Vec<f64>> {
    fn from(chain: RoutingChain) -> Self {
        chain.rows
    }
}

/// Checks row-stochasticity, the zero diagonal and irreducibility.
pub fn validate(rows: &[Vec<f64>]) -> ValidationReport {
    let d = rows.len();
    let mut issues = Vec::new();
    if d < 2 {
        issues.push(RoutingError::TooFewStations(d));
        return ValidationReport { issues, period: None };
    }
    let mut square = true;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            issues.push(RoutingError::NotSquare {
                row: i,
                len: row.len(),
                expected: d,
            });
            square = false;
        }
    }
    if !square {
        return ValidationReport { issues, period: None };
    }

    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                issues.push(RoutingError::BadEntry { row: i, col: j, value: v });
            }
        }
        let sum: f64 = row.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            issues.push(RoutingError::NotStochastic { row: i, sum });
        }
        if row[i] != 0.0 {
            issues.push(RoutingError::SelfLoop { station: i, value: row[i] });
        }
    }

    let forward = reachable(rows, 0, false);
    let backward = reachable(rows, 0, true);
    let mut irreducible = true;
    if let Some(k) = forward.iter().position(|&seen| !seen) {
        issues.push(RoutingError::Reducible { from: 0, unreachable: k });
        irreducible = false;
    } else if let Some(k) = backward.iter().position(|&seen| !seen) {
        issues.push(RoutingError::Reducible { from: k, unreachable: 0 });
        irreducible = false;
    }

    let period = irreducible.then(|| period_of(rows));
    ValidationReport { issues, period }
}

fn edge(rows: &[Vec<f64>], i: usize, j: usize) -> bool {
    rows[i][j] > EDGE_THRESHOLD
}

fn reachable(rows: &[Vec<f64>], start: usize, reverse: bool) -> Vec<bool> {
    let d = rows.len();
    let mut seen = vec![false; d];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        for (v, mark) in seen.iter_mut().enumerate() {
            let e = if reverse { edge(rows, v, u) } else { edge(rows, u, v) };
            if e && !*mark {
                *mark = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// gcd over edges `u -> v` of `level(u) + 1 - level(v)` for BFS levels.
fn period_of(rows: &[Vec<f64>]) -> usize {
    let d = rows.len();
    let mut level = vec![usize::MAX; d];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..d {
            if edge(rows, u, v) && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0usize;
    for u in 0..d {
        for v in 0..d {
            if edge(rows, u, v) {
                let diff = (level[u] + 1).abs_diff(level[v]);
                g = gcd(g, diff);
            }
        }
    }
    g.max(1)
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Equilibrium law of the routing chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryLaw {
    pub pi: Vec<f64>,
}

impl StationaryLaw {
    /// `max_j |(pi P)_j - pi_j|`.
    pub fn residual(&self, chain: &RoutingChain) -> f64 {
        let d = chain.stations();
        (0..d)
            .map(|j| {
                let pj: f64 = (0..d).map(|i| self.pi[i] * chain.prob(i, j)).sum();
                (pj - self.pi[j]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves `(P^T - I) pi = 0` with the last equation replaced by `sum(pi) = 1`.
///
/// A direct solve is used because `P` may be periodic.
pub fn stationary_distribution(chain: &RoutingChain) -> Result<StationaryLaw, RoutingError> {
    let d = chain.stations();
    let mut a = chain.to_matrix().transpose() - DMatrix::<f64>::identity(d, d);
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(d);
    b[d - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| RoutingError::Singular("normalized balance equations are singular".into()))?;
    let sum: f64 = x.iter().sum();
    let pi: Vec<f64> = x.iter().map(|v| v / sum).collect();
    if let Some(k) = pi.iter().position(|&v| !(v > 0.0)) {
        return Err(RoutingError::Singular(format!(
            "stationary weight of station {k} is {}",
            pi[k]
        )));
    }
    Ok(StationaryLaw { pi })
}
