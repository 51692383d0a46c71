//! Spectral reports and phase tables.

use serde::Serialize;

use pollregen::parameters::{
    classify, eta, eta_prime_at_zero, log_drift, CriticalExponent, Phase, ScenarioSpec,
    SpectralError,
};
use pollregen::routing::stationary_distribution;
use pollregen::sim::{monte_carlo_tau, MonteCarloConfig, SimError};

/// `s*` within this distance of 1 puts the scenario on the boundary between
/// positive and null recurrence.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub pi: Vec<f64>,
    pub log_drift: Vec<f64>,
    pub mean_log_drift: f64,
    /// `(s, eta(s))` on the requested grid.
    pub eta: Vec<(f64, f64)>,
    pub critical_exponent: CriticalExponent,
    pub eta_at_one: f64,
    pub phase: Phase,
    pub note: String,
    pub eta_prime_at_zero: f64,
    /// `|eta'(0) - mean_log_drift|`.
    pub eta_prime_residual: f64,
    /// Set when `s* = 1` (positive/null boundary) or the drift vanishes.
    pub on_boundary: bool,
}

pub fn analyze(spec: &ScenarioSpec, s_grid: &[f64]) -> Result<AnalysisReport, SpectralError> {
    let law = stationary_distribution(spec.chain())?;
    let class = classify(spec)?;
    let etas = s_grid
        .iter()
        .map(|&s| eta(spec, s).map(|e| (s, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let d_eta = eta_prime_at_zero(spec)?;
    let on_boundary = class.phase == Phase::Critical
        || matches!(class.critical_exponent, CriticalExponent::Root(s) if (s - 1.0).abs() < BOUNDARY_TOLERANCE);
    Ok(AnalysisReport {
        log_drift: (0..spec.stations()).map(|i| log_drift(spec, i)).collect(),
        pi: law.pi,
        mean_log_drift: class.mean_log_drift,
        eta: etas,
        critical_exponent: class.critical_exponent,
        eta_at_one: class.eta_at_one,
        phase: class.phase,
        note: class.note().to_string(),
        eta_prime_at_zero: d_eta,
        eta_prime_residual: (d_eta - class.mean_log_drift).abs(),
        on_boundary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub mean_log_drift: f64,
    pub critical_exponent: CriticalExponent,
    pub eta_at_one: f64,
    pub phase: Phase,
    pub censor_fraction: Option<f64>,
    pub hill_index: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// One row per `(p, spec)`, sorted by `p`.  With `sim`, each point is also
/// simulated under that configuration.
pub fn sweep_table(points: &[(f64, ScenarioSpec)], sim: Option<&MonteCarloConfig>) -> Result<Vec<SweepRow>, SweepError> {
    let mut rows = Vec::with_capacity(points.len());
    for (p, spec) in points {
        let class = classify(spec)?;
        let (censor_fraction, hill_index) = match sim {
            Some(cfg) => {
                let report = monte_carlo_tau(spec, cfg)?;
                let hill = report.summary.hill.as_ref().map(|h| h.estimate.alpha);
                (Some(report.summary.censor_fraction), hill)
            }
            None => (None, None),
        };
        rows.push(SweepRow {
            p: *p,
            mean_log_drift: class.mean_log_drift,
            critical_exponent: class.critical_exponent,
            eta_at_one: class.eta_at_one,
            phase: class.phase,
            censor_fraction,
            hill_index,
        });
    }
    rows.sort_by(|a, b| a.p.total_cmp(&b.p));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pollregen::parameters::two_rate_example;

    #[test]
    fn boundary_at_one_fifth() {
        let r = analyze(&two_rate_example(0.2), &[0.5, 1.0]).unwrap();
        assert!(r.on_boundary);
        assert_eq!(r.phase, Phase::NullRecurrent);
        assert!((r.eta[1].1 - 1.0).abs() < 1e-12);
        let r = analyze(&two_rate_example(0.1), &[]).unwrap();
        assert!(!r.on_boundary);
        assert!(r.eta_prime_residual < 1e-4);
    }

    #[test]
    fn rows_are_sorted() {
        let pts: Vec<_> = [0.4, 0.1, 0.7].iter().map(|&p| (p, two_rate_example(p))).collect();
        let rows = sweep_table(&pts, None).unwrap();
        let ps: Vec<f64> = rows.iter().map(|r| r.p).collect();
        assert_eq!(ps, vec![0.1, 0.4, 0.7]);
        assert_eq!(rows[2].phase, Phase::Transient);
        assert!(rows[0].censor_fraction.is_none());
    }
}
