use rayon::prelude::*;
use serde::Serialize;

use super::{InitialCondition, PollingSim, RunResult, SimError, Tau, DEFAULT_HORIZON};
use crate::parameters::ScenarioSpec;
use crate::rng::{derive_seed, rng_from_seed};
use crate::tail::{tail_index, TailIndex, DEFAULT_TOP_FRACTION};

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub initial: InitialCondition,
    pub runs: u64,
    pub horizon: u64,
    pub master_seed: u64,
    /// Orders `s` of the truncated moments `E[min(tau, H)^s]`.
    pub s_grid: Vec<f64>,
    /// Truncation levels `H` of the summary; values above `horizon` are clamped.
    pub summary_horizons: Vec<u64>,
    pub top_fraction: f64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            initial: InitialCondition::default(),
            runs: 1_000,
            horizon: DEFAULT_HORIZON,
            master_seed: 0,
            s_grid: vec![0.5, 1.0],
            summary_horizons: Vec::new(),
            top_fraction: DEFAULT_TOP_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedMoment {
    pub s: f64,
    pub horizon: u64,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauSummary {
    pub runs: u64,
    pub horizon: u64,
    pub censored: u64,
    pub censor_fraction: f64,
    pub moments: Vec<TruncatedMoment>,
    /// Hill estimate over uncensored runs; `None` when there are too few.
    pub hill: Option<TailIndex>,
}

impl TauSummary {
    pub fn moment(&self, s: f64, horizon: u64) -> Option<&TruncatedMoment> {
        self.moments.iter().find(|m| m.s == s && m.horizon == horizon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    /// In `run_id` order.
    pub results: Vec<RunResult>,
    pub summary: TauSummary,
}

/// Independent replications of the hitting time of the empty state.
///
/// Run `k` draws from a generator seeded with `derive_seed(master_seed, k)`,
/// so the results do not depend on the thread count.
pub fn monte_carlo_tau(spec: &ScenarioSpec, cfg: &MonteCarloConfig) -> Result<MonteCarloReport, SimError> {
    let sim = PollingSim::new(spec);
    let d = spec.stations();
    if cfg.initial.station >= d {
        return Err(SimError::BadStation {
            station: cfg.initial.station,
            stations: d,
        });
    }
    let results: Vec<RunResult> = (0..cfg.runs)
        .into_par_iter()
        .map(|run_id| {
            let seed = derive_seed(cfg.master_seed, run_id);
            let mut rng = rng_from_seed(seed);
            let (tau, epochs) = sim.replicate(cfg.initial, cfg.horizon, &mut rng).expect("station checked above");
            RunResult {
                run_id,
                tau,
                epochs,
                seed,
            }
        })
        .collect();
    let summary = summarize(&results, cfg);
    Ok(MonteCarloReport { results, summary })
}

/// Summary statistics, accumulated in `run_id` order.
pub fn summarize(results: &[RunResult], cfg: &MonteCarloConfig) -> TauSummary {
    let mut horizons: Vec<u64> = cfg.summary_horizons.iter().map(|&h| h.min(cfg.horizon)).collect();
    if horizons.is_empty() {
        horizons.push(cfg.horizon);
    }
    let n = results.len() as f64;
    let mut moments = Vec::with_capacity(horizons.len() * cfg.s_grid.len());
    for &h in &horizons {
        for &s in &cfg.s_grid {
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for r in results {
                let v = (r.tau.events().min(h) as f64).powf(s);
                sum += v;
                sum_sq += v * v;
            }
            let (mean, std_error) = if results.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                let mean = sum / n;
                let var = if results.len() > 1 {
                    ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
                } else {
                    0.0
                };
                (mean, (var / n).sqrt())
            };
            moments.push(TruncatedMoment {
                s,
                horizon: h,
                mean,
                std_error,
            });
        }
    }
    let censored = results.iter().filter(|r| r.tau.is_censored()).count() as u64;
    let hits: Vec<f64> = results
        .iter()
        .filter_map(|r| match r.tau {
            Tau::Hit(t) => Some(t as f64),
            Tau::Censored(_) => None,
        })
        .collect();
    TauSummary {
        runs: results.len() as u64,
        horizon: cfg.horizon,
        censored,
        censor_fraction: if results.is_empty() { 0.0 } else { censored as f64 / n },
        moments,
        hill: tail_index(&hits, cfg.top_fraction).ok(),
    }
}
