//! Hill estimator for the tail index of positive samples.
//!
//! A hitting time whose moments of order `s` exist exactly for `s < s*`
//! typically has a regularly varying tail with index `s*`.  The estimate is
//! reported at three thresholds so that an unstable Hill plot is visible.

use serde::Serialize;
use thiserror::Error;

pub const MIN_SAMPLES: usize = 1_000;
pub const DEFAULT_TOP_FRACTION: f64 = 0.05;
/// Thresholds of the stability check, as fractions of the sample.
pub const STABILITY_FRACTIONS: [f64; 3] = [0.025, 0.05, 0.10];
/// Estimates above this at every threshold indicate a light tail.
pub const NON_HEAVY_CAP: f64 = 5.0;

const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TailError {
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("top fraction {0} outside (0, 0.25]")]
    BadFraction(f64),
    #[error("sample {0} is not positive and finite")]
    BadSample(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HillEstimate {
    pub alpha: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Number of order statistics used.
    pub k: usize,
    pub top_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailIndex {
    pub estimate: HillEstimate,
    /// Estimates at [`STABILITY_FRACTIONS`].
    pub stability: Vec<HillEstimate>,
    /// Set when the estimate climbs as the threshold rises, or stays above
    /// [`NON_HEAVY_CAP`] at every threshold.
    pub non_heavy: bool,
}

fn sorted_descending(samples: &[f64]) -> Result<Vec<f64>, TailError> {
    if samples.len() < MIN_SAMPLES {
        return Err(TailError::TooFewSamples {
            got: samples.len(),
            min: MIN_SAMPLES,
        });
    }
    if let Some(&bad) = samples.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(TailError::BadSample(bad));
    }
    let mut v = samples.to_vec();
    v.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(v)
}

fn hill_sorted(desc: &[f64], top_fraction: f64) -> Result<HillEstimate, TailError> {
    if !(top_fraction > 0.0 && top_fraction <= 0.25) {
        return Err(TailError::BadFraction(top_fraction));
    }
    let k = ((top_fraction * desc.len() as f64).floor() as usize).max(2);
    let threshold = desc[k].ln();
    let mean_excess = desc[..k].iter().map(|x| x.ln() - threshold).sum::<f64>() / k as f64;
    let alpha = 1.0 / mean_excess;
    let half = Z_95 * alpha / (k as f64).sqrt();
    Ok(HillEstimate {
        alpha,
        ci_low: alpha - half,
        ci_high: alpha + half,
        k,
        top_fraction,
    })
}

/// Hill estimate from the largest `top_fraction` of `samples`, with a
/// normal-approximation 95% interval `alpha (1 +- 1.96 / sqrt(k))`.
pub fn hill(samples: &[f64], top_fraction: f64) -> Result<HillEstimate, TailError> {
    hill_sorted(&sorted_descending(samples)?, top_fraction)
}

pub fn tail_index(samples: &[f64], top_fraction: f64) -> Result<TailIndex, TailError> {
    let desc = sorted_descending(samples)?;
    let estimate = hill_sorted(&desc, top_fraction)?;
    let stability = STABILITY_FRACTIONS
        .iter()
        .map(|&f| hill_sorted(&desc, f))
        .collect::<Result<Vec<_>, _>>()?;
    // stability is ordered from the highest threshold to the lowest.
    let rising = stability.windows(2).all(|w| w[0].alpha > w[1].alpha);
    let (top, bottom) = (&stability[0], &stability[stability.len() - 1]);
    let spread = (top.ci_high - top.alpha) + (bottom.ci_high - bottom.alpha);
    let drifts_up = rising && top.alpha - bottom.alpha > spread;
    let above_cap = stability.iter().all(|e| e.alpha > NON_HEAVY_CAP);
    Ok(TailIndex {
        estimate,
        stability,
        non_heavy: drifts_up || above_cap,
    })
}
