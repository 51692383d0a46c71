//! The multiplicative chain `(I, X)`.
//!
//! From state `(i, x)` the chain waits for time `x`, then jumps to `(j, a x)`
//! where `j ~ P[i][.]` and `a` is a slope drawn from `nu_ij`.  Its total time
//! `T = x0 (1 + a_1 + a_1 a_2 + ...)` mirrors the time the fluid particle needs
//! to reach the origin.

use rand::Rng;
use serde::Serialize;

use crate::parameters::{Regenerator, ScenarioSpec};

pub use crate::tail::{hill, tail_index, HillEstimate, TailError, TailIndex};

pub const DEFAULT_EPS: f64 = 1e-12;
pub const DEFAULT_CAP: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultState {
    pub station: usize,
    pub x: f64,
    pub step: u64,
}

impl MultState {
    pub fn new(station: usize, x: f64) -> Self {
        Self { station, x, step: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TotalTime {
    /// The last term fell below `eps * x0`.
    Converged(f64),
    /// The step cap was reached; carries the partial sum.
    Truncated(f64),
}

impl TotalTime {
    pub fn value(&self) -> f64 {
        match *self {
            Self::Converged(t) | Self::Truncated(t) => t,
        }
    }

    pub fn is_truncated(&self) -> bool {
        matches!(self, Self::Truncated(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalTimeConfig {
    pub x0: f64,
    pub eps: f64,
    pub cap: u64,
    pub start_station: usize,
    /// Level `A` of the hitting time `sigma_A = min{r > 0 : X_r <= A}`.
    pub sigma_level: Option<f64>,
}

impl Default for TotalTimeConfig {
    fn default() -> Self {
        Self {
            x0: 1.0,
            eps: DEFAULT_EPS,
            cap: DEFAULT_CAP,
            start_station: 0,
            sigma_level: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalTimeRecord {
    /// `partials[0] = 0` and `partials[r] = partials[r - 1] + X_{r-1}`, where
    /// `X_0 = x0` is the first holding time.
    pub partials: Vec<f64>,
    pub terminal: TotalTime,
    /// Number of jumps taken.
    pub steps: u64,
    pub steps_to_sigma: Option<u64>,
    /// `eps x0 M0 / (1 - rho)` with `rho` the realized geometric decay rate;
    /// infinite when `rho >= 1`.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub runs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hitting {
    Hit(u64),
    Truncated,
}

/// The chain bound to one scenario.
#[derive(Debug, Clone)]
pub struct Multiplicative<'a> {
    spec: &'a ScenarioSpec,
    regen: Regenerator,
}

impl<'a> Multiplicative<'a> {
    pub fn new(spec: &'a ScenarioSpec) -> Self {
        Self {
            spec,
            regen: Regenerator::new(spec),
        }
    }

    pub fn spec(&self) -> &ScenarioSpec {
        self.spec
    }

    /// One jump; returns the new state and the slope applied.
    #[inline]
    pub fn step_with_slope<R: Rng + ?Sized>(&self, state: &MultState, rng: &mut R) -> (MultState, f64) {
        let (next, k) = self.regen.draw(state.station, rng);
        let alpha = self.regen.slope(state.station, next, k);
        let out = MultState {
            station: next,
            x: state.x * alpha,
            step: state.step + 1,
        };
        (out, alpha)
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &MultState, rng: &mut R) -> MultState {
        self.step_with_slope(state, rng).0
    }

    pub fn run_total_time<R: Rng + ?Sized>(&self, cfg: &TotalTimeConfig, rng: &mut R) -> TotalTimeRecord {
        let mut partials = vec![0.0];
        let (terminal, steps, sigma, last) = self.accumulate(cfg, rng, |t| partials.push(t));
        TotalTimeRecord {
            partials,
            terminal,
            steps,
            steps_to_sigma: sigma,
            tail_bound: self.tail_bound(cfg, last, steps),
        }
    }

    /// Total time without keeping the partial sums.
    pub fn sample_total_time<R: Rng + ?Sized>(&self, cfg: &TotalTimeConfig, rng: &mut R) -> (TotalTime, u64) {
        let (terminal, steps, _, _) = self.accumulate(cfg, rng, |_| {});
        (terminal, steps)
    }

    fn accumulate<R: Rng + ?Sized>(
        &self,
        cfg: &TotalTimeConfig,
        rng: &mut R,
        mut record: impl FnMut(f64),
    ) -> (TotalTime, u64, Option<u64>, f64) {
        assert!(cfg.x0 > 0.0 && cfg.eps > 0.0, "x0 and eps must be positive");
        let floor = cfg.eps * cfg.x0;
        let mut state = MultState::new(cfg.start_station, cfg.x0);
        let mut total = 0.0;
        let mut sigma = None;
        loop {
            total += state.x;
            record(total);
            if state.x < floor {
                return (TotalTime::Converged(total), state.step, sigma, state.x);
            }
            // An overflowed state cannot come back down.
            if state.step >= cfg.cap || !state.x.is_finite() {
                return (TotalTime::Truncated(total), state.step, sigma, state.x);
            }
            state = self.step(&state, rng);
            if sigma.is_none() && cfg.sigma_level.is_some_and(|a| state.x <= a) {
                sigma = Some(state.step);
            }
        }
    }

    fn tail_bound(&self, cfg: &TotalTimeConfig, last: f64, steps: u64) -> f64 {
        if steps == 0 {
            return f64::INFINITY;
        }
        let rho = (last / cfg.x0).powf(1.0 / steps as f64);
        if rho < 1.0 {
            cfg.eps * cfg.x0 * self.spec.bounds().upper / (1.0 - rho)
        } else {
            f64::INFINITY
        }
    }

    /// Monte Carlo mean of `(a_1 ... a_n)^s` from `start`, with its standard error.
    pub fn estimate_product_moment<R: Rng + ?Sized>(
        &self,
        s: f64,
        n: usize,
        runs: u64,
        start: usize,
        rng: &mut R,
    ) -> MomentEstimate {
        assert!(n >= 1 && runs >= 1);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..runs {
            let mut state = MultState::new(start, 1.0);
            for _ in 0..n {
                state = self.step(&state, rng);
            }
            let v = state.x.powf(s);
            sum += v;
            sum_sq += v * v;
        }
        let r = runs as f64;
        let mean = sum / r;
        let var = if runs > 1 {
            ((sum_sq - r * mean * mean) / (r - 1.0)).max(0.0)
        } else {
            0.0
        };
        MomentEstimate {
            mean,
            std_error: (var / r).sqrt(),
            runs,
        }
    }

    /// `sigma_A` from `(start, x0)`, or `Truncated` after `cap` jumps.
    pub fn hitting_time_sigma<R: Rng + ?Sized>(&self, x0: f64, level: f64, cap: u64, start: usize, rng: &mut R) -> Hitting {
        assert!(level > 0.0, "level must be positive");
        let mut state = MultState::new(start, x0);
        while state.step < cap {
            state = self.step(&state, rng);
            if state.x <= level {
                return Hitting::Hit(state.step);
            }
        }
        Hitting::Truncated
    }
}
