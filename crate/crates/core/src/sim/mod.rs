//! Discrete-event simulation of the embedded queue-length chain.
//!
//! The chain is observed just after every service completion and every
//! switch completion; both kinds of event advance the event index `n`.  A run
//! stops at the first `n > 0` with both open queues empty.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;
use thiserror::Error;

use crate::parameters::{ParamAtom, Regenerator, ScenarioSpec, ServiceDistribution, SwitchingDistribution};

mod monte_carlo;

pub use monte_carlo::{monte_carlo_tau, summarize, MonteCarloConfig, MonteCarloReport, TauSummary, TruncatedMoment};

pub const DEFAULT_HORIZON: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("service event with an empty server queue")]
    EmptyServer,
    #[error("switch event while {0} jobs wait at the server")]
    ServerBusy(u64),
    #[error("station {station} out of range for {stations} stations")]
    BadStation { station: usize, stations: usize },
}

/// A law from which a period of time can be drawn.
pub trait DurationLaw {
    fn sample_duration<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
}

impl DurationLaw for ServiceDistribution {
    #[inline]
    fn sample_duration<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample(rng)
    }
}

impl DurationLaw for SwitchingDistribution {
    #[inline]
    fn sample_duration<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample(rng)
    }
}

/// Poisson count with mean `mean`; zero without drawing when `mean` is zero.
#[inline]
pub fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |d| d.sample(rng) as u64)
}

/// Arrivals at rate `lambda` during one period drawn from `dist`.
pub fn arrivals_during<D: DurationLaw, R: Rng + ?Sized>(dist: &D, lambda: f64, rng: &mut R) -> u64 {
    let s = dist.sample_duration(rng);
    poisson_count(lambda * s, rng)
}

/// Arrivals at both open stations during one service time.
#[inline]
pub fn service_arrivals<R: Rng + ?Sized>(atom: &ParamAtom, rng: &mut R) -> (u64, u64) {
    let s = atom.service.sample(rng);
    (poisson_count(atom.lambda1 * s, rng), poisson_count(atom.lambda2 * s, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SimPhase {
    /// The server's queue is empty and the next event is a switch completion.
    Switching,
    Serving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    Service,
    Switch,
}

/// Parameters of the current epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochParams {
    /// Station the server left to start this epoch.
    pub from: usize,
    pub server: usize,
    pub other: usize,
    /// Index of the atom within `nu[server][other]`.
    pub atom_index: usize,
    pub atom: ParamAtom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemState {
    pub epoch: EpochParams,
    /// Jobs at the server's station.
    pub x1: u64,
    /// Jobs at the other open station.
    pub x2: u64,
    /// Epochs begun so far, counting the first.
    pub epoch_index: u64,
    pub event_index: u64,
    pub phase: SimPhase,
}

impl SystemState {
    pub fn is_empty(&self) -> bool {
        self.x1 == 0 && self.x2 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tau {
    Hit(u64),
    Censored(u64),
}

impl Tau {
    /// `min(tau, horizon)`.
    pub fn events(&self) -> u64 {
        match *self {
            Self::Hit(n) | Self::Censored(n) => n,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, Self::Censored(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunResult {
    pub run_id: u64,
    pub tau: Tau,
    pub epochs: u64,
    pub seed: u64,
}

/// Initial queue lengths and the station `I_1` of the first server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InitialCondition {
    pub x1: u64,
    pub x2: u64,
    pub station: usize,
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self { x1: 1, x2: 0, station: 0 }
    }
}

/// Simulator bound to one scenario.
#[derive(Debug, Clone)]
pub struct PollingSim<'a> {
    spec: &'a ScenarioSpec,
    regen: Regenerator,
}

impl<'a> PollingSim<'a> {
    pub fn new(spec: &'a ScenarioSpec) -> Self {
        Self {
            spec,
            regen: Regenerator::new(spec),
        }
    }

    pub fn spec(&self) -> &ScenarioSpec {
        self.spec
    }

    #[inline]
    fn open_epoch<R: Rng + ?Sized>(&self, from: usize, server: usize, rng: &mut R) -> EpochParams {
        let (other, k) = self.regen.draw(server, rng);
        EpochParams {
            from,
            server,
            other,
            atom_index: k,
            atom: *self.regen.atom(server, other, k),
        }
    }

    /// Epoch-1 state: the parameters come from a switch into `init.station`
    /// that takes no time and brings no arrivals.
    pub fn initial_state<R: Rng + ?Sized>(&self, init: InitialCondition, rng: &mut R) -> Result<SystemState, SimError> {
        let d = self.spec.stations();
        if init.station >= d {
            return Err(SimError::BadStation {
                station: init.station,
                stations: d,
            });
        }
        let epoch = self.open_epoch(init.station, init.station, rng);
        Ok(SystemState {
            epoch,
            x1: init.x1,
            x2: init.x2,
            epoch_index: 1,
            event_index: 0,
            phase: if init.x1 > 0 { SimPhase::Serving } else { SimPhase::Switching },
        })
    }

    /// One service completion.
    #[inline]
    pub fn service_event<R: Rng + ?Sized>(&self, state: &SystemState, rng: &mut R) -> Result<SystemState, SimError> {
        if state.x1 == 0 || state.phase != SimPhase::Serving {
            return Err(SimError::EmptyServer);
        }
        let (a1, a2) = service_arrivals(&state.epoch.atom, rng);
        let x1 = state.x1 - 1 + a1;
        Ok(SystemState {
            x1,
            x2: state.x2 + a2,
            event_index: state.event_index + 1,
            phase: if x1 == 0 { SimPhase::Switching } else { SimPhase::Serving },
            ..*state
        })
    }

    /// The server moves to the other open station, a new station opens and
    /// fresh parameters are drawn; arrivals during the switch use the new rates.
    #[inline]
    pub fn switch_event<R: Rng + ?Sized>(&self, state: &SystemState, rng: &mut R) -> Result<SystemState, SimError> {
        if state.x1 != 0 {
            return Err(SimError::ServerBusy(state.x1));
        }
        let (k, i) = (state.epoch.server, state.epoch.other);
        let epoch = self.open_epoch(k, i, rng);
        let duration = self.spec.switching(k, i).sample(rng);
        let x1 = state.x2 + poisson_count(epoch.atom.lambda1 * duration, rng);
        let x2 = poisson_count(epoch.atom.lambda2 * duration, rng);
        Ok(SystemState {
            epoch,
            x1,
            x2,
            epoch_index: state.epoch_index + 1,
            event_index: state.event_index + 1,
            phase: if x1 == 0 { SimPhase::Switching } else { SimPhase::Serving },
        })
    }

    /// Next embedded event, whichever kind the phase calls for.
    #[inline]
    pub fn next_event<R: Rng + ?Sized>(&self, state: &SystemState, rng: &mut R) -> (EventKind, SystemState) {
        match state.phase {
            SimPhase::Serving => (EventKind::Service, self.service_event(state, rng).expect("serving phase has jobs")),
            SimPhase::Switching => (EventKind::Switch, self.switch_event(state, rng).expect("switching phase has no jobs")),
        }
    }

    /// Runs until the empty state or `horizon` events.
    pub fn run_until_empty<R: Rng + ?Sized>(&self, initial: &SystemState, horizon: u64, rng: &mut R) -> (Tau, SystemState) {
        self.run_observed(initial, horizon, rng, |_, _| {})
    }

    /// As [`Self::run_until_empty`], calling `observer` after every event.
    pub fn run_observed<R: Rng + ?Sized>(
        &self,
        initial: &SystemState,
        horizon: u64,
        rng: &mut R,
        mut observer: impl FnMut(EventKind, &SystemState),
    ) -> (Tau, SystemState) {
        let mut state = *initial;
        let start = state.event_index;
        loop {
            let n = state.event_index - start;
            if n >= horizon {
                return (Tau::Censored(horizon), state);
            }
            let (kind, next) = self.next_event(&state, rng);
            state = next;
            observer(kind, &state);
            if state.is_empty() {
                return (Tau::Hit(state.event_index - start), state);
            }
        }
    }

    /// One full replication from `init`.
    pub fn replicate<R: Rng + ?Sized>(
        &self,
        init: InitialCondition,
        horizon: u64,
        rng: &mut R,
    ) -> Result<(Tau, u64), SimError> {
        let s0 = self.initial_state(init, rng)?;
        let (tau, last) = self.run_until_empty(&s0, horizon, rng);
        Ok((tau, last.epoch_index))
    }
}
