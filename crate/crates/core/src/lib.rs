//! Stability analysis and simulation of polling systems with parameter
//! regeneration.
//!
//! A single server visits `d` stations with exhaustive service while exactly
//! two stations are open.  Whenever a queue empties the service law and the
//! arrival rates are redrawn.  The crate computes the spectral stability
//! criteria of such systems ([`parameters`]), simulates the embedded
//! queue-length chain ([`sim`]), and provides the multiplicative and fluid
//! companion models ([`multiplicative`], [`fluid`]).

// Checks are written as `!(x < bound)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod parameters;
pub mod rng;
pub mod fluid;
pub mod multiplicative;
pub mod routing;
pub mod scenario;
pub mod sim;
pub mod tail;

pub use parameters::{
    classify, critical_exponent, eta, mean_log_drift, two_rate_example, Classification, CriticalExponent, Phase,
    ScenarioSpec,
};
pub use routing::{stationary_distribution, RoutingChain, StationaryLaw};
