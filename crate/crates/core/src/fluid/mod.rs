//! Random vector-field (fluid) model and its Lyapunov functions.
//!
//! In epoch `r` a particle at `(v1, v2)` moves with velocity `(-d1, d2)` until
//! `v1 = 0`; then the components are transposed and the next epoch's field
//! applies.  Fields may be tilted away from the natural one by a fixed angle.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;
use thiserror::Error;

use crate::parameters::{ParamAtom, ScenarioSpec, SlopeLaw, SpectralError, ETA_BOUNDARY_TOLERANCE};
use crate::routing::stationary_distribution;

mod diagnostic;
mod omega;
mod trajectory;

pub use diagnostic::{drift_diagnostic, DriftDiagnostic, ExactDrift};
pub use omega::{EpochField, Omega};
pub use trajectory::{
    advance_trajectory, initial_value, remaining_life, total_time, FluidTotalTime, FluidTrajectory, Stop,
    COEFFICIENT_PRODUCT_FLOOR, EPOCH_CAP, V1_FLOOR,
};

pub const THETA_INIT: f64 = 0.1;
pub const THETA_MIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluidError {
    #[error("tilted angle {angle} leaves (0, pi/2)")]
    TiltOutOfRange { angle: f64 },
    #[error("no admissible tilt down to {0} rad")]
    NoAdmissibleTilt(f64),
    #[error("eta({s}) = {eta} is on the wrong side of 1 for this tilt mode")]
    Precondition { s: f64, eta: f64 },
    #[error("trajectory did not reach the target within {0} epochs")]
    Truncated(usize),
    #[error("epoch {0} has no parameter atom")]
    MissingAtom(usize),
    #[error("epochs are numbered from 1")]
    EpochZero,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// `(-d1, d2)`, written through its two positive speeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftVector {
    pub d1: f64,
    pub d2: f64,
}

impl DriftVector {
    pub fn new(d1: f64, d2: f64) -> Self {
        Self { d1, d2 }
    }

    #[inline]
    pub fn slope(&self) -> f64 {
        self.d2 / self.d1
    }

    pub fn norm(&self) -> f64 {
        self.d1.hypot(self.d2)
    }

    /// Angle between the drift and `-e1`.
    pub fn angle(&self) -> f64 {
        self.d2.atan2(self.d1)
    }
}

/// Mean one-step increment `(lambda1/mu - 1, lambda2/mu)` during service.
pub fn natural_drift(atom: &ParamAtom) -> DriftVector {
    let mu = atom.mu();
    DriftVector::new(1.0 - atom.lambda1 / mu, atom.lambda2 / mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TiltMode {
    Natural,
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldTilt {
    pub mode: TiltMode,
    /// Non-negative; the mode gives the direction.
    pub theta_prime: f64,
}

impl FieldTilt {
    pub const NATURAL: Self = Self {
        mode: TiltMode::Natural,
        theta_prime: 0.0,
    };

    pub fn above(theta_prime: f64) -> Self {
        Self {
            mode: TiltMode::Above,
            theta_prime,
        }
    }

    pub fn below(theta_prime: f64) -> Self {
        Self {
            mode: TiltMode::Below,
            theta_prime,
        }
    }

    /// Signed angle added to the natural one.
    pub fn signed_angle(&self) -> f64 {
        match self.mode {
            TiltMode::Natural => 0.0,
            TiltMode::Above => self.theta_prime,
            TiltMode::Below => -self.theta_prime,
        }
    }

    /// Slope of a field tilted from one of natural slope `y`.
    pub fn tilted_slope(&self, y: f64) -> f64 {
        match self.mode {
            TiltMode::Natural => y,
            _ => (y.atan() + self.signed_angle()).tan(),
        }
    }

    fn admits_slope(&self, y: f64) -> bool {
        let a = y.atan() + self.signed_angle();
        a > 0.0 && a < FRAC_PI_2
    }

    /// Slope law of the tilted field.
    pub fn slope_law(&self, spec: &ScenarioSpec) -> SlopeLaw {
        spec.slope_law().map_slopes(|y| self.tilted_slope(y))
    }

    /// Whether every atom of `spec` stays inside the open quarter turn.
    pub fn is_admissible(&self, spec: &ScenarioSpec) -> bool {
        spec.measures()
            .flat_map(|(_, m)| m.atoms())
            .all(|a| a.slope().is_ok_and(|y| self.admits_slope(y)))
    }
}

/// Rotates `drift` by the tilt, keeping its norm.
pub fn tilt(drift: DriftVector, tilt: FieldTilt) -> Result<DriftVector, FluidError> {
    if tilt.signed_angle() == 0.0 {
        return Ok(drift);
    }
    let angle = drift.angle() + tilt.signed_angle();
    if !(angle > 0.0 && angle < FRAC_PI_2) {
        return Err(FluidError::TiltOutOfRange { angle });
    }
    let r = drift.norm();
    Ok(DriftVector::new(r * angle.cos(), r * angle.sin()))
}

/// Largest `theta' = THETA_INIT / 2^k >= THETA_MIN` whose tilted field keeps
/// every atom inside the quarter turn and `eta(s)` on the natural side of 1.
///
/// `Above` needs `eta(s) < 1` and `Below` needs `eta(s) > 1`, both by more
/// than [`ETA_BOUNDARY_TOLERANCE`].  A `Below`
/// tilt of a field with positive mean log drift also keeps that drift positive.
pub fn find_s_neutral_tilt(spec: &ScenarioSpec, s: f64, mode: TiltMode) -> Result<FieldTilt, FluidError> {
    let chain = spec.chain();
    let eta0 = spec.slope_law().eta(chain, s)?;
    let ok_side = |eta: f64| match mode {
        TiltMode::Above => eta < 1.0 - ETA_BOUNDARY_TOLERANCE,
        TiltMode::Below => eta > 1.0 + ETA_BOUNDARY_TOLERANCE,
        TiltMode::Natural => true,
    };
    if !ok_side(eta0) {
        return Err(FluidError::Precondition { s, eta: eta0 });
    }
    if mode == TiltMode::Natural {
        return Ok(FieldTilt::NATURAL);
    }
    let law = stationary_distribution(chain).map_err(SpectralError::from)?;
    let keep_drift = mode == TiltMode::Below && spec.slope_law().mean_log_drift(chain, &law) > 0.0;
    let mut theta = THETA_INIT;
    while theta >= THETA_MIN {
        let t = FieldTilt { mode, theta_prime: theta };
        if t.is_admissible(spec) {
            let tilted = t.slope_law(spec);
            let drift_ok = !keep_drift || tilted.mean_log_drift(chain, &law) > 0.0;
            if drift_ok && ok_side(tilted.eta(chain, s)?) {
                return Ok(t);
            }
        }
        theta *= 0.5;
    }
    Err(FluidError::NoAdmissibleTilt(THETA_MIN))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_4;

    use super::*;
    use crate::parameters::two_rate_example;

    #[test]
    fn natural_drifts_of_example_atoms() {
        let d = natural_drift(&ParamAtom::exponential(1.0, 2.0, 1.0, 1.0));
        assert_eq!((d.d1, d.d2, d.slope()), (0.5, 0.5, 1.0));
        let d = natural_drift(&ParamAtom::exponential(1.0, 5.0, 1.0, 1.0));
        assert!((d.d1 - 0.8).abs() < 1e-15 && (d.d2 - 0.2).abs() < 1e-15);
        assert!((d.slope() - 0.25).abs() < 1e-15);
        let d = natural_drift(&ParamAtom::exponential(1.0, 1.25, 1.0, 1.0));
        assert!((d.d1 - 0.2).abs() < 1e-15 && (d.d2 - 0.8).abs() < 1e-15);
        assert!((d.slope() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn tilt_rotates() {
        let d = DriftVector::new(1.0, 1.0);
        assert_eq!(tilt(d, FieldTilt::above(0.0)).unwrap(), d);
        assert_eq!(tilt(d, FieldTilt::NATURAL).unwrap(), d);
        let t = tilt(d, FieldTilt::above(std::f64::consts::PI / 12.0)).unwrap();
        assert!((t.norm() - d.norm()).abs() < 1e-12);
        assert!((t.angle() - (FRAC_PI_4 + std::f64::consts::PI / 12.0)).abs() < 1e-12);
        let steep = DriftVector::new(0.2, 0.8);
        assert!(matches!(tilt(steep, FieldTilt::above(0.3)), Err(FluidError::TiltOutOfRange { .. })));
    }

    #[test]
    fn above_tilt_for_example() {
        let spec = two_rate_example(0.3);
        let t = find_s_neutral_tilt(&spec, 0.5, TiltMode::Above).unwrap();
        assert!(t.theta_prime > 0.0);
        // Independent closed form for the tilted two-station chain.
        let y = |v: f64| t.tilted_slope(v);
        let m12 = y(1.0).powf(0.5);
        let m21 = 0.3 * y(4.0).powf(0.5) + 0.7 * y(0.25).powf(0.5);
        assert!((m12 * m21).sqrt() < 1.0);
    }

    #[test]
    fn below_tilt_for_example() {
        let spec = two_rate_example(0.3);
        let t = find_s_neutral_tilt(&spec, 0.7, TiltMode::Below).unwrap();
        let y = |v: f64| t.tilted_slope(v);
        let m12 = y(1.0).powf(0.7);
        let m21 = 0.3 * y(4.0).powf(0.7) + 0.7 * y(0.25).powf(0.7);
        assert!((m12 * m21).sqrt() > 1.0);
        assert_eq!(t.mode, TiltMode::Below);
    }

    #[test]
    fn wrong_side_is_rejected() {
        let spec = two_rate_example(0.3);
        assert!(matches!(
            find_s_neutral_tilt(&spec, 0.7, TiltMode::Above),
            Err(FluidError::Precondition { .. })
        ));
        // eta(0) = 1 exactly.
        assert!(matches!(
            find_s_neutral_tilt(&spec, 0.0, TiltMode::Below),
            Err(FluidError::Precondition { .. })
        ));
    }
}
