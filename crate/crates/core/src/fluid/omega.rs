use serde::Serialize;

use super::{natural_drift, tilt, DriftVector, FieldTilt, FluidError};
use crate::parameters::{ParamAtom, Regenerator, ScenarioSpec};
use crate::rng::SimRng;

/// Field of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochField {
    pub server: usize,
    pub other: usize,
    /// The regenerated parameters, when the epoch was drawn from a scenario.
    pub atom: Option<ParamAtom>,
    pub natural: DriftVector,
    /// The field that moves the particle, possibly tilted.
    pub drift: DriftVector,
    /// `Y = d2 / d1` of `drift`.
    pub slope: f64,
}

impl EpochField {
    /// An epoch given by its drift alone.
    pub fn from_drift(drift: DriftVector) -> Self {
        Self {
            server: 0,
            other: 1,
            atom: None,
            natural: drift,
            drift,
            slope: drift.slope(),
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Periodic,
    Random {
        regen: Regenerator,
        tilt: FieldTilt,
        rng: SimRng,
        server: usize,
    },
}

/// A parameter sequence `omega`, indexed by epoch from 1.
///
/// Random sequences are drawn lazily, one epoch per call of the regenerator,
/// so a sequence seeded like a multiplicative chain sees the same slopes.
#[derive(Debug, Clone)]
pub struct Omega {
    epochs: Vec<EpochField>,
    source: Source,
}

impl Omega {
    /// Epoch `r` uses `pattern[(r - 1) % pattern.len()]`.
    pub fn periodic(pattern: Vec<EpochField>) -> Self {
        assert!(!pattern.is_empty(), "empty epoch pattern");
        Self {
            epochs: pattern,
            source: Source::Periodic,
        }
    }

    pub fn constant(drift: DriftVector) -> Self {
        Self::periodic(vec![EpochField::from_drift(drift)])
    }

    /// Epochs drawn from `spec`, starting with the server at `start`.
    pub fn random(spec: &ScenarioSpec, field_tilt: FieldTilt, start: usize, rng: SimRng) -> Result<Self, FluidError> {
        if !field_tilt.is_admissible(spec) {
            let worst = spec
                .measures()
                .flat_map(|(_, m)| m.atoms())
                .filter_map(|a| a.slope().ok())
                .map(|y| y.atan() + field_tilt.signed_angle())
                .find(|a| !(*a > 0.0 && *a < std::f64::consts::FRAC_PI_2))
                .unwrap_or(f64::NAN);
            return Err(FluidError::TiltOutOfRange { angle: worst });
        }
        assert!(start < spec.stations(), "start station out of range");
        Ok(Self {
            epochs: Vec::new(),
            source: Source::Random {
                regen: Regenerator::new(spec),
                tilt: field_tilt,
                rng,
                server: start,
            },
        })
    }

    /// Field of epoch `r >= 1`.
    pub fn epoch(&mut self, r: usize) -> EpochField {
        assert!(r >= 1, "epochs are numbered from 1");
        match &mut self.source {
            Source::Periodic => self.epochs[(r - 1) % self.epochs.len()],
            Source::Random {
                regen,
                tilt: t,
                rng,
                server,
            } => {
                while self.epochs.len() < r {
                    let (other, k) = regen.draw(*server, rng);
                    let atom = *regen.atom(*server, other, k);
                    let natural = natural_drift(&atom);
                    let drift = tilt(natural, *t).expect("tilt checked on construction");
                    let slope = t.tilted_slope(regen.slope(*server, other, k));
                    self.epochs.push(EpochField {
                        server: *server,
                        other,
                        atom: Some(atom),
                        natural,
                        drift,
                        slope,
                    });
                    *server = other;
                }
                self.epochs[r - 1]
            }
        }
    }

    /// Epochs drawn so far (the pattern, for periodic sequences).
    pub fn drawn(&self) -> &[EpochField] {
        &self.epochs
    }
}
