use rand::Rng;
use serde::Serialize;

use super::{advance_trajectory, FluidError, Omega, Stop};
use crate::multiplicative::MomentEstimate;
use crate::sim::service_arrivals;

/// Exact one-step drifts of `f` and `g` during service in epoch `epoch`.
///
/// The coefficients come from the field of `omega` (possibly tilted); the
/// queue increments have the natural mean `(-d1, d2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactDrift {
    pub epoch: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub c_next: f64,
    pub phi: f64,
    /// `-a_r d1 + b_r d2` under the natural field.
    pub f_drift: f64,
    /// `-c_r d1 + c_{r+1} d2` under the natural field.
    pub g_drift: f64,
}

impl ExactDrift {
    /// Exact drifts for epochs `1..=n`.
    pub fn along(omega: &mut Omega, n: usize) -> Result<Vec<Self>, FluidError> {
        let tr = advance_trajectory(omega, 1.0, Stop::Epochs(n))?;
        let mut out = Vec::with_capacity(tr.epochs());
        for r in 0..tr.epochs() {
            let nat = omega.epoch(r + 1).natural;
            let (a, b, c) = (tr.lyapunov_a[r], tr.lyapunov_b[r], tr.lyapunov_c[r]);
            let c_next = c / tr.slopes[r];
            out.push(Self {
                epoch: r + 1,
                a,
                b,
                c,
                c_next,
                phi: tr.phi[r],
                f_drift: -a * nat.d1 + b * nat.d2,
                g_drift: -c * nat.d1 + c_next * nat.d2,
            });
        }
        Ok(out)
    }

    /// Largest `eps1` with `f_drift <= -eps1 phi_r` at every epoch.
    pub fn eps1(drifts: &[Self]) -> f64 {
        drifts.iter().map(|d| -d.f_drift / d.phi).fold(f64::INFINITY, f64::min)
    }

    /// Largest `eps2` with `g_drift >= eps2 c_r` at every epoch.
    pub fn eps2(drifts: &[Self]) -> f64 {
        drifts.iter().map(|d| d.g_drift / d.c).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftDiagnostic {
    pub exact: ExactDrift,
    pub mc_f: MomentEstimate,
    pub mc_g: MomentEstimate,
    /// Mean of the squared increment of `g`.
    pub mc_g_sq: MomentEstimate,
}

fn estimate(sum: f64, sum_sq: f64, runs: u64) -> MomentEstimate {
    let n = runs as f64;
    let mean = sum / n;
    let var = if runs > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    MomentEstimate {
        mean,
        std_error: (var / n).sqrt(),
        runs,
    }
}

/// Exact drifts at epoch `r` next to Monte Carlo estimates from `runs`
/// simulated service completions at `x` (which needs `x.0 > 1`, so the
/// epoch does not end).
pub fn drift_diagnostic<R: Rng + ?Sized>(
    omega: &mut Omega,
    r: usize,
    x: (u64, u64),
    runs: u64,
    rng: &mut R,
) -> Result<DriftDiagnostic, FluidError> {
    if r == 0 {
        return Err(FluidError::EpochZero);
    }
    assert!(x.0 > 1 && runs >= 1, "need x1 > 1 and at least one run");
    let exact = ExactDrift::along(omega, r)?[r - 1];
    let atom = omega.epoch(r).atom.ok_or(FluidError::MissingAtom(r))?;
    let (mut sf, mut sf2, mut sg, mut sg2, mut sq, mut sq2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..runs {
        let (a1, a2) = service_arrivals(&atom, rng);
        let dx1 = a1 as f64 - 1.0;
        let dx2 = a2 as f64;
        let df = exact.a * dx1 + exact.b * dx2;
        let dg = exact.c * dx1 + exact.c_next * dx2;
        sf += df;
        sf2 += df * df;
        sg += dg;
        sg2 += dg * dg;
        sq += dg * dg;
        sq2 += dg.powi(4);
    }
    Ok(DriftDiagnostic {
        exact,
        mc_f: estimate(sf, sf2, runs),
        mc_g: estimate(sg, sg2, runs),
        mc_g_sq: estimate(sq, sq2, runs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::{find_s_neutral_tilt, FieldTilt, TiltMode};
    use crate::parameters::two_rate_example;
    use crate::rng::rng_from_seed;

    #[test]
    fn natural_field_drift_is_minus_one() {
        let spec = two_rate_example(0.3);
        let mut w = Omega::random(&spec, FieldTilt::NATURAL, 0, rng_from_seed(1)).unwrap();
        for d in ExactDrift::along(&mut w, 200).unwrap() {
            assert!((d.f_drift + 1.0).abs() < 1e-10, "{d:?}");
            assert!(d.g_drift.abs() < 1e-10 * d.c);
        }
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let spec = two_rate_example(0.3);
        let t = find_s_neutral_tilt(&spec, 0.5, TiltMode::Above).unwrap();
        let mut w = Omega::random(&spec, t, 0, rng_from_seed(2)).unwrap();
        let diag = drift_diagnostic(&mut w, 3, (10, 4), 100_000, &mut rng_from_seed(3)).unwrap();
        assert!((diag.mc_f.mean - diag.exact.f_drift).abs() < 4.0 * diag.mc_f.std_error, "{diag:?}");
        assert!((diag.mc_g.mean - diag.exact.g_drift).abs() < 4.0 * diag.mc_g.std_error, "{diag:?}");
        assert!(diag.exact.f_drift < 0.0);
    }

    #[test]
    fn fixed_fields_have_no_atoms() {
        let mut w = Omega::constant(crate::fluid::DriftVector::new(2.0, 1.0));
        let err = drift_diagnostic(&mut w, 1, (5, 0), 10, &mut rng_from_seed(0));
        assert_eq!(err, Err(FluidError::MissingAtom(1)));
    }
}
