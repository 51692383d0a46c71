use serde::Serialize;

use super::{FluidError, Omega};
use crate::multiplicative::TotalTime;

/// Below `V1_FLOOR * x0` the particle is taken to be at the origin.
pub const V1_FLOOR: f64 = 1e-300;
/// Tail sums for `a_r` stop once the running slope product falls below this.
pub const COEFFICIENT_PRODUCT_FLOOR: f64 = 1e-12;
/// Epochs allowed for reaching a ball or summing a tail.
pub const EPOCH_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Stop {
    /// After this many complete epochs.
    Epochs(usize),
    /// On entering `{x1 + x2 <= A}`.
    EnterBall(f64),
}

/// Recorded path of the particle from `(x0, 0)` at the start of epoch 1.
///
/// Index `r` of `epoch_times` and `boundary_positions` holds `t_r` and
/// `v1(t_r)`, with `t_0 = 0` and `v1(t_0) = x0`.  The per-epoch vectors hold
/// the values for epochs `1..=n` at index `r - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluidTrajectory {
    pub x0: f64,
    pub epoch_times: Vec<f64>,
    pub boundary_positions: Vec<f64>,
    pub slopes: Vec<f64>,
    /// Coefficients of the remaining life `a_r x1 + b_r x2 + f0`.
    pub lyapunov_a: Vec<f64>,
    pub lyapunov_b: Vec<f64>,
    /// Coefficients of the initial value `c_r x1 + c_{r+1} x2`, with `c_1 = 1`.
    pub lyapunov_c: Vec<f64>,
    /// `max(a_r, b_r)`.
    pub phi: Vec<f64>,
    /// Time of entry into the ball, when that was the stop condition.
    pub ball_entry: Option<f64>,
    /// Set when `v1` fell below the numeric floor.
    pub at_origin: bool,
}

impl FluidTrajectory {
    pub fn epochs(&self) -> usize {
        self.slopes.len()
    }
}

/// Follows the particle epoch by epoch with the exact piecewise-linear flow.
pub fn advance_trajectory(omega: &mut Omega, x0: f64, stop: Stop) -> Result<FluidTrajectory, FluidError> {
    assert!(x0 > 0.0, "x0 must be positive");
    let mut times = vec![0.0];
    let mut positions = vec![x0];
    let mut slopes = Vec::new();
    let mut d1s = Vec::new();
    let mut product = 1.0;
    let mut ball_entry = None;
    let mut at_origin = false;
    let limit = match stop {
        Stop::Epochs(n) => n,
        Stop::EnterBall(_) => EPOCH_CAP,
    };
    for r in 1..=limit {
        let field = omega.epoch(r);
        let t_prev = times[r - 1];
        let v = positions[r - 1];
        let (d1, d2) = (field.drift.d1, field.drift.d2);
        if let Stop::EnterBall(a) = stop {
            if v <= a {
                ball_entry = Some(t_prev);
                break;
            }
            // x1 + x2 = v + (d2 - d1) t during the epoch.
            if d1 > d2 {
                let t = (v - a) / (d1 - d2);
                if t < v / d1 {
                    ball_entry = Some(t_prev + t);
                    break;
                }
            }
        }
        times.push(t_prev + v / d1);
        product *= field.slope;
        positions.push(x0 * product);
        slopes.push(field.slope);
        d1s.push(d1);
        if product < V1_FLOOR {
            at_origin = true;
            break;
        }
    }
    if matches!(stop, Stop::EnterBall(_)) && ball_entry.is_none() && !at_origin {
        return Err(FluidError::Truncated(EPOCH_CAP));
    }
    let n = slopes.len();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut next = tail_coefficient(omega, n + 1);
    for r in (0..n).rev() {
        b[r] = next;
        a[r] = 1.0 / d1s[r] + next * slopes[r];
        next = a[r];
    }
    let mut c = Vec::with_capacity(n);
    let mut cr = 1.0;
    for &y in &slopes {
        c.push(cr);
        cr /= y;
    }
    let phi = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
    Ok(FluidTrajectory {
        x0,
        epoch_times: times,
        boundary_positions: positions,
        slopes,
        lyapunov_a: a,
        lyapunov_b: b,
        lyapunov_c: c,
        phi,
        ball_entry,
        at_origin,
    })
}

/// `a_r = sum_{m >= r} (1 / d1(m)) prod_{k = r}^{m - 1} Y(k)`, summed until
/// the product drops below [`COEFFICIENT_PRODUCT_FLOOR`]; infinite when it
/// never does within [`EPOCH_CAP`] epochs or it overflows `1 / V1_FLOOR`.
fn tail_coefficient(omega: &mut Omega, r: usize) -> f64 {
    let mut sum = 0.0;
    let mut product = 1.0;
    for m in r..r + EPOCH_CAP {
        let field = omega.epoch(m);
        sum += product / field.drift.d1;
        product *= field.slope;
        if product < COEFFICIENT_PRODUCT_FLOOR {
            return sum;
        }
        if product > 1.0 / V1_FLOOR {
            return f64::INFINITY;
        }
    }
    f64::INFINITY
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluidTotalTime {
    /// Time to reach the origin, `t_empty = sum_r (t_r - t_{r-1})`.
    pub t_empty: TotalTime,
    /// `sum_{r >= 1} prod_{n <= r} Y(n)` over the same epochs.
    pub product_series: f64,
    pub epochs: usize,
}

/// Sums epoch durations until `v1 < eps x0` or `cap` epochs.
pub fn total_time(omega: &mut Omega, x0: f64, eps: f64, cap: usize) -> FluidTotalTime {
    assert!(x0 > 0.0 && eps > 0.0, "x0 and eps must be positive");
    let mut t = 0.0;
    let mut product = 1.0;
    let mut series = 0.0;
    for r in 1..=cap {
        let field = omega.epoch(r);
        t += x0 * product / field.drift.d1;
        product *= field.slope;
        series += product;
        if product < eps {
            return FluidTotalTime {
                t_empty: TotalTime::Converged(t),
                product_series: series,
                epochs: r,
            };
        }
    }
    FluidTotalTime {
        t_empty: TotalTime::Truncated(t),
        product_series: series,
        epochs: cap,
    }
}

/// Time for the particle at `x` in epoch `r` to reach `{x1 + x2 <= a}`;
/// infinite once the position overflows.
pub fn remaining_life(omega: &mut Omega, r: usize, x: (f64, f64), a: f64) -> Result<f64, FluidError> {
    if r == 0 {
        return Err(FluidError::EpochZero);
    }
    assert!(a > 0.0, "ball size must be positive");
    let (mut x1, mut x2) = x;
    let mut elapsed = 0.0;
    for epoch in r..r + EPOCH_CAP {
        let sum = x1 + x2;
        if sum <= a {
            return Ok(elapsed);
        }
        if !sum.is_finite() {
            return Ok(f64::INFINITY);
        }
        let field = omega.epoch(epoch);
        let (d1, d2) = (field.drift.d1, field.drift.d2);
        let duration = x1 / d1;
        if d1 > d2 {
            let t = (sum - a) / (d1 - d2);
            if t <= duration {
                return Ok(elapsed + t);
            }
        }
        elapsed += duration;
        (x1, x2) = (x2 + d2 * duration, 0.0);
    }
    Err(FluidError::Truncated(EPOCH_CAP))
}

/// `g = c_r x1 + c_{r+1} x2` with `c_1 = 1` and `c_{r+1} = c_r / Y(r)`.
pub fn initial_value(omega: &mut Omega, r: usize, x: (f64, f64)) -> Result<f64, FluidError> {
    if r == 0 {
        return Err(FluidError::EpochZero);
    }
    let mut c = 1.0;
    for n in 1..r {
        c /= omega.epoch(n).slope;
    }
    let next = c / omega.epoch(r).slope;
    Ok(c * x.0 + next * x.1)
}
