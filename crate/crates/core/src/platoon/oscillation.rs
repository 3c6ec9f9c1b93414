//! Classification of simulated headway responses and a bisection search for
//! the delay at which convergence turns oscillatory.

use serde::Serialize;

use super::{equilibrium, simulate_dde, DdeMode, DdeTrajectory, PlatoonModel};
use crate::error::{Error, Result};

/// How the first follower's headway perturbation behaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Convergence {
    NonOscillatory,
    Oscillatory,
    Diverging,
}

/// Classifies `u_1(t)`.
///
/// The trajectory is diverging when the largest |u₁| over its last 10% exceeds
/// that over its first 10%. Otherwise any zero crossing after the first
/// `settle_fraction` of the samples makes it oscillatory. Values within
/// `1e-9 · max|u₁|` of zero are ignored so that round-off around a settled
/// state is not counted.
pub fn oscillation_detector(traj: &DdeTrajectory, settle_fraction: f64) -> Convergence {
    let u = match traj.headway_perturbations.first() {
        Some(u) if !u.is_empty() => u,
        _ => return Convergence::NonOscillatory,
    };
    let n = u.len();
    let tenth = (n / 10).max(1);
    let max_abs = |s: &[f64]| s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max_abs(&u[n - tenth..]) > max_abs(&u[..tenth]) {
        return Convergence::Diverging;
    }
    let deadband = 1e-9 * max_abs(u);
    let start = ((settle_fraction.clamp(0.0, 1.0) * n as f64) as usize).min(n);
    let mut last_sign = 0.0;
    for &x in &u[start..] {
        if x.abs() <= deadband {
            continue;
        }
        let s = x.signum();
        if last_sign != 0.0 && s != last_sign {
            return Convergence::Oscillatory;
        }
        last_sign = s;
    }
    Convergence::NonOscillatory
}

/// Settings for [`bisect_oscillation_boundary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionSettings {
    /// Initial displacement of the first follower's headway (m).
    pub perturbation: f64,
    /// Horizon in units of 1/d̃.
    pub horizon_scale: f64,
    /// Step size as a fraction of the delay.
    pub dt_fraction: f64,
    /// Upper bound on the step size (s).
    pub max_dt: f64,
    pub settle_fraction: f64,
    /// Relative width of the final bracket.
    pub rel_tol: f64,
}

impl Default for BisectionSettings {
    fn default() -> Self {
        Self {
            perturbation: 0.1,
            horizon_scale: 20.0,
            dt_fraction: 0.05,
            max_dt: 2e-3,
            settle_fraction: 0.1,
            rel_tol: 1e-3,
        }
    }
}

/// Classifies the linearised single-follower response at delay `tau`.
pub fn classify_delay(
    model: &PlatoonModel,
    y_star: f64,
    tau: f64,
    s: &BisectionSettings,
) -> Result<Convergence> {
    let m = PlatoonModel {
        tau,
        n_vehicles: 1,
        ..*model
    };
    let eq = equilibrium(&m, y_star)?;
    let dt = if tau > 0.0 {
        (tau * s.dt_fraction).min(s.max_dt)
    } else {
        s.max_dt
    };
    let horizon = s.horizon_scale / eq.d_tilde;
    let traj = simulate_dde(&m, y_star, s.perturbation, horizon, dt, DdeMode::Linearized)?;
    Ok(oscillation_detector(&traj, s.settle_fraction))
}

/// Largest delay in `[lo, hi]` whose linearised single-follower response is
/// non-oscillatory, found by bisection.
///
/// The response at `lo` must be non-oscillatory and the one at `hi` must not
/// be; otherwise there is no bracket and a degenerate-regime error names the
/// two classifications.
pub fn bisect_oscillation_boundary(
    model: &PlatoonModel,
    y_star: f64,
    lo: f64,
    hi: f64,
    settings: &BisectionSettings,
) -> Result<f64> {
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "invalid delay bracket [{lo}, {hi}]"
        )));
    }
    let c_lo = classify_delay(model, y_star, lo, settings)?;
    let c_hi = classify_delay(model, y_star, hi, settings)?;
    if c_lo != Convergence::NonOscillatory || c_hi == Convergence::NonOscillatory {
        return Err(Error::Degenerate(format!(
            "no oscillation boundary in [{lo}, {hi}] s at headway {y_star} m: \
             response is {c_lo:?} at the lower end and {c_hi:?} at the upper end"
        )));
    }
    let (mut lo, mut hi) = (lo, hi);
    while (hi - lo) > settings.rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if classify_delay(model, y_star, mid, settings)? == Convergence::NonOscillatory {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
