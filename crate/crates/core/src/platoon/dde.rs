//! Fixed-step RK4 integration of the delayed platoon equations.
//!
//! The state of follower `k` is its headway perturbation `u_k = y_k − y*` and
//! its relative velocity `v_k`. Delayed values are read from the stored
//! trajectory by linear interpolation; before `t = 0` the history is held
//! constant at the initial state.

use serde::Serialize;

use super::{equilibrium, ovf_velocity, PlatoonModel};
use crate::error::{Error, Result};

/// Right-hand side used by [`simulate_dde`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DdeMode {
    /// Linearisation about the equilibrium.
    Linearized,
    /// Full FVD/MOVM law with the OVF evaluated at the delayed headway.
    Nonlinear,
}

/// Sampled solution of the delayed system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DdeTrajectory {
    pub times: Vec<f64>,
    /// `headway_perturbations[k][j]` is `u_{k+1}` at `times[j]`.
    pub headway_perturbations: Vec<Vec<f64>>,
    /// `relative_velocities[k][j]` is `v_{k+1}` at `times[j]`.
    pub relative_velocities: Vec<Vec<f64>>,
}

impl DdeTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Integrates the platoon from a constant history in which the first
/// follower's headway is displaced by `perturbation` metres and every other
/// state sits at equilibrium.
///
/// The model's V₀ must already place the equilibrium at `y_star`. The delay is
/// `model.tau` and the platoon has `model.n_vehicles` followers.
pub fn simulate_dde(
    model: &PlatoonModel,
    y_star: f64,
    perturbation: f64,
    horizon: f64,
    dt: f64,
    mode: DdeMode,
) -> Result<DdeTrajectory> {
    let eq = equilibrium(model, y_star)?;
    let tau = model.tau;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {dt}"
        )));
    }
    if tau > 0.0 && dt > tau / 10.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "step size {dt} s exceeds a tenth of the delay {tau} s"
        )));
    }
    let min_horizon = 20.0 / eq.d_tilde;
    if !(horizon >= min_horizon) {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} s is shorter than 20/d_tilde = {min_horizon} s"
        )));
    }
    if !perturbation.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "perturbation must be finite, got {perturbation}"
        )));
    }

    let n = model.n_vehicles;
    let steps = (horizon / dt).ceil() as usize;
    let (a, l, b) = (model.a, model.l, eq.stiffness(model));

    // state layout: [u_1..u_n, v_1..v_n]
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    let mut x0 = vec![0.0; 2 * n];
    x0[0] = perturbation;
    history.push(x0);

    let delayed = |history: &[Vec<f64>], t: f64| -> Vec<f64> {
        let s = t - tau;
        if s <= 0.0 {
            return history[0].clone();
        }
        let f = s / dt;
        let j = (f.floor() as usize).min(history.len() - 1);
        if j + 1 >= history.len() {
            return history[j].clone();
        }
        let w = f - j as f64;
        history[j]
            .iter()
            .zip(&history[j + 1])
            .map(|(p, q)| p + w * (q - p))
            .collect()
    };

    let accel = |d: &[f64], k: usize| -> f64 {
        let (u, v) = (d[k], d[n + k]);
        match mode {
            DdeMode::Linearized => {
                if k == 0 {
                    -b * u - (a + l) * v
                } else {
                    b * (d[k - 1] - u) - a * v + l * (d[n + k - 1] - v)
                }
            }
            DdeMode::Nonlinear => {
                let vy = ovf_velocity(y_star + u, &model.ovf);
                if k == 0 {
                    a * (model.lead_speed - vy - v) - l * v
                } else {
                    let vprev = ovf_velocity(y_star + d[k - 1], &model.ovf);
                    a * (vprev - vy - v) + l * (d[n + k - 1] - v)
                }
            }
        }
    };

    let rhs = |x: &[f64], d: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; 2 * n];
        for k in 0..n {
            out[k] = x[n + k];
            out[n + k] = accel(d, k);
        }
        out
    };

    for step in 0..steps {
        let t = step as f64 * dt;
        let x = history[step].clone();
        // with τ = 0 the "delayed" state is the current stage state
        let instant = tau == 0.0;
        let d1 = if instant {
            x.clone()
        } else {
            delayed(&history, t)
        };
        let k1 = rhs(&x, &d1);
        let x2: Vec<f64> = x.iter().zip(&k1).map(|(p, k)| p + 0.5 * dt * k).collect();
        let d2 = if instant {
            x2.clone()
        } else {
            delayed(&history, t + 0.5 * dt)
        };
        let k2 = rhs(&x2, &d2);
        let x3: Vec<f64> = x.iter().zip(&k2).map(|(p, k)| p + 0.5 * dt * k).collect();
        let d3 = if instant { x3.clone() } else { d2 };
        let k3 = rhs(&x3, &d3);
        let x4: Vec<f64> = x.iter().zip(&k3).map(|(p, k)| p + dt * k).collect();
        let d4 = if instant {
            x4.clone()
        } else {
            delayed(&history, t + dt)
        };
        let k4 = rhs(&x4, &d4);
        let next: Vec<f64> = (0..2 * n)
            .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        history.push(next);
    }

    let times = (0..=steps).map(|j| j as f64 * dt).collect();
    let headway_perturbations = (0..n)
        .map(|k| history.iter().map(|x| x[k]).collect())
        .collect();
    let relative_velocities = (0..n)
        .map(|k| history.iter().map(|x| x[n + k]).collect())
        .collect();
    Ok(DdeTrajectory {
        times,
        headway_perturbations,
        relative_velocities,
    })
}
