//! Car-following dynamics of a connected-vehicle platoon with feedback delay.
//!
//! Vehicles follow the full velocity difference (FVD) law
//!
//! ```text
//! v̇_k(t) = a (V(y_{k-1}(t-τ)) - V(y_k(t-τ)) - v_k(t-τ)) + l (v_{k-1}(t-τ) - v_k(t-τ))
//! ẏ_k(t) = v_k(t)
//! ```
//!
//! where `y_k` is the headway and `v_k` the relative velocity of vehicle `k`
//! and `V` is the Bando optimal-velocity function. Setting `l = 0` gives the
//! modified optimal velocity model (MOVM).

mod dde;
mod oscillation;
mod roots;

pub use dde::{simulate_dde, DdeMode, DdeTrajectory};
pub use oscillation::{
    bisect_oscillation_boundary, classify_delay, oscillation_detector, BisectionSettings,
    Convergence,
};
pub use roots::{characteristic_function, characteristic_roots, real_roots, Root};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the Bando optimal-velocity function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OvfParams {
    /// Speed scale V₀ (m/s).
    pub v0: f64,
    /// Offset headway y_m (m).
    pub y_m: f64,
    /// Transition width ỹ (m).
    pub y_tilde: f64,
}

impl OvfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.y_tilde > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "y_tilde must be positive, got {}",
                self.y_tilde
            )));
        }
        if !(self.v0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "v0 must be positive, got {}",
                self.v0
            )));
        }
        if !(self.y_m >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "y_m must be non-negative, got {}",
                self.y_m
            )));
        }
        Ok(())
    }
}

/// Bando OVF: `V(y) = V₀ (tanh((y − y_m)/ỹ) + tanh(y_m/ỹ))`.
pub fn ovf_velocity(y: f64, p: &OvfParams) -> f64 {
    p.v0 * ((y - p.y_m) / p.y_tilde).tanh() + p.v0 * (p.y_m / p.y_tilde).tanh()
}

/// Derivative of the OVF with respect to headway.
pub fn ovf_slope(y: f64, p: &OvfParams) -> f64 {
    let sech = 1.0 / ((y - p.y_m) / p.y_tilde).cosh();
    p.v0 / p.y_tilde * sech * sech
}

/// Speed scale V₀ that makes `y_star` the equilibrium headway behind a
/// leader travelling at `lead_speed`.
pub fn solve_v0_for_equilibrium(
    y_star: f64,
    lead_speed: f64,
    y_m: f64,
    y_tilde: f64,
) -> Result<f64> {
    if !(y_star > 0.0) {
        return Err(Error::InvalidEquilibrium {
            headway: y_star,
            reason: "headway must be positive".into(),
        });
    }
    if !(y_tilde > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "y_tilde must be positive, got {y_tilde}"
        )));
    }
    let bracket = ((y_star - y_m) / y_tilde).tanh() + (y_m / y_tilde).tanh();
    if !(bracket > 0.0) {
        return Err(Error::InvalidEquilibrium {
            headway: y_star,
            reason: format!("OVF shape term is {bracket}, no positive V0 reaches the lead speed"),
        });
    }
    Ok(lead_speed / bracket)
}

/// Car-following model of the whole platoon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatoonModel {
    /// Headway sensitivity a (1/s).
    pub a: f64,
    /// Velocity-difference sensitivity l (1/s); zero selects MOVM.
    pub l: f64,
    pub ovf: OvfParams,
    /// Lead vehicle speed ẋ₀ (m/s).
    pub lead_speed: f64,
    pub n_vehicles: usize,
    /// Feedback delay τ (s).
    pub tau: f64,
}

impl PlatoonModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.a > 0.0) {
            return bad(format!("a must be positive, got {}", self.a));
        }
        if !(self.l >= 0.0) {
            return bad(format!("l must be non-negative, got {}", self.l));
        }
        if !(self.lead_speed > 0.0) {
            return bad(format!(
                "lead speed must be positive, got {}",
                self.lead_speed
            ));
        }
        if self.n_vehicles == 0 {
            return bad("platoon needs at least one follower".into());
        }
        if !(self.tau >= 0.0) {
            return bad(format!("delay must be non-negative, got {}", self.tau));
        }
        self.ovf.validate()
    }

    pub fn is_movm(&self) -> bool {
        self.l == 0.0
    }

    /// Copy of the model with V₀ re-solved so that `y_star` is the equilibrium.
    pub fn at_headway(&self, y_star: f64) -> Result<Self> {
        let v0 = solve_v0_for_equilibrium(y_star, self.lead_speed, self.ovf.y_m, self.ovf.y_tilde)?;
        Ok(Self {
            ovf: OvfParams { v0, ..self.ovf },
            ..*self
        })
    }

    /// `a + l`, the coefficient of the delayed velocity term.
    pub fn damping(&self) -> f64 {
        self.a + self.l
    }
}

/// Linearisation point of the platoon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    /// y* (m).
    pub headway_star: f64,
    /// V′(y*) (1/s).
    pub v_prime: f64,
    /// d̃ = a V′(y*) / (a + l) (1/s).
    pub d_tilde: f64,
}

impl Equilibrium {
    /// `a V′(y*)`, the coefficient of the delayed headway term.
    pub fn stiffness(&self, model: &PlatoonModel) -> f64 {
        model.a * self.v_prime
    }
}

/// Equilibrium quantities at `y_star`. The model's V₀ must already place the
/// equilibrium there (see [`PlatoonModel::at_headway`]).
pub fn equilibrium(model: &PlatoonModel, y_star: f64) -> Result<Equilibrium> {
    model.validate()?;
    let speed = ovf_velocity(y_star, &model.ovf);
    if ((speed - model.lead_speed) / model.lead_speed).abs() > 1e-9 {
        return Err(Error::InvalidEquilibrium {
            headway: y_star,
            reason: format!(
                "V(y*) = {speed} does not match the lead speed {}",
                model.lead_speed
            ),
        });
    }
    let v_prime = ovf_slope(y_star, &model.ovf);
    let d_tilde = model.a * v_prime / model.damping();
    if !(v_prime > 0.0 && d_tilde > 0.0) {
        return Err(Error::InvalidEquilibrium {
            headway: y_star,
            reason: format!("non-positive OVF slope {v_prime}"),
        });
    }
    Ok(Equilibrium {
        headway_star: y_star,
        v_prime,
        d_tilde,
    })
}

/// Real part σ = d̃(−2 − √2) at which both real-root conditions hold.
pub fn coalescence_sigma(eq: &Equilibrium) -> f64 {
    eq.d_tilde * (-2.0 - std::f64::consts::SQRT_2)
}

/// Critical feedback delay τ_cr for non-oscillatory convergence.
///
/// `τ_cr = ln((−(a+l)s − aV′) / s²) / s` with `s = d̃(−2 − √2)`, the delay at
/// which `s` is a real root of the characteristic equation.
pub fn critical_delay(model: &PlatoonModel, eq: &Equilibrium) -> Result<f64> {
    if !(eq.d_tilde > 0.0) {
        return Err(Error::NoRealRoot(format!(
            "d_tilde = {} is not positive",
            eq.d_tilde
        )));
    }
    let s = coalescence_sigma(eq);
    let arg = (-model.damping() * s - eq.stiffness(model)) / (s * s);
    if !(arg > 0.0) {
        return Err(Error::NoRealRoot(format!(
            "logarithm argument {arg} is not positive"
        )));
    }
    let tau = arg.ln() / s;
    if !(tau > 0.0) {
        return Err(Error::NoRealRoot(format!(
            "critical delay {tau} s is not positive at headway {} m",
            eq.headway_star
        )));
    }
    Ok(tau)
}

/// Residuals of the two real-root conditions at `(sigma, tau)`, relative to
/// their left-hand sides:
///
/// * `(σ(a+l) + aV′)² = σ⁴ e^{2στ}`
/// * `2σ² e^{2στ} = (a+l)²`
pub fn real_root_condition_residuals(
    model: &PlatoonModel,
    eq: &Equilibrium,
    sigma: f64,
    tau: f64,
) -> (f64, f64) {
    let c = model.damping();
    let b = eq.stiffness(model);
    let e = (2.0 * sigma * tau).exp();
    let lhs1 = (sigma * c + b).powi(2);
    let rhs1 = sigma.powi(4) * e;
    let lhs2 = 2.0 * sigma * sigma * e;
    let rhs2 = c * c;
    (
        (lhs1 - rhs1).abs() / lhs1.abs(),
        (lhs2 - rhs2).abs() / rhs2.abs(),
    )
}

/// Everything the rest of the pipeline needs from the platoon stage at one
/// headway.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalDelayPoint {
    pub headway: f64,
    pub v0: f64,
    pub equilibrium: Equilibrium,
    pub tau_cr: f64,
}

/// Solves V₀, the equilibrium and τ_cr at one headway.
pub fn critical_delay_at(model: &PlatoonModel, y_star: f64) -> Result<CriticalDelayPoint> {
    let m = model.at_headway(y_star)?;
    let eq = equilibrium(&m, y_star)?;
    let tau_cr = critical_delay(&m, &eq)?;
    Ok(CriticalDelayPoint {
        headway: y_star,
        v0: m.ovf.v0,
        equilibrium: eq,
        tau_cr,
    })
}
