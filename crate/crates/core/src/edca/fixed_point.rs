//! Damped Picard iteration for the coupled AC0/AC1 chains.

use serde::Serialize;

use super::distribution::pgf_moments;
use super::{ac1_windows, aifs_offset, arrival_probabilities, poisson_idle_factor, Ac, EdcaParams};
use crate::error::{Error, Result};

/// Offered packet rates (packets/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Loads {
    pub lambda0: f64,
    pub lambda1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Weight of the new iterate in each update.
    pub damping: f64,
    /// Convergence threshold on the max-abs change of (ω₀, ω₁).
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

/// Self-consistent state of both access categories. Index 0 is AC0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointSolution {
    /// Internal transmission probabilities ω.
    pub omega: [f64; 2],
    /// Virtual-collision probability of AC1 (AC0 never loses one).
    pub pv1: f64,
    /// External transmission probabilities τ₀ = ω₀, τ₁ = ω₁(1 − ω₀).
    pub tau: [f64; 2],
    pub tau_total: f64,
    /// Probability that none of the neighbours transmits in a slot.
    pub idle_factor: f64,
    pub pb: [f64; 2],
    pub pa: [f64; 2],
    /// Utilisations after clamping to 1.
    pub rho: [f64; 2],
    /// Whether `λT_S` exceeded 1 and was clamped.
    pub rho_clamped: [bool; 2],
    /// Mean access delay used as the service time (s).
    pub service_mean: [f64; 2],
    pub loads: Loads,
    pub n_cs: usize,
    pub iterations: usize,
    /// Max-abs change of ω produced by one more application of the map.
    pub residual: f64,
}

fn degenerate(what: &str, detail: String) -> Error {
    Error::Degenerate(format!("{what}: {detail}"))
}

/// `ω₀` and `ω₁` from the stationary backoff-chain probabilities.
///
/// `ω₁` uses the geometric sums `Σ_j p_v^j` and `Σ_j p_v^j (W_{1,j} − 1)`
/// directly, which equals the closed form with its `1/(1 − 2p_v)` and
/// `1/(1 − p_v)` factors but stays finite at `p_v = 1/2` and `p_v = 1`.
pub fn omega_closed_forms(
    pb: [f64; 2],
    pa: [f64; 2],
    rho: [f64; 2],
    pv1: f64,
    p: &EdcaParams,
) -> Result<(f64, f64)> {
    Ok((
        omega0(pb[0], pa[0], rho[0], p)?,
        omega1(pb[1], pa[1], rho[1], pv1, p)?,
    ))
}

fn check_inputs(pb: f64, pa: f64, rho: f64, ac: &str) -> Result<()> {
    for (name, v) in [("p_b", pb), ("p_a", pa), ("rho", rho)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "{ac} {name} = {v} outside [0, 1]"
            )));
        }
    }
    if pb >= 1.0 {
        return Err(degenerate(ac, "blocking probability reached 1".into()));
    }
    if pa <= 0.0 {
        return Err(degenerate(
            ac,
            "arrival probability is 0, the queue never leaves idle".into(),
        ));
    }
    Ok(())
}

fn omega0(pb: f64, pa: f64, rho: f64, p: &EdcaParams) -> Result<f64> {
    check_inputs(pb, pa, rho, "AC0")?;
    let w = p.w0(Ac::Ac0) as f64;
    Ok(1.0 / (1.0 + (w - 1.0) / (2.0 * (1.0 - pb)) + (1.0 - rho) / pa))
}

fn omega1(pb: f64, pa: f64, rho: f64, pv1: f64, p: &EdcaParams) -> Result<f64> {
    check_inputs(pb, pa, rho, "AC1")?;
    if !(0.0..=1.0).contains(&pv1) {
        return Err(Error::InvalidParameter(format!(
            "p_v1 = {pv1} outside [0, 1]"
        )));
    }
    let windows = ac1_windows(p)?;
    let (mut f, mut s, mut pow) = (0.0, 0.0, 1.0);
    for &w in &windows {
        f += pow;
        s += pow * (w as f64 - 1.0);
        pow *= pv1;
    }
    Ok(f / (f + s / (2.0 * (1.0 - pb)) + (1.0 - rho) / pa))
}

/// Evaluates every derived quantity at `omega` and the image of `omega`
/// under the update map. The returned solution carries `omega` itself; the
/// image is returned separately.
pub fn fixed_point_update(
    omega: [f64; 2],
    loads: Loads,
    p: &EdcaParams,
    n_cs: usize,
) -> Result<(FixedPointSolution, [f64; 2])> {
    let pv1 = omega[0];
    let tau = [omega[0], omega[1] * (1.0 - omega[0])];
    let tau_total = tau[0] + tau[1];
    let idle = poisson_idle_factor(tau_total, n_cs);
    let pb = [
        1.0 - (idle * (1.0 - omega[1])).powi(aifs_offset(p, Ac::Ac0) as i32 + 1),
        1.0 - (idle * (1.0 - omega[0])).powi(aifs_offset(p, Ac::Ac1) as i32 + 1),
    ];
    let (pa0, pa1) = arrival_probabilities(loads.lambda0, loads.lambda1, p.slot)?;
    let pa = [pa0, pa1];
    let lambdas = [loads.lambda0, loads.lambda1];
    let mut service_mean = [0.0; 2];
    let mut rho = [0.0; 2];
    let mut rho_clamped = [false; 2];
    let mut next = [0.0; 2];
    for ac in Ac::BOTH {
        let i = ac.index();
        service_mean[i] = pgf_moments(p, ac, pb[i], pv1)?.mean_s();
        let raw = lambdas[i] * service_mean[i];
        rho_clamped[i] = raw > 1.0;
        rho[i] = raw.min(1.0);
        next[i] = if lambdas[i] == 0.0 {
            0.0
        } else {
            match ac {
                Ac::Ac0 => omega0(pb[0], pa[0], rho[0], p)?,
                Ac::Ac1 => omega1(pb[1], pa[1], rho[1], pv1, p)?,
            }
        };
    }
    let residual = (next[0] - omega[0]).abs().max((next[1] - omega[1]).abs());
    Ok((
        FixedPointSolution {
            omega,
            pv1,
            tau,
            tau_total,
            idle_factor: idle,
            pb,
            pa,
            rho,
            rho_clamped,
            service_mean,
            loads,
            n_cs,
            iterations: 0,
            residual,
        },
        next,
    ))
}

/// Solves the coupled chains for `n_cs` mutually sensing stations.
pub fn solve_fixed_point(
    loads: Loads,
    p: &EdcaParams,
    n_cs: usize,
    opts: &FixedPointOptions,
) -> Result<FixedPointSolution> {
    p.validate()?;
    if n_cs == 0 {
        return Err(Error::InvalidParameter(
            "contender count must be at least 1".into(),
        ));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "damping must lie in (0, 1], got {}",
            opts.damping
        )));
    }
    let mut omega = [0.0; 2];
    let mut history: Vec<f64> = Vec::new();
    for it in 0..opts.max_iterations {
        let (mut sol, next) = fixed_point_update(omega, loads, p, n_cs)?;
        if sol.residual < opts.tolerance {
            sol.iterations = it;
            return Ok(sol);
        }
        history.push(sol.residual);
        if history.len() > 32 {
            history.remove(0);
        }
        for i in 0..2 {
            omega[i] += opts.damping * (next[i] - omega[i]);
        }
    }
    let residual = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        residual,
        history,
    })
}
