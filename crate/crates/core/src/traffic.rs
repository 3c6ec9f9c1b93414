//! Gap acceptance of motorised two-wheelers and the AC0 packet-rate models.
//!
//! A two-wheeler cutting into the platoon triggers event-driven safety
//! messages (AC0). The probability that it accepts a gap is logistic in the
//! time gap `y*/ẋ₀`, and the AC0 rate is one of four increasing maps of that
//! probability. AC1 beacons are periodic at a fixed rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logistic gap-acceptance coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapModelParams {
    pub alpha: f64,
    /// Slope per second of time gap.
    pub beta0: f64,
}

impl Default for GapModelParams {
    fn default() -> Self {
        Self {
            alpha: -1.933,
            beta0: 0.652,
        }
    }
}

/// Probability that a two-wheeler accepts the gap at headway `y_star`
/// behind vehicles moving at `lead_speed`.
pub fn gap_probability(y_star: f64, lead_speed: f64, p: &GapModelParams) -> Result<f64> {
    if !(lead_speed > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lead speed must be positive, got {lead_speed}"
        )));
    }
    if !(y_star >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "headway must be non-negative, got {y_star}"
        )));
    }
    let x = p.alpha + p.beta0 * (y_star / lead_speed);
    // logistic written to stay finite for large |x|
    Ok(if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    })
}

/// Functional form of the AC0 rate as a function of gap acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    Linear,
    Quadratic,
    Sigmoidal,
    Logarithmic,
}

impl RateKind {
    pub const ALL: [RateKind; 4] = [
        RateKind::Linear,
        RateKind::Quadratic,
        RateKind::Sigmoidal,
        RateKind::Logarithmic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RateKind::Linear => "linear",
            RateKind::Quadratic => "quadratic",
            RateKind::Sigmoidal => "sigmoidal",
            RateKind::Logarithmic => "logarithmic",
        }
    }
}

impl std::fmt::Display for RateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub kind: RateKind,
    /// Scale k (packets/s).
    pub k: f64,
}

impl RateModel {
    pub fn new(kind: RateKind, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rate scale k must be positive, got {k}"
            )));
        }
        Ok(Self { kind, k })
    }
}

/// AC0 packet rate λ₀ (packets/s) at gap-acceptance probability `p`.
///
/// The logarithmic form `1 − k ln(1 − P)` is evaluated literally, so it
/// returns 1 rather than 0 at `P = 0`.
pub fn lambda0(p: f64, m: &RateModel) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    let k = m.k;
    match m.kind {
        RateKind::Linear => Ok(k * p),
        RateKind::Quadratic => Ok(k * (p * p + p)),
        RateKind::Sigmoidal => Ok(k * p.tanh()),
        RateKind::Logarithmic => {
            if p >= 1.0 {
                return Err(Error::Domain("logarithmic rate model needs P < 1".into()));
            }
            Ok(1.0 - k * (-p).ln_1p())
        }
    }
}

/// Traffic seen by one platoon member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficMix {
    pub gap: GapModelParams,
    pub rate: RateModel,
    /// Periodic AC1 rate λ₁ (packets/s).
    pub lambda1: f64,
}

impl TrafficMix {
    /// Checks `λ₁ > 0` and that `λ₁σ` is a probability for slot length `slot`.
    pub fn validate(&self, slot: f64) -> Result<()> {
        if !(self.lambda1 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda1 must be positive, got {}",
                self.lambda1
            )));
        }
        if self.lambda1 * slot > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "lambda1 * slot = {} exceeds 1",
                self.lambda1 * slot
            )));
        }
        Ok(())
    }

    /// `(P, λ₀)` at headway `y_star`.
    pub fn ac0_rate(&self, y_star: f64, lead_speed: f64) -> Result<(f64, f64)> {
        let p = gap_probability(y_star, lead_speed, &self.gap)?;
        Ok((p, lambda0(p, &self.rate)?))
    }
}
