//! TOML scenario configuration.
//!
//! Every section and field is optional; omitted values fall back to the
//! reference scenario. Unknown keys are rejected. A minimal file:
//!
//! ```toml
//! [sweep]
//! start = 2.0
//! stop = 10.0
//! step = 1.0
//! ```
//!
//! The full grammar, with defaults:
//!
//! ```toml
//! rate_models = ["linear", "quadratic", "sigmoidal", "logarithmic"]
//! models = ["fvd", "movm"]
//! delay_budget_fraction = 0.10
//! output_dir = "out"
//!
//! [platoon]
//! a = 5.0            # headway sensitivity (1/s)
//! fvd_l = 2.0        # velocity-difference sensitivity of FVD (1/s); MOVM uses 0
//! y_m = 5.0          # OVF offset (m)
//! y_tilde = 10.0     # OVF width (m)
//! lead_speed = 25.0  # m/s
//! # platoon_size = 50  caps the contender count; unset fills the sensing range
//!
//! [traffic]
//! alpha = -1.933
//! beta0 = 0.652
//! k = 500.0          # AC0 rate scale (packets/s)
//! lambda1 = 10.0     # beacon rate (packets/s)
//!
//! [edca]             # any EdcaParams field, SI units
//! cw_min = [3, 15]
//!
//! [sweep]
//! start = 2.0
//! stop = 10.0
//! step = 1.0
//!
//! [des]
//! enabled = false
//! replications = 8
//! seed = 1
//! slots = 1000000
//! warmup = 1.0
//! topology = "single_domain"   # or "line_with_ranges"
//! # n_vehicles = 100   unset fills the sensing range
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::des::Topology;
use crate::edca::{arrival_probabilities, EdcaParams};
use crate::error::{Error, FieldError, Result};
use crate::platoon::{OvfParams, PlatoonModel};
use crate::traffic::{GapModelParams, RateKind, RateModel, TrafficMix};

/// Car-following variant: FVD with the configured `l`, or MOVM with `l = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fvd,
    Movm,
}

impl ModelKind {
    pub const BOTH: [ModelKind; 2] = [ModelKind::Fvd, ModelKind::Movm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Fvd => "fvd",
            ModelKind::Movm => "movm",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatoonSection {
    pub a: f64,
    pub fvd_l: f64,
    pub y_m: f64,
    pub y_tilde: f64,
    pub lead_speed: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub platoon_size: Option<usize>,
}

impl Default for PlatoonSection {
    fn default() -> Self {
        Self {
            a: 5.0,
            fvd_l: 2.0,
            y_m: 5.0,
            y_tilde: 10.0,
            lead_speed: 25.0,
            platoon_size: None,
        }
    }
}

impl PlatoonSection {
    /// Model of the given kind; V₀ is a placeholder until
    /// [`PlatoonModel::at_headway`] places the equilibrium.
    pub fn model(&self, kind: ModelKind) -> PlatoonModel {
        PlatoonModel {
            a: self.a,
            l: match kind {
                ModelKind::Fvd => self.fvd_l,
                ModelKind::Movm => 0.0,
            },
            ovf: OvfParams {
                v0: 1.0,
                y_m: self.y_m,
                y_tilde: self.y_tilde,
            },
            lead_speed: self.lead_speed,
            n_vehicles: self.platoon_size.unwrap_or(1).max(1),
            tau: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficSection {
    pub alpha: f64,
    pub beta0: f64,
    pub k: f64,
    pub lambda1: f64,
}

impl Default for TrafficSection {
    fn default() -> Self {
        let g = GapModelParams::default();
        Self {
            alpha: g.alpha,
            beta0: g.beta0,
            k: 500.0,
            lambda1: 10.0,
        }
    }
}

impl TrafficSection {
    pub fn mix(&self, kind: RateKind) -> TrafficMix {
        TrafficMix {
            gap: GapModelParams {
                alpha: self.alpha,
                beta0: self.beta0,
            },
            rate: RateModel { kind, k: self.k },
            lambda1: self.lambda1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            start: 2.0,
            stop: 10.0,
            step: 1.0,
        }
    }
}

impl SweepSection {
    /// `start, start + step, …` up to and including `stop` (to within
    /// 1e−9 of a step).
    pub fn headways(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.stop < self.start {
            return Vec::new();
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesSection {
    pub enabled: bool,
    pub replications: usize,
    pub seed: u64,
    pub slots: f64,
    pub warmup: f64,
    pub topology: Topology,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_vehicles: Option<usize>,
}

impl Default for DesSection {
    fn default() -> Self {
        Self {
            enabled: false,
            replications: 8,
            seed: 1,
            slots: crate::des::DEFAULT_SLOTS,
            warmup: 1.0,
            topology: Topology::SingleDomain,
            n_vehicles: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub rate_models: Vec<RateKind>,
    pub models: Vec<ModelKind>,
    pub delay_budget_fraction: f64,
    pub output_dir: PathBuf,
    pub platoon: PlatoonSection,
    pub traffic: TrafficSection,
    pub edca: EdcaParams,
    pub sweep: SweepSection,
    pub des: DesSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            rate_models: RateKind::ALL.to_vec(),
            models: ModelKind::BOTH.to_vec(),
            delay_budget_fraction: 0.10,
            output_dir: PathBuf::from("out"),
            platoon: PlatoonSection::default(),
            traffic: TrafficSection::default(),
            edca: EdcaParams::default(),
            sweep: SweepSection::default(),
            des: DesSection::default(),
        }
    }
}

fn check(errs: &mut Vec<FieldError>, ok: bool, path: &str, msg: String) {
    if !ok {
        errs.push(FieldError::new(path, msg));
    }
}

impl ScenarioConfig {
    /// Every invariant violation, with dotted field paths.
    pub fn field_errors(&self) -> Vec<FieldError> {
        let mut errs: Vec<FieldError> = self
            .edca
            .field_errors()
            .into_iter()
            .map(|e| FieldError::new(format!("edca.{}", e.path), e.message))
            .collect();
        let e = &mut errs;
        let p = &self.platoon;
        check(
            e,
            p.a > 0.0,
            "platoon.a",
            format!("must be positive, got {}", p.a),
        );
        check(
            e,
            p.fvd_l > 0.0,
            "platoon.fvd_l",
            format!("must be positive, got {}", p.fvd_l),
        );
        check(
            e,
            p.y_m >= 0.0,
            "platoon.y_m",
            format!("must be non-negative, got {}", p.y_m),
        );
        check(
            e,
            p.y_tilde > 0.0,
            "platoon.y_tilde",
            format!("must be positive, got {}", p.y_tilde),
        );
        check(
            e,
            p.lead_speed > 0.0,
            "platoon.lead_speed",
            format!("must be positive, got {}", p.lead_speed),
        );
        check(
            e,
            p.platoon_size != Some(0),
            "platoon.platoon_size",
            "must be at least 1".into(),
        );

        let t = &self.traffic;
        check(
            e,
            t.alpha.is_finite(),
            "traffic.alpha",
            format!("must be finite, got {}", t.alpha),
        );
        check(
            e,
            t.beta0.is_finite(),
            "traffic.beta0",
            format!("must be finite, got {}", t.beta0),
        );
        check(
            e,
            t.k > 0.0 && t.k.is_finite(),
            "traffic.k",
            format!("must be positive, got {}", t.k),
        );
        check(
            e,
            t.lambda1 > 0.0,
            "traffic.lambda1",
            format!("must be positive, got {}", t.lambda1),
        );
        if t.lambda1 > 0.0 && self.edca.slot > 0.0 {
            match arrival_probabilities(0.0, t.lambda1, self.edca.slot) {
                Err(Error::Config(inner)) => {
                    e.extend(
                        inner
                            .into_iter()
                            .map(|f| FieldError::new("traffic.lambda1", f.message)),
                    );
                }
                Err(other) => e.push(FieldError::new("traffic.lambda1", other.to_string())),
                Ok(_) => {}
            }
        }

        let s = &self.sweep;
        check(
            e,
            s.step > 0.0,
            "sweep.step",
            format!("must be positive, got {}", s.step),
        );
        check(
            e,
            s.start > 0.0,
            "sweep.start",
            format!("must be positive, got {}", s.start),
        );
        check(
            e,
            s.stop >= s.start,
            "sweep.stop",
            format!("must be at least start {}, got {}", s.start, s.stop),
        );
        let limit = 2.0 * self.edca.cs_range;
        check(
            e,
            s.stop < limit,
            "sweep.stop",
            format!("must be below 2·cs_range = {limit} m, got {}", s.stop),
        );

        let f = self.delay_budget_fraction;
        check(
            e,
            f > 0.0 && f <= 1.0,
            "delay_budget_fraction",
            format!("must lie in (0, 1], got {f}"),
        );

        let d = &self.des;
        check(
            e,
            d.replications >= 1,
            "des.replications",
            "must be at least 1".into(),
        );
        check(
            e,
            d.slots >= 1.0,
            "des.slots",
            format!("must be at least 1, got {}", d.slots),
        );
        check(
            e,
            d.warmup >= 0.0,
            "des.warmup",
            format!("must be non-negative, got {}", d.warmup),
        );
        check(
            e,
            d.n_vehicles.is_none_or(|n| n >= 2),
            "des.n_vehicles",
            "must be at least 2".into(),
        );
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.field_errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// Parses a TOML scenario, fills defaults and reports every violation.
pub fn validate_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let path = match e.span() {
            Some(span) => format!("line {}", text[..span.start].lines().count().max(1)),
            None => "config".into(),
        };
        Error::Config(vec![FieldError::new(path, msg)])
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a scenario file.
pub fn load_config(path: &std::path::Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(vec![FieldError::new(
            path.display().to_string(),
            e.to_string(),
        )])
    })?;
    validate_config(&text)
}
