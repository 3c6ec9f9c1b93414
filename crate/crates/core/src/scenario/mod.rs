//! Configuration, headway sweeps and CSV reports.
//!
//! A sweep runs, per headway, the platoon stage (τ_cr and the packet delay
//! budget for FVD and MOVM), the traffic stage (gap acceptance and λ₀ per
//! rate model), the analytic EDCA stage and optionally the simulator. Every
//! output row carries a hash of the configuration that produced it.

mod config;
mod pipeline;
mod report;

pub use config::{
    load_config, validate_config, DesSection, ModelKind, PlatoonSection, ScenarioConfig,
    SweepSection, TrafficSection,
};
pub use pipeline::{
    analyze_cell, critical_delay_row, run_pipeline, sim_config, CellRecord, CriticalDelayRow,
    DesComparison, Diagnostic, Regression, Reliability, ScenarioResult, CDF_GRID_MS,
};
pub use report::{write_atomic, write_reports};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// First 16 hex digits of the SHA-256 of the value's TOML serialisation.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let text = toml::to_string(value).map_err(|e| Error::Io(e.to_string()))?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}
