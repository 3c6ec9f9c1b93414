//! Plain-text artefacts of a simulation run.

use std::io::Write;

use super::{AggregateStats, SimConfig, SimStats};
use crate::error::Result;
use crate::scenario::config_hash;

/// Generator behind every random stream, recorded in run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64(seed), stream 3k+{0 backoff, 1 AC0 arrivals, 2 AC1 phase} for station k";

/// One row per sampled packet.
pub fn write_packets_csv<W: Write>(w: W, stats: &SimStats) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "station",
        "ac",
        "arrival_us",
        "hol_us",
        "done_us",
        "outcome",
    ])?;
    for r in &stats.records {
        out.write_record([
            r.station.to_string(),
            r.ac.index().to_string(),
            r.arrival_us.to_string(),
            r.hol_us.to_string(),
            r.done_us.to_string(),
            r.outcome.name().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per metric with its across-replication summary.
pub fn write_aggregate_csv<W: Write>(w: W, agg: &AggregateStats) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["metric", "mean", "std", "ci_low", "ci_high", "n"])?;
    for (name, m) in &agg.metrics {
        out.write_record([
            name.clone(),
            format!("{:.9e}", m.mean),
            format!("{:.9e}", m.std),
            format!("{:.9e}", m.ci_low),
            format!("{:.9e}", m.ci_high),
            m.n.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// The configuration as TOML, preceded by the seeds, parameter hash and
/// generator identity.
pub fn write_manifest<W: Write>(mut w: W, cfg: &SimConfig, seeds: &[u64]) -> Result<()> {
    let body = toml::to_string(cfg).map_err(|e| crate::Error::Io(e.to_string()))?;
    writeln!(w, "# platoon-edca simulation manifest")?;
    writeln!(w, "# config_hash = {}", config_hash(cfg)?)?;
    writeln!(w, "# seeds = {seeds:?}")?;
    writeln!(w, "# rng = {RNG_ALGORITHM}")?;
    w.write_all(body.as_bytes())?;
    Ok(())
}
