//! Discrete-event simulator of broadcast 802.11p stations with two EDCA
//! access categories.
//!
//! The engine only visits instants at which something can happen: packet
//! arrivals and transmission starts. All contention decisions sit on the slot
//! grid `idle_from + SIFS + m·σ` of the idle period each station senses, so
//! skipping the idle slots in between gives the same sample path as a loop
//! over every 13 µs slot.
//!
//! Each station keeps a FIFO queue per AC. The head-of-line packet draws a
//! backoff counter, waits for its AIFS, counts down on idle slots and
//! freezes while the medium is busy. When both ACs of a station reach zero in
//! the same slot, AC0 transmits and AC1 suffers a virtual collision: its
//! window doubles up to stage M and the packet is dropped after L of them.
//! Transmissions are broadcasts of fixed duration with no retry after an
//! external collision.

mod engine;
mod output;
mod replicate;

pub use engine::run_simulation;
pub use output::{write_aggregate_csv, write_manifest, write_packets_csv, RNG_ALGORITHM};
pub use replicate::{
    replicate, replicate_with_seeds, replication_seeds, AggregateStats, MetricSummary,
};

use serde::{Deserialize, Serialize};

use crate::edca::{contender_count, Ac, EdcaParams, SlotTiming};
use crate::error::{Error, FieldError, Result};

/// Which stations hear each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Every station senses every other one.
    #[default]
    SingleDomain,
    /// Stations sense each other within `cs_range` of the EDCA parameters.
    LineWithRanges,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_vehicles: usize,
    /// Spacing between consecutive stations (m).
    pub headway: f64,
    pub edca: EdcaParams,
    /// Poisson AC0 rate per station (packets/s).
    pub lambda0: f64,
    /// Periodic AC1 rate per station (packets/s); zero disables AC1.
    pub lambda1: f64,
    pub seed: u64,
    /// Simulated time (s).
    pub duration: f64,
    /// Packets arriving before this time (s) are not sampled.
    pub warmup: f64,
    pub topology: Topology,
}

/// Simulated time used when no duration is given: one million slots.
pub const DEFAULT_SLOTS: f64 = 1e6;

impl SimConfig {
    /// Scenario with as many stations as fit in the carrier-sense range at
    /// `headway`, simulated for one million slots after a one second warmup.
    pub fn for_headway(
        headway: f64,
        edca: EdcaParams,
        lambda0: f64,
        lambda1: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = contender_count(headway, edca.cs_range, None)?;
        let warmup = 1.0;
        Ok(Self {
            n_vehicles: n,
            headway,
            duration: warmup + DEFAULT_SLOTS * edca.slot,
            edca,
            lambda0,
            lambda1,
            seed,
            warmup,
            topology: Topology::SingleDomain,
        })
    }

    pub fn field_errors(&self) -> Vec<FieldError> {
        let mut errs: Vec<FieldError> = self
            .edca
            .field_errors()
            .into_iter()
            .map(|e| FieldError::new(format!("edca.{}", e.path), e.message))
            .collect();
        if self.n_vehicles < 2 {
            errs.push(FieldError::new(
                "n_vehicles",
                format!("need at least 2, got {}", self.n_vehicles),
            ));
        }
        if !(self.headway > 0.0 && self.headway.is_finite()) {
            errs.push(FieldError::new(
                "headway",
                format!("must be positive, got {}", self.headway),
            ));
        }
        for (name, v) in [("lambda0", self.lambda0), ("lambda1", self.lambda1)] {
            if !(v >= 0.0 && v.is_finite()) {
                errs.push(FieldError::new(
                    name,
                    format!("must be a non-negative rate, got {v}"),
                ));
            }
        }
        if self.lambda1 > 1e6 {
            errs.push(FieldError::new(
                "lambda1",
                "period shorter than one microsecond",
            ));
        }
        if !(self.warmup >= 0.0) {
            errs.push(FieldError::new(
                "warmup",
                format!("must be non-negative, got {}", self.warmup),
            ));
        }
        if !(self.duration > self.warmup && self.duration.is_finite()) {
            errs.push(FieldError::new(
                "duration",
                format!("must exceed warmup {}, got {}", self.warmup, self.duration),
            ));
        }
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

/// Fate of a sampled packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    /// Transmitted without overlap.
    Clean,
    /// Transmitted while another station in range was also transmitting.
    Collided,
    /// AC1 packet discarded after too many virtual collisions.
    Dropped,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Clean => "clean",
            Outcome::Collided => "collided",
            Outcome::Dropped => "dropped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PacketRecord {
    pub station: usize,
    pub ac: Ac,
    pub arrival_us: u64,
    /// Start of contention: the first slot boundary after the packet reached
    /// the head of its queue, or that instant itself if the medium was busy.
    pub hol_us: u64,
    /// End of transmission, or the drop instant.
    pub done_us: u64,
    pub outcome: Outcome,
    /// Busy periods that interrupted the backoff countdown.
    pub freezes: u32,
}

impl PacketRecord {
    pub fn access_us(&self) -> u64 {
        self.done_us - self.hol_us
    }

    pub fn sojourn_us(&self) -> u64 {
        self.done_us - self.arrival_us
    }
}

/// Whole-run counters for one AC, warmup included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct AcCounts {
    pub arrived: u64,
    pub transmitted: u64,
    pub external_collisions: u64,
    pub virtual_collisions: u64,
    pub dropped: u64,
    /// Packets still queued (head of line included) when the run ends.
    pub queued_at_end: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    /// Packets that arrived after warmup and left the queue before the end,
    /// in order of departure.
    pub records: Vec<PacketRecord>,
    pub counts: [AcCounts; 2],
    pub timing: SlotTiming,
    pub end_us: u64,
    pub warmup_us: u64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl SimStats {
    fn transmitted(&self, ac: Ac) -> impl Iterator<Item = &PacketRecord> {
        self.records
            .iter()
            .filter(move |r| r.ac == ac && r.outcome != Outcome::Dropped)
    }

    /// Access delays (s) of sampled packets that went on air.
    pub fn access_delays(&self, ac: Ac) -> Vec<f64> {
        self.transmitted(ac)
            .map(|r| r.access_us() as f64 * 1e-6)
            .collect()
    }

    /// Sojourn delays (s) of sampled packets that went on air.
    pub fn sojourn_delays(&self, ac: Ac) -> Vec<f64> {
        self.transmitted(ac)
            .map(|r| r.sojourn_us() as f64 * 1e-6)
            .collect()
    }

    pub fn mean_access(&self, ac: Ac) -> f64 {
        mean_std(&self.access_delays(ac)).0
    }

    /// Population standard deviation of the access delay (s).
    pub fn std_access(&self, ac: Ac) -> f64 {
        mean_std(&self.access_delays(ac)).1
    }

    pub fn mean_sojourn(&self, ac: Ac) -> f64 {
        mean_std(&self.sojourn_delays(ac)).0
    }

    pub fn sampled(&self, ac: Ac, outcome: Outcome) -> usize {
        self.records
            .iter()
            .filter(|r| r.ac == ac && r.outcome == outcome)
            .count()
    }
}
