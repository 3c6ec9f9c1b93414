use rayon::prelude::*;
use serde::Serialize;

use super::{run_simulation, SimConfig, SimStats};
use crate::edca::Ac;
use crate::error::{Error, Result};

/// Normal-approximation 97.5% quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Across-replication summary of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation across replications (zero for one run).
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

impl MetricSummary {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let half = Z95 * std / (n as f64).sqrt();
        Self {
            mean,
            std,
            ci_low: mean - half,
            ci_high: mean + half,
            n,
        }
    }

    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateStats {
    pub seeds: Vec<u64>,
    /// One entry per seed, in seed order.
    pub runs: Vec<SimStats>,
    /// `(name, summary)` in a fixed order.
    pub metrics: Vec<(String, MetricSummary)>,
}

impl AggregateStats {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }
}

/// Seeds `base, base+1, …` for `n` replications.
pub fn replication_seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base.wrapping_add(i)).collect()
}

/// `n_reps` independent replications seeded from `cfg.seed` upwards.
pub fn replicate(cfg: &SimConfig, n_reps: usize) -> Result<AggregateStats> {
    if n_reps == 0 {
        return Err(Error::InvalidParameter(
            "need at least one replication".into(),
        ));
    }
    replicate_with_seeds(cfg, &replication_seeds(cfg.seed, n_reps))
}

/// Replications run in parallel; the result does not depend on the thread
/// count.
pub fn replicate_with_seeds(cfg: &SimConfig, seeds: &[u64]) -> Result<AggregateStats> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one replication".into(),
        ));
    }
    cfg.validate()?;
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            run_simulation(&SimConfig {
                seed,
                ..cfg.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;

    type Getter = fn(&SimStats, Ac) -> f64;
    let per_ac: [(&str, Getter); 7] = [
        ("mean_access_s", |s, ac| s.mean_access(ac)),
        ("std_access_s", |s, ac| s.std_access(ac)),
        ("mean_sojourn_s", |s, ac| s.mean_sojourn(ac)),
        ("transmitted", |s, ac| {
            s.counts[ac.index()].transmitted as f64
        }),
        ("external_collisions", |s, ac| {
            s.counts[ac.index()].external_collisions as f64
        }),
        ("virtual_collisions", |s, ac| {
            s.counts[ac.index()].virtual_collisions as f64
        }),
        ("dropped", |s, ac| s.counts[ac.index()].dropped as f64),
    ];
    let mut metrics = Vec::new();
    for ac in Ac::BOTH {
        for (name, get) in per_ac {
            let xs: Vec<f64> = runs.iter().map(|r| get(r, ac)).collect();
            metrics.push((
                format!("{}_{name}", ac.name()),
                MetricSummary::from_samples(&xs),
            ));
        }
    }
    Ok(AggregateStats {
        seeds: seeds.to_vec(),
        runs,
        metrics,
    })
}
