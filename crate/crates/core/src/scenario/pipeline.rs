//! Headway sweep: platoon budget, traffic, EDCA analysis and optional
//! simulation, one grid cell per headway.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ModelKind, ScenarioConfig};
use super::config_hash;
use crate::des::{replicate, SimConfig};
use crate::edca::{
    cdf_fit, contender_count, delay_pgf, headway_rate_regression, reliability_exact,
    reliability_fit, solve_fixed_point, transmission_time, Ac, CdfFit, DelayDistribution,
    FixedPointOptions, FixedPointSolution, LinearFit, Loads,
};
use crate::error::{Error, Result};
use crate::platoon::critical_delay_at;
use crate::traffic::RateKind;

/// Delays (ms) at which the exact CDF is tabulated for plotting.
pub const CDF_GRID_MS: (f64, f64, usize) = (0.0, 30.0, 301);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalDelayRow {
    pub headway: f64,
    pub model: ModelKind,
    pub l: f64,
    pub v0: f64,
    pub d_tilde: f64,
    /// τ_cr (s).
    pub tau_cr: f64,
    /// Packet delay budget (s).
    pub budget: f64,
}

/// Reliability against one model's budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reliability {
    pub model: ModelKind,
    /// Budget (s).
    pub budget: f64,
    pub exact: f64,
    /// From the fitted shifted exponential; absent when the fit failed.
    pub fitted: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesComparison {
    pub n_vehicles: usize,
    pub replications: usize,
    /// Across-replication mean of the per-run mean access delay (s).
    pub mean: f64,
    pub mean_ci: (f64, f64),
    /// Across-replication mean of the per-run access-delay std (s).
    pub std: f64,
    pub mean_sojourn: f64,
    /// `(simulated − analytic) / analytic`.
    pub rel_delta_mean: f64,
    pub rel_delta_std: f64,
}

/// One (headway, rate model, AC) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub config_hash: String,
    pub headway: f64,
    pub rate_model: RateKind,
    pub ac: Ac,
    pub n_cs: usize,
    pub gap_probability: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub fixed_point: FixedPointSolution,
    /// Mean access delay (s).
    pub mean: f64,
    /// Standard deviation of the access delay (s).
    pub std: f64,
    pub drop_probability: f64,
    pub fit: Option<CdfFit>,
    pub reliability: Vec<Reliability>,
    pub des: Option<DesComparison>,
    /// `(delay ms, exact CDF)` on [`CDF_GRID_MS`].
    #[serde(skip)]
    pub cdf: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub headway: Option<f64>,
    pub rate_model: Option<RateKind>,
    pub stage: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regression {
    pub rate_model: RateKind,
    pub ac: Ac,
    pub points: usize,
    pub fit: LinearFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub config_hash: String,
    pub critical: Vec<CriticalDelayRow>,
    pub records: Vec<CellRecord>,
    pub regressions: Vec<Regression>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Default)]
struct HeadwayOutput {
    critical: Vec<CriticalDelayRow>,
    records: Vec<CellRecord>,
    diagnostics: Vec<Diagnostic>,
}

fn diag(headway: f64, rate: Option<RateKind>, stage: &'static str, e: &Error) -> Diagnostic {
    Diagnostic {
        headway: Some(headway),
        rate_model: rate,
        stage,
        message: e.to_string(),
    }
}

/// τ_cr and the budget of one model at one headway.
pub fn critical_delay_row(
    cfg: &ScenarioConfig,
    model: ModelKind,
    headway: f64,
) -> Result<CriticalDelayRow> {
    let m = cfg.platoon.model(model);
    let pt = critical_delay_at(&m, headway)?;
    Ok(CriticalDelayRow {
        headway,
        model,
        l: m.l,
        v0: pt.v0,
        d_tilde: pt.equilibrium.d_tilde,
        tau_cr: pt.tau_cr,
        budget: cfg.delay_budget_fraction * pt.tau_cr,
    })
}

fn tabulate(dist: &DelayDistribution) -> Vec<(f64, f64)> {
    let (lo, hi, n) = CDF_GRID_MS;
    (0..n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (x, dist.cdf_us(x * 1e3))
        })
        .collect()
}

/// Analytic records for both ACs at one headway and rate model, with
/// reliability against every budget in `budgets`.
pub fn analyze_cell(
    cfg: &ScenarioConfig,
    headway: f64,
    rate: RateKind,
    budgets: &[CriticalDelayRow],
) -> Result<(Vec<CellRecord>, Vec<Diagnostic>)> {
    let hash = config_hash(cfg)?;
    let mix = cfg.traffic.mix(rate);
    let (gap_p, lambda0) = mix.ac0_rate(headway, cfg.platoon.lead_speed)?;
    let n_cs = contender_count(headway, cfg.edca.cs_range, cfg.platoon.platoon_size)?;
    let loads = Loads {
        lambda0,
        lambda1: mix.lambda1,
    };
    let sol = solve_fixed_point(loads, &cfg.edca, n_cs, &FixedPointOptions::default())?;
    let shift = transmission_time(&cfg.edca);
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for ac in Ac::BOTH {
        let dist = delay_pgf(&sol, &cfg.edca, ac)?;
        let fit = match cdf_fit(&dist, shift) {
            Ok(f) => Some(f),
            Err(e) => {
                diagnostics.push(diag(headway, Some(rate), "fit", &e));
                None
            }
        };
        let reliability = budgets
            .iter()
            .map(|b| Reliability {
                model: b.model,
                budget: b.budget,
                exact: reliability_exact(&dist, b.budget),
                fitted: fit.as_ref().map(|f| reliability_fit(f, b.budget)),
            })
            .collect();
        records.push(CellRecord {
            config_hash: hash.clone(),
            headway,
            rate_model: rate,
            ac,
            n_cs,
            gap_probability: gap_p,
            lambda0,
            lambda1: mix.lambda1,
            fixed_point: sol.clone(),
            mean: dist.mean_s(),
            std: dist.std_s(),
            drop_probability: dist.drop_probability(),
            fit,
            reliability,
            des: None,
            cdf: tabulate(&dist),
        });
    }
    Ok((records, diagnostics))
}

/// Simulation settings for one cell under the scenario's `[des]` section.
pub fn sim_config(cfg: &ScenarioConfig, headway: f64, lambda0: f64, n_cs: usize) -> SimConfig {
    let d = &cfg.des;
    SimConfig {
        n_vehicles: d.n_vehicles.unwrap_or(n_cs).max(2),
        headway,
        edca: cfg.edca,
        lambda0,
        lambda1: cfg.traffic.lambda1,
        seed: d.seed,
        duration: d.warmup + d.slots * cfg.edca.slot,
        warmup: d.warmup,
        topology: d.topology,
    }
}

fn attach_des(cfg: &ScenarioConfig, records: &mut [CellRecord]) -> Result<()> {
    let Some(first) = records.first() else {
        return Ok(());
    };
    let sim = sim_config(cfg, first.headway, first.lambda0, first.n_cs);
    let agg = replicate(&sim, cfg.des.replications)?;
    for r in records.iter_mut() {
        let name = r.ac.name();
        let metric = |m: &str| agg.metric(&format!("{name}_{m}")).copied();
        let (Some(mean), Some(std), Some(soj)) = (
            metric("mean_access_s"),
            metric("std_access_s"),
            metric("mean_sojourn_s"),
        ) else {
            continue;
        };
        r.des = Some(DesComparison {
            n_vehicles: sim.n_vehicles,
            replications: cfg.des.replications,
            mean: mean.mean,
            mean_ci: (mean.ci_low, mean.ci_high),
            std: std.mean,
            mean_sojourn: soj.mean,
            rel_delta_mean: (mean.mean - r.mean) / r.mean,
            rel_delta_std: (std.mean - r.std) / r.std,
        });
    }
    Ok(())
}

fn run_headway(cfg: &ScenarioConfig, headway: f64) -> HeadwayOutput {
    let mut out = HeadwayOutput::default();
    for &model in &cfg.models {
        match critical_delay_row(cfg, model, headway) {
            Ok(row) => out.critical.push(row),
            Err(e) => out
                .diagnostics
                .push(diag(headway, None, "critical_delay", &e)),
        }
    }
    for &rate in &cfg.rate_models {
        match analyze_cell(cfg, headway, rate, &out.critical) {
            Ok((mut records, diags)) => {
                out.diagnostics.extend(diags);
                if cfg.des.enabled {
                    if let Err(e) = attach_des(cfg, &mut records) {
                        out.diagnostics
                            .push(diag(headway, Some(rate), "simulation", &e));
                    }
                }
                out.records.extend(records);
            }
            Err(e) => out
                .diagnostics
                .push(diag(headway, Some(rate), "analysis", &e)),
        }
    }
    out
}

/// Runs every grid cell on up to `workers` threads (all cores if `None`).
/// Failures are recorded as diagnostics and never abort other cells.
pub fn run_pipeline(cfg: &ScenarioConfig, workers: Option<usize>) -> Result<ScenarioResult> {
    cfg.validate()?;
    let hash = config_hash(cfg)?;
    let headways = cfg.sweep.headways();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let per_headway: Vec<HeadwayOutput> =
        pool.install(|| headways.par_iter().map(|&y| run_headway(cfg, y)).collect());

    let mut result = ScenarioResult {
        config_hash: hash,
        critical: Vec::new(),
        records: Vec::new(),
        regressions: Vec::new(),
        diagnostics: Vec::new(),
    };
    for h in per_headway {
        result.critical.extend(h.critical);
        result.records.extend(h.records);
        result.diagnostics.extend(h.diagnostics);
    }
    for &rate in &cfg.rate_models {
        for ac in Ac::BOTH {
            let pts: Vec<(f64, f64)> = result
                .records
                .iter()
                .filter(|r| r.rate_model == rate && r.ac == ac)
                .filter_map(|r| r.fit.map(|f| (r.headway, f.rate)))
                .collect();
            match headway_rate_regression(&pts) {
                Ok(fit) => result.regressions.push(Regression {
                    rate_model: rate,
                    ac,
                    points: pts.len(),
                    fit,
                }),
                Err(e) => result.diagnostics.push(Diagnostic {
                    headway: None,
                    rate_model: Some(rate),
                    stage: "regression",
                    message: format!("{ac}: {e}"),
                }),
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edca::{delay_distribution, SlotTiming};
    use crate::scenario::validate_config;

    fn linear_only(extra: &str) -> ScenarioConfig {
        validate_config(&format!("rate_models = [\"linear\"]\n{extra}")).unwrap()
    }

    #[test]
    fn one_record_per_cell() {
        let cfg = ScenarioConfig::default();
        let res = run_pipeline(&cfg, Some(1)).unwrap();
        assert_eq!(res.records.len(), 9 * 4 * 2);
        assert_eq!(res.critical.len(), 9 * 2);
        assert!(res.records.iter().all(|r| r.config_hash == res.config_hash));
        assert_eq!(res.regressions.len(), 8);
    }

    #[test]
    fn no_rate_models_means_budgets_only() {
        let cfg = validate_config("rate_models = []\n").unwrap();
        let res = run_pipeline(&cfg, Some(1)).unwrap();
        assert!(res.records.is_empty());
        assert_eq!(res.critical.len(), 18);
        assert!(res.regressions.is_empty());
    }

    #[test]
    fn budget_is_the_configured_fraction() {
        let cfg = linear_only("delay_budget_fraction = 0.25\n");
        let row = critical_delay_row(&cfg, ModelKind::Movm, 5.0).unwrap();
        assert!((row.budget - 0.25 * row.tau_cr).abs() < 1e-15);
        assert_eq!(row.l, 0.0);
    }

    #[test]
    fn record_matches_direct_composition() {
        let cfg = linear_only("");
        let rows: Vec<_> = ModelKind::BOTH
            .iter()
            .map(|&m| critical_delay_row(&cfg, m, 5.0).unwrap())
            .collect();
        let (recs, _) = analyze_cell(&cfg, 5.0, RateKind::Linear, &rows).unwrap();
        let r = &recs[0];
        let direct =
            delay_distribution(&cfg.edca, Ac::Ac0, r.fixed_point.pb[0], r.fixed_point.pv1).unwrap();
        assert_eq!(r.mean, direct.mean_s());
        assert_eq!(r.n_cs, 281);
        let fvd = r
            .reliability
            .iter()
            .find(|x| x.model == ModelKind::Fvd)
            .unwrap();
        assert_eq!(fvd.exact, reliability_exact(&direct, rows[0].budget));
        assert_eq!(r.fit.unwrap().shift, transmission_time(&cfg.edca));
        // tabulated CDF ends at the grid limit and is monotone
        assert!(r.cdf.windows(2).all(|w| w[1].1 >= w[0].1));
        assert_eq!(r.cdf.last().unwrap().0, 30.0);
    }

    #[test]
    fn failing_cells_become_diagnostics() {
        // the logarithmic model is undefined at P = 1, which a huge β₀ forces
        let cfg = validate_config(
            "rate_models = [\"linear\", \"logarithmic\"]\n[traffic]\nbeta0 = 1e6\nk = 1.0\n",
        )
        .unwrap();
        let res = run_pipeline(&cfg, Some(1)).unwrap();
        assert!(res.records.iter().all(|r| r.rate_model == RateKind::Linear));
        assert!(res
            .diagnostics
            .iter()
            .any(|d| d.rate_model == Some(RateKind::Logarithmic) && d.stage == "analysis"));
        assert_eq!(res.records.len(), 9 * 2, "{:?}", res.diagnostics);
    }

    #[test]
    fn sweep_is_deterministic_across_worker_counts() {
        let cfg = linear_only("[sweep]\nstart = 3.0\nstop = 6.0\n");
        let a = run_pipeline(&cfg, Some(1)).unwrap();
        let b = run_pipeline(&cfg, Some(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn simulation_deltas_are_attached_when_enabled() {
        let cfg = linear_only(
            "[sweep]\nstart = 300.0\nstop = 300.0\n[des]\nenabled = true\nreplications = 2\nslots = 20000\nwarmup = 0.05\n",
        );
        let res = run_pipeline(&cfg, Some(1)).unwrap();
        assert_eq!(res.records.len(), 2);
        for r in &res.records {
            let d = r.des.expect("simulation attached");
            assert_eq!(d.n_vehicles, r.n_cs.max(2));
            assert!((d.rel_delta_mean - (d.mean - r.mean) / r.mean).abs() < 1e-15);
            assert!(d.mean >= SlotTiming::new(&cfg.edca).transmission_us as f64 * 1e-6);
        }
    }
}
