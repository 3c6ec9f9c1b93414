//! Command-line front end: critical delays, gap acceptance, single-point
//! analysis, simulation and full headway sweeps.
//!
//! Exit codes: 0 on success, 1 for configuration or I/O problems, 2 when a
//! numerical stage fails.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use platoon_edca::des::{replicate, write_aggregate_csv, write_manifest, write_packets_csv};
use platoon_edca::edca::Ac;
use platoon_edca::scenario::{
    analyze_cell, config_hash, critical_delay_row, load_config, run_pipeline, sim_config,
    write_atomic, write_reports, ModelKind, ScenarioConfig,
};
use platoon_edca::traffic::{gap_probability, lambda0, RateKind};
use platoon_edca::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "platoon-edca",
    version,
    about = "Platoon delay budgets and 802.11p EDCA access delay"
)]
struct Cli {
    /// Scenario file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulation seed; overrides `des.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and replications.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Car-following models whose budgets are reported.
    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Fvd,
    Movm,
    Both,
}

impl ModelArg {
    fn kinds(self) -> Vec<ModelKind> {
        match self {
            ModelArg::Fvd => vec![ModelKind::Fvd],
            ModelArg::Movm => vec![ModelKind::Movm],
            ModelArg::Both => ModelKind::BOTH.to_vec(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum RateArg {
    Linear,
    Quadratic,
    Sigmoidal,
    Logarithmic,
}

impl From<RateArg> for RateKind {
    fn from(r: RateArg) -> Self {
        match r {
            RateArg::Linear => RateKind::Linear,
            RateArg::Quadratic => RateKind::Quadratic,
            RateArg::Sigmoidal => RateKind::Sigmoidal,
            RateArg::Logarithmic => RateKind::Logarithmic,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Critical delay and packet delay budget per headway (CSV on stdout).
    CriticalDelay {
        /// Single headway (m) instead of the configured grid.
        #[arg(long)]
        headway: Option<f64>,
    },
    /// Gap-acceptance probability and AC0 rate per headway (CSV on stdout).
    Gap {
        #[arg(long)]
        headway: Option<f64>,
    },
    /// Analytic EDCA results at one headway (CSV on stdout).
    Analyze {
        #[arg(long)]
        headway: f64,
        #[arg(long, value_enum, default_value = "linear")]
        rate_model: RateArg,
    },
    /// Simulate one headway and write packets, aggregate and manifest files.
    Simulate {
        #[arg(long)]
        headway: f64,
        #[arg(long, value_enum, default_value = "linear")]
        rate_model: RateArg,
        /// Replications; overrides `des.replications`.
        #[arg(long)]
        reps: Option<usize>,
        /// Simulated slots per replication; overrides `des.slots`.
        #[arg(long)]
        slots: Option<f64>,
    },
    /// Full sweep; writes every figure CSV into the output directory.
    Sweep,
    /// Check a scenario file and report every problem.
    Validate,
}

fn load(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.des.seed = seed;
    }
    if let Some(m) = cli.model {
        cfg.models = m.kinds();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn headways(cfg: &ScenarioConfig, single: Option<f64>) -> Result<Vec<f64>> {
    match single {
        Some(h) if h > 0.0 && h.is_finite() => Ok(vec![h]),
        Some(h) => Err(Error::InvalidParameter(format!(
            "headway must be positive, got {h}"
        ))),
        None => Ok(cfg.sweep.headways()),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Validate => {
            writeln!(out, "ok {}", config_hash(&cfg)?)?;
        }
        Command::CriticalDelay { headway } => {
            writeln!(out, "headway_m,model,l,v0,tau_cr_s,budget_ms")?;
            for y in headways(&cfg, *headway)? {
                for &m in &cfg.models {
                    let r = critical_delay_row(&cfg, m, y)?;
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        y,
                        m,
                        r.l,
                        r.v0,
                        r.tau_cr,
                        r.budget * 1e3
                    )?;
                }
            }
        }
        Command::Gap { headway } => {
            let kinds = &cfg.rate_models;
            let names: Vec<String> = kinds.iter().map(|k| format!("lambda0_{k}")).collect();
            writeln!(
                out,
                "headway_m,time_gap_s,gap_probability,{}",
                names.join(",")
            )?;
            for y in headways(&cfg, *headway)? {
                let mix = cfg.traffic.mix(RateKind::Linear);
                let p = gap_probability(y, cfg.platoon.lead_speed, &mix.gap)?;
                let mut row = vec![
                    y.to_string(),
                    (y / cfg.platoon.lead_speed).to_string(),
                    p.to_string(),
                ];
                for &k in kinds {
                    row.push(lambda0(p, &cfg.traffic.mix(k).rate)?.to_string());
                }
                writeln!(out, "{}", row.join(","))?;
            }
        }
        Command::Analyze {
            headway,
            rate_model,
        } => {
            let budgets = cfg
                .models
                .iter()
                .map(|&m| critical_delay_row(&cfg, m, *headway))
                .collect::<Result<Vec<_>>>()?;
            let (records, diags) = analyze_cell(&cfg, *headway, (*rate_model).into(), &budgets)?;
            for d in diags {
                eprintln!("warning: {}: {}", d.stage, d.message);
            }
            let models: Vec<String> = budgets
                .iter()
                .flat_map(|b| {
                    [
                        format!("budget_{}_ms", b.model),
                        format!("reliability_exact_{}", b.model),
                        format!("reliability_fit_{}", b.model),
                    ]
                })
                .collect();
            writeln!(
                out,
                "headway_m,rate_model,ac,n_cs,gap_probability,lambda0,pb,pv1,rho,iterations,mean_ms,std_ms,fit_rate_per_ms,{}",
                models.join(",")
            )?;
            for r in &records {
                let i = r.ac.index();
                let fp = &r.fixed_point;
                let mut row = vec![
                    r.headway.to_string(),
                    r.rate_model.to_string(),
                    i.to_string(),
                    r.n_cs.to_string(),
                    r.gap_probability.to_string(),
                    r.lambda0.to_string(),
                    fp.pb[i].to_string(),
                    fp.pv1.to_string(),
                    fp.rho[i].to_string(),
                    fp.iterations.to_string(),
                    (r.mean * 1e3).to_string(),
                    (r.std * 1e3).to_string(),
                    r.fit.map(|f| f.rate.to_string()).unwrap_or_default(),
                ];
                for x in &r.reliability {
                    row.push((x.budget * 1e3).to_string());
                    row.push(x.exact.to_string());
                    row.push(x.fitted.map(|v| v.to_string()).unwrap_or_default());
                }
                writeln!(out, "{}", row.join(","))?;
            }
        }
        Command::Simulate {
            headway,
            rate_model,
            reps,
            slots,
        } => {
            let mut cfg = cfg.clone();
            if let Some(r) = reps {
                cfg.des.replications = *r;
            }
            if let Some(s) = slots {
                cfg.des.slots = *s;
            }
            cfg.validate()?;
            let (records, _) = analyze_cell(&cfg, *headway, (*rate_model).into(), &[])?;
            let first = &records[0];
            let sim = sim_config(&cfg, *headway, first.lambda0, first.n_cs);
            let agg = with_workers(cli.workers, || replicate(&sim, cfg.des.replications))??;
            let dir = &cfg.output_dir;
            let mut buf = Vec::new();
            write_packets_csv(&mut buf, &agg.runs[0])?;
            write_atomic(&dir.join("packets.csv"), &buf)?;
            buf.clear();
            write_aggregate_csv(&mut buf, &agg)?;
            write_atomic(&dir.join("aggregate.csv"), &buf)?;
            buf.clear();
            write_manifest(&mut buf, &sim, &agg.seeds)?;
            write_atomic(&dir.join("manifest.txt"), &buf)?;
            writeln!(
                out,
                "ac,analytic_mean_ms,sim_mean_ms,analytic_std_ms,sim_std_ms,sim_sojourn_ms"
            )?;
            for r in &records {
                let metric = |m: &str| {
                    agg.metric(&format!("{}_{m}", r.ac.name()))
                        .map(|s| s.mean * 1e3)
                };
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.ac.index(),
                    r.mean * 1e3,
                    metric("mean_access_s").unwrap_or(f64::NAN),
                    r.std * 1e3,
                    metric("std_access_s").unwrap_or(f64::NAN),
                    metric("mean_sojourn_s").unwrap_or(f64::NAN),
                )?;
            }
            let starved = Ac::BOTH.iter().filter(|ac| {
                agg.runs
                    .iter()
                    .all(|run| run.access_delays(**ac).is_empty())
            });
            for ac in starved {
                eprintln!("warning: no {ac} packet completed transmission after warmup");
            }
        }
        Command::Sweep => {
            let res = run_pipeline(&cfg, cli.workers)?;
            for d in &res.diagnostics {
                eprintln!("warning: {}: {}", d.stage, d.message);
            }
            for p in write_reports(&res, &cfg.models, &cfg.output_dir)? {
                writeln!(out, "{}", p.display())?;
            }
        }
    }
    Ok(())
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w.max(1));
    }
    let pool = b
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(pool.install(f))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() || matches!(e, Error::Io(_)) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
