//! One CSV per figure, each row tagged with the configuration hash. Times
//! are in milliseconds unless a column name says otherwise.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::ModelKind;
use super::pipeline::{CellRecord, ScenarioResult};
use crate::error::Result;

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn ms(seconds: f64) -> String {
    format!("{}", seconds * 1e3)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        let mut h = vec!["config_hash"];
        h.extend_from_slice(header);
        Self {
            header: h,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, hash: &str, row: Vec<String>) {
        let mut r = vec![hash.to_string()];
        r.extend(row);
        self.rows.push(r);
    }

    fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| crate::Error::Io(e.to_string()))
    }
}

fn cell_key(r: &CellRecord) -> Vec<String> {
    vec![
        r.headway.to_string(),
        r.rate_model.to_string(),
        r.ac.index().to_string(),
    ]
}

fn reliability_table(res: &ScenarioResult, model: ModelKind) -> Table {
    let mut t = Table::new(&[
        "headway_m",
        "rate_model",
        "ac",
        "budget_ms",
        "reliability_exact",
        "reliability_fit",
    ]);
    for r in &res.records {
        if let Some(x) = r.reliability.iter().find(|x| x.model == model) {
            let mut row = cell_key(r);
            row.extend([ms(x.budget), x.exact.to_string(), opt(x.fitted)]);
            t.push(&res.config_hash, row);
        }
    }
    t
}

/// Every table of the run, by file name. Figure files for stages that did
/// not run are omitted.
fn tables(res: &ScenarioResult, models: &[ModelKind]) -> Vec<(&'static str, Table)> {
    let h = &res.config_hash;
    let mut out = Vec::new();

    let mut fig2 = Table::new(&[
        "headway_m",
        "model",
        "l",
        "v0",
        "d_tilde",
        "tau_cr_s",
        "budget_ms",
    ]);
    for c in &res.critical {
        fig2.push(
            h,
            vec![
                c.headway.to_string(),
                c.model.to_string(),
                c.l.to_string(),
                c.v0.to_string(),
                c.d_tilde.to_string(),
                c.tau_cr.to_string(),
                ms(c.budget),
            ],
        );
    }
    out.push(("fig2_critical_delay.csv", fig2));

    let mut diagnostics = Table::new(&["headway_m", "rate_model", "stage", "message"]);
    for d in &res.diagnostics {
        diagnostics.push(
            h,
            vec![
                opt(d.headway),
                d.rate_model.map(|r| r.to_string()).unwrap_or_default(),
                d.stage.to_string(),
                d.message.clone(),
            ],
        );
    }
    out.push(("diagnostics.csv", diagnostics));

    if res.records.is_empty() {
        return out;
    }

    let mut fig3 = Table::new(&[
        "headway_m",
        "rate_model",
        "ac",
        "lambda0",
        "n_cs",
        "mean_ms",
        "des_mean_ms",
    ]);
    let mut fig4 = Table::new(&[
        "headway_m",
        "rate_model",
        "ac",
        "lambda0",
        "n_cs",
        "std_ms",
        "des_std_ms",
    ]);
    let mut fig5 = Table::new(&[
        "headway_m",
        "rate_model",
        "ac",
        "shift_ms",
        "rate_per_ms",
        "rms_error",
        "delay_ms",
        "cdf_exact",
        "cdf_fit",
    ]);
    for r in &res.records {
        let mut row = cell_key(r);
        row.extend([
            r.lambda0.to_string(),
            r.n_cs.to_string(),
            ms(r.mean),
            r.des.map(|d| ms(d.mean)).unwrap_or_default(),
        ]);
        fig3.push(h, row);
        let mut row = cell_key(r);
        row.extend([
            r.lambda0.to_string(),
            r.n_cs.to_string(),
            ms(r.std),
            r.des.map(|d| ms(d.std)).unwrap_or_default(),
        ]);
        fig4.push(h, row);
        for &(x, f) in &r.cdf {
            let mut row = cell_key(r);
            row.extend([
                r.fit.map(|f| ms(f.shift)).unwrap_or_default(),
                opt(r.fit.map(|f| f.rate)),
                opt(r.fit.map(|f| f.rms_error)),
                x.to_string(),
                f.to_string(),
                opt(r.fit.map(|fit| fit.cdf(x * 1e-3))),
            ]);
            fig5.push(h, row);
        }
    }
    out.push(("fig3_mean_delay.csv", fig3));
    out.push(("fig4_std.csv", fig4));
    out.push(("fig5_cdf.csv", fig5));
    if models.contains(&ModelKind::Fvd) {
        out.push((
            "fig7_reliability_fvd.csv",
            reliability_table(res, ModelKind::Fvd),
        ));
    }
    if models.contains(&ModelKind::Movm) {
        out.push((
            "fig8_reliability_movm.csv",
            reliability_table(res, ModelKind::Movm),
        ));
    }

    let mut t5 = Table::new(&["rate_model", "ac", "points", "slope", "intercept"]);
    for g in &res.regressions {
        t5.push(
            h,
            vec![
                g.rate_model.to_string(),
                g.ac.index().to_string(),
                g.points.to_string(),
                g.fit.slope.to_string(),
                g.fit.intercept.to_string(),
            ],
        );
    }
    out.push(("table5_regression.csv", t5));

    let mut all = Table::new(&[
        "headway_m",
        "rate_model",
        "ac",
        "n_cs",
        "gap_probability",
        "lambda0",
        "lambda1",
        "omega",
        "pb",
        "pv1",
        "rho",
        "rho_clamped",
        "iterations",
        "residual",
        "mean_ms",
        "std_ms",
        "drop_probability",
        "fit_rate_per_ms",
        "fit_rms_error",
        "des_n_vehicles",
        "des_mean_ms",
        "des_std_ms",
        "des_sojourn_ms",
        "des_rel_delta_mean",
        "des_rel_delta_std",
    ]);
    for r in &res.records {
        let i = r.ac.index();
        let fp = &r.fixed_point;
        let mut row = cell_key(r);
        row.extend([
            r.n_cs.to_string(),
            r.gap_probability.to_string(),
            r.lambda0.to_string(),
            r.lambda1.to_string(),
            fp.omega[i].to_string(),
            fp.pb[i].to_string(),
            fp.pv1.to_string(),
            fp.rho[i].to_string(),
            fp.rho_clamped[i].to_string(),
            fp.iterations.to_string(),
            fp.residual.to_string(),
            ms(r.mean),
            ms(r.std),
            r.drop_probability.to_string(),
            opt(r.fit.map(|f| f.rate)),
            opt(r.fit.map(|f| f.rms_error)),
            r.des.map(|d| d.n_vehicles.to_string()).unwrap_or_default(),
            r.des.map(|d| ms(d.mean)).unwrap_or_default(),
            r.des.map(|d| ms(d.std)).unwrap_or_default(),
            r.des.map(|d| ms(d.mean_sojourn)).unwrap_or_default(),
            opt(r.des.map(|d| d.rel_delta_mean)),
            opt(r.des.map(|d| d.rel_delta_std)),
        ]);
        all.push(h, row);
    }
    out.push(("records.csv", all));
    out
}

/// Writes the run's CSVs into `dir`, each atomically, and returns their
/// paths.
pub fn write_reports(
    res: &ScenarioResult,
    models: &[ModelKind],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (name, table) in tables(res, models) {
        let path = dir.join(name);
        write_atomic(&path, &table.to_bytes()?)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{run_pipeline, validate_config, ScenarioConfig};

    fn names(paths: &[PathBuf]) -> Vec<String> {
        paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect()
    }

    #[test]
    fn full_run_writes_every_figure() {
        let cfg = ScenarioConfig::default();
        let res = run_pipeline(&cfg, Some(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_reports(&res, &cfg.models, dir.path()).unwrap();
        let got = names(&paths);
        for want in [
            "fig2_critical_delay.csv",
            "fig3_mean_delay.csv",
            "fig4_std.csv",
            "fig5_cdf.csv",
            "fig7_reliability_fvd.csv",
            "fig8_reliability_movm.csv",
            "table5_regression.csv",
            "records.csv",
            "diagnostics.csv",
        ] {
            assert!(got.contains(&want.to_string()), "{want} missing");
        }
        for p in &paths {
            let mut rd = csv::Reader::from_path(p).unwrap();
            assert_eq!(&rd.headers().unwrap()[0], "config_hash");
            for row in rd.records() {
                assert_eq!(&row.unwrap()[0], res.config_hash.as_str());
            }
        }
        let fig3 = fs::read_to_string(dir.path().join("fig3_mean_delay.csv")).unwrap();
        assert_eq!(fig3.lines().count(), 1 + 9 * 4 * 2);
        assert!(fs::read_dir(dir.path()).unwrap().all(|e| !e
            .unwrap()
            .file_name()
            .to_string_lossy()
            .ends_with(".tmp")));
    }

    #[test]
    fn stage_gating_limits_outputs() {
        let cfg = validate_config("rate_models = []\nmodels = [\"fvd\"]\n").unwrap();
        let res = run_pipeline(&cfg, Some(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let got = names(&write_reports(&res, &cfg.models, dir.path()).unwrap());
        assert_eq!(got, vec!["fig2_critical_delay.csv", "diagnostics.csv"]);
        let fig2 = fs::read_to_string(dir.path().join("fig2_critical_delay.csv")).unwrap();
        assert!(fig2.lines().skip(1).all(|l| l.contains(",fvd,")));
    }

    #[test]
    fn rerun_is_byte_identical() {
        let cfg = validate_config("rate_models = [\"quadratic\"]\n").unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let pa =
            write_reports(&run_pipeline(&cfg, Some(1)).unwrap(), &cfg.models, a.path()).unwrap();
        let pb =
            write_reports(&run_pipeline(&cfg, Some(2)).unwrap(), &cfg.models, b.path()).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(
                fs::read(x).unwrap(),
                fs::read(y).unwrap(),
                "{}",
                x.display()
            );
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested").join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
    }
}
