//! Shifted-exponential CDF fits, reliability and the headway regression.

use serde::Serialize;

use super::DelayDistribution;
use crate::error::{Error, Result};

/// `F(x) = 1 − e^{−rate (x − shift)}` for `x ≥ shift`, zero below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfFit {
    /// Shift (s).
    pub shift: f64,
    /// Rate (1/ms).
    pub rate: f64,
    /// Root-mean-square difference to the distribution's CDF at its atoms.
    pub rms_error: f64,
}

impl CdfFit {
    pub fn cdf(&self, x_s: f64) -> f64 {
        let d_ms = (x_s - self.shift) * 1e3;
        if d_ms <= 0.0 {
            0.0
        } else {
            -(-self.rate * d_ms).exp_m1()
        }
    }
}

fn sse(points: &[(f64, f64)], rate: f64) -> f64 {
    points
        .iter()
        .map(|&(d_ms, f)| {
            let model = if d_ms <= 0.0 {
                0.0
            } else {
                -(-rate * d_ms).exp_m1()
            };
            (model - f).powi(2)
        })
        .sum()
}

/// Least-squares rate of a shifted exponential with the shift fixed at
/// `transmission_time` (s), matched to the CDF of `dist` at its support
/// points.
pub fn cdf_fit(dist: &DelayDistribution, transmission_time: f64) -> Result<CdfFit> {
    if !(transmission_time > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "shift must be positive, got {transmission_time}"
        )));
    }
    if dist.atoms().len() < 2 {
        return Err(Error::DegenerateFit(
            "all mass sits on a single delay".into(),
        ));
    }
    if !(dist.mean_s() > transmission_time) {
        return Err(Error::DegenerateFit(format!(
            "mean delay {} s does not exceed the shift {transmission_time} s",
            dist.mean_s()
        )));
    }
    let mut cum = 0.0;
    let points: Vec<(f64, f64)> = dist
        .atoms()
        .iter()
        .map(|a| {
            cum += a.prob;
            ((a.delay_s() - transmission_time) * 1e3, cum)
        })
        .collect();

    // coarse logarithmic scan, then golden section around the best cell
    let grid: Vec<f64> = (0..=120)
        .map(|i| 10f64.powf(-4.0 + i as f64 * 0.05))
        .collect();
    let best = (0..grid.len())
        .min_by(|&i, &j| sse(&points, grid[i]).total_cmp(&sse(&points, grid[j])))
        .unwrap_or(0);
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (sse(&points, x1), sse(&points, x2));
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = sse(&points, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = sse(&points, x2);
        }
    }
    let rate = 0.5 * (lo + hi);
    Ok(CdfFit {
        shift: transmission_time,
        rate,
        rms_error: (sse(&points, rate) / points.len() as f64).sqrt(),
    })
}

/// Probability that a packet is delivered within `budget` seconds, from the
/// exact distribution. Packets dropped at the retry limit never count.
pub fn reliability_exact(dist: &DelayDistribution, budget: f64) -> f64 {
    dist.delivered_cdf_us(budget * 1e6 + 1e-6)
}

/// The same probability read off the fitted shifted exponential.
pub fn reliability_fit(fit: &CdfFit, budget: f64) -> f64 {
    fit.cdf(budget)
}

/// Least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Fits fitted rates against headway, `points = [(y*, rate)]`.
pub fn headway_rate_regression(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.len() < 3 {
        return Err(Error::RankDeficient(format!(
            "need at least 3 headways, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 1e-12 * (1.0 + mx * mx) * n) {
        return Err(Error::RankDeficient("all headways are equal".into()));
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}
