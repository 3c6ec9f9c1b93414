//! Roots of the characteristic equation of the linearised platoon,
//!
//! ```text
//! f(λ) = λ² + (a + l) λ e^{−λτ} + aV′(y*) e^{−λτ} = 0.
//! ```
//!
//! The rightmost root is found by continuation in τ starting from the
//! delay-free quadratic. Complex roots are followed by Newton iteration; the
//! real axis is scanned at every step so that real roots, and complex pairs
//! that split off the real axis, are never lost.

use num_complex::Complex64;

use super::{Equilibrium, PlatoonModel};
use crate::error::{Error, Result};

const NEWTON_MAX_ITER: usize = 100;
const REAL_SCAN_POINTS: usize = 4000;

/// A root `σ + iω` of the characteristic equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub re: f64,
    pub im: f64,
}

impl Root {
    pub fn is_real(&self) -> bool {
        self.im == 0.0
    }
}

/// `f(λ)` for the given model, equilibrium and delay.
pub fn characteristic_function(
    model: &PlatoonModel,
    eq: &Equilibrium,
    tau: f64,
    lambda: Complex64,
) -> Complex64 {
    let (c, b) = (model.damping(), eq.stiffness(model));
    lambda * lambda + (lambda * c + b) * (-lambda * tau).exp()
}

fn characteristic_derivative(c: f64, b: f64, tau: f64, lambda: Complex64) -> Complex64 {
    2.0 * lambda + (c - tau * (lambda * c + b)) * (-lambda * tau).exp()
}

fn newton(c: f64, b: f64, tau: f64, seed: Complex64) -> Result<Complex64> {
    let mut z = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let f = z * z + (z * c + b) * (-z * tau).exp();
        let df = characteristic_derivative(c, b, tau, z);
        if df.norm() == 0.0 || !f.is_finite() {
            break;
        }
        let step = f / df;
        z -= step;
        if step.norm() <= 1e-13 * (1.0 + z.norm()) {
            return Ok(z);
        }
    }
    Err(Error::RootNotConverged {
        iterations: NEWTON_MAX_ITER,
        re: z.re,
        im: z.im,
    })
}

fn real_char(c: f64, b: f64, tau: f64, s: f64) -> f64 {
    s * s * (s * tau).exp() + c * s + b
}

/// All real roots of the characteristic equation, sorted from right to left.
///
/// Real roots are always negative since every term of `f(σ)` is positive for
/// `σ ≥ 0`. For `τ > 0` there is at least one.
pub fn real_roots(model: &PlatoonModel, eq: &Equilibrium, tau: f64) -> Vec<f64> {
    real_roots_raw(model.damping(), eq.stiffness(model), tau)
}

fn real_roots_raw(c: f64, b: f64, tau: f64) -> Vec<f64> {
    if tau == 0.0 {
        let disc = c * c - 4.0 * b;
        if disc < 0.0 {
            return Vec::new();
        }
        let r = disc.sqrt();
        let mut v = vec![(-c + r) / 2.0, (-c - r) / 2.0];
        v.dedup();
        return v;
    }
    // past the hump of σ²e^{στ} (at σ = −2/τ) and the zero of the line cσ + b
    let mut lo = -(10.0 * b / c).max(10.0 / tau);
    while real_char(c, b, tau, lo) >= 0.0 || lo > -2.0 / tau {
        lo *= 2.0;
    }
    let h = -lo / REAL_SCAN_POINTS as f64;
    let mut roots = Vec::new();
    let mut x1 = 0.0;
    let mut f1 = real_char(c, b, tau, x1);
    for i in 1..=REAL_SCAN_POINTS {
        let x0 = -(i as f64) * h;
        let f0 = real_char(c, b, tau, x0);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0.signum() != f1.signum() && f1 != 0.0 {
            roots.push(bisect(|s| real_char(c, b, tau, s), x0, x1));
        }
        x1 = x0;
        f1 = f0;
    }
    roots
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn push_unique(tracked: &mut Vec<Complex64>, z: Complex64) {
    let scale = 1.0 + z.norm();
    if !tracked.iter().any(|w| (w - z).norm() < 1e-7 * scale) {
        tracked.push(z);
    }
}

/// Rightmost root of the characteristic equation at delay `tau`.
///
/// Roots emanating from −∞ as soon as τ > 0 are only picked up once they
/// meet the real axis; for the delays of interest they stay far to the left.
pub fn characteristic_roots(model: &PlatoonModel, eq: &Equilibrium, tau: f64) -> Result<Root> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delay must be non-negative, got {tau}"
        )));
    }
    let (c, b) = (model.damping(), eq.stiffness(model));

    // delay-free start
    let disc = c * c - 4.0 * b;
    let mut tracked: Vec<Complex64> = Vec::new();
    if disc < 0.0 {
        tracked.push(Complex64::new(-c / 2.0, (-disc).sqrt() / 2.0));
    }
    let mut reals = real_roots_raw(c, b, 0.0);

    if tau > 0.0 {
        // the dominant pair moves on a time scale of 1/|λ|
        let scale = (c.abs() + b.abs().sqrt()).max(1.0);
        let n_steps = ((tau * scale / 0.02).ceil() as usize).max(50);
        for step in 1..=n_steps {
            let t = tau * step as f64 / n_steps as f64;
            let mut next: Vec<Complex64> = Vec::new();
            for z in &tracked {
                let seed = Complex64::new(z.re, z.im.max(1e-3 * (1.0 + z.norm())));
                let root = newton(c, b, t, seed)?;
                if root.im.abs() > 1e-7 * (1.0 + root.norm()) {
                    push_unique(&mut next, Complex64::new(root.re, root.im.abs()));
                }
            }
            let new_reals = real_roots_raw(c, b, t);
            if new_reals.len() < reals.len() {
                // a pair of real roots merged and left the axis
                for w in reals.windows(2) {
                    let mid = 0.5 * (w[0] + w[1]);
                    let gap = (w[0] - w[1]).abs().max(1e-3);
                    if let Ok(root) = newton(c, b, t, Complex64::new(mid, gap)) {
                        if root.im.abs() > 1e-7 * (1.0 + root.norm()) {
                            push_unique(&mut next, Complex64::new(root.re, root.im.abs()));
                        }
                    }
                }
            }
            tracked = next;
            reals = new_reals;
        }
    }

    let best_complex = tracked
        .iter()
        .copied()
        .max_by(|x, y| x.re.total_cmp(&y.re))
        .map(|z| Root { re: z.re, im: z.im });
    let best_real = reals
        .iter()
        .copied()
        .max_by(|x, y| x.total_cmp(y))
        .map(|s| Root { re: s, im: 0.0 });
    match (best_complex, best_real) {
        (Some(z), Some(r)) => Ok(if r.re >= z.re { r } else { z }),
        (Some(z), None) => Ok(z),
        (None, Some(r)) => Ok(r),
        (None, None) => Err(Error::NoRealRoot(format!("no root located at tau = {tau}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platoon::test_support::model;
    use crate::platoon::{critical_delay, equilibrium};

    fn setup(l: f64, y: f64) -> (PlatoonModel, Equilibrium) {
        let m = model(l).at_headway(y).unwrap();
        let eq = equilibrium(&m, y).unwrap();
        (m, eq)
    }

    /// Independent oracle: Newton from a dense grid of seeds, keep the
    /// rightmost converged root.
    fn brute_force_rightmost(m: &PlatoonModel, eq: &Equilibrium, tau: f64) -> Complex64 {
        let (c, b) = (m.damping(), eq.stiffness(m));
        let f = |z: Complex64| z * z + (z * c + b) * (-z * tau).exp();
        let mut best: Option<Complex64> = None;
        for i in 0..=60 {
            for j in 0..=40 {
                let mut z = Complex64::new(-60.0 + i as f64, j as f64 * 0.5);
                for _ in 0..80 {
                    let d = f(z) / characteristic_derivative(c, b, tau, z);
                    if !d.is_finite() {
                        break;
                    }
                    z -= d;
                }
                if f(z).norm() < 1e-8 && z.re.is_finite() && best.is_none_or(|w| z.re > w.re + 1e-9)
                {
                    best = Some(z);
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn delay_free_quadratic() {
        let (m, eq) = setup(0.0, 5.0);
        let r = characteristic_roots(&m, &eq, 0.0).unwrap();
        let b = eq.stiffness(&m);
        assert!((r.re + 2.5).abs() < 1e-12);
        assert!((r.im - (4.0 * b - 25.0).sqrt() / 2.0).abs() < 1e-12);
        let f = characteristic_function(&m, &eq, 0.0, Complex64::new(r.re, r.im));
        assert!(f.norm() < 1e-10);
    }

    #[test]
    fn matches_brute_force_oracle() {
        for (l, y) in [(0.0, 5.0), (2.0, 5.0), (2.0, 8.0), (0.0, 3.0)] {
            let (m, eq) = setup(l, y);
            let tau_cr = critical_delay(&m, &eq).unwrap();
            for f in [0.3, 0.9, 1.0, 1.1, 1.5] {
                let tau = f * tau_cr;
                let got = characteristic_roots(&m, &eq, tau).unwrap();
                let want = brute_force_rightmost(&m, &eq, tau);
                assert!(
                    (got.re - want.re).abs() < 1e-6 * (1.0 + want.norm()),
                    "l={l} y={y} tau={tau}: {got:?} vs {want}"
                );
                assert!((got.im - want.im.abs()).abs() < 1e-5 * (1.0 + want.norm()));
            }
        }
    }

    #[test]
    fn real_branch_passes_through_coalescence_sigma() {
        // at τ_cr the characteristic equation has a real root at d̃(−2−√2)
        for (l, y) in [(0.0, 5.0), (2.0, 5.0), (0.0, 8.0)] {
            let (m, eq) = setup(l, y);
            let tau = critical_delay(&m, &eq).unwrap();
            let s = crate::platoon::coalescence_sigma(&eq);
            let reals = real_roots(&m, &eq, tau);
            assert!(
                reals.iter().any(|r| (r - s).abs() < 1e-6 * s.abs()),
                "{reals:?} vs {s}"
            );
        }
    }

    #[test]
    fn pair_leaves_real_axis() {
        // FVD at 8 m: the dominant pair lands on the real axis near τ = 0.047
        // and a second pair leaves it near τ = 0.062
        let (m, eq) = setup(2.0, 8.0);
        assert!(characteristic_roots(&m, &eq, 0.03).unwrap().im > 0.0);
        let r = characteristic_roots(&m, &eq, 0.06).unwrap();
        assert!(r.is_real() && r.re < 0.0);
        let r = characteristic_roots(&m, &eq, 0.12).unwrap();
        assert!(r.im > 1.0, "{r:?}");
    }

    #[test]
    fn rejects_negative_delay() {
        let (m, eq) = setup(0.0, 5.0);
        assert!(characteristic_roots(&m, &eq, -0.1).is_err());
    }
}
