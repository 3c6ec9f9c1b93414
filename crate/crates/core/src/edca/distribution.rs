//! Exact MAC access-delay distributions built from the delay PGF.
//!
//! With delays in whole microseconds every PGF factor is a finite polynomial
//! in `z`, so the distribution is a finite list of atoms. Each backoff slot
//! is idle or busy independently, so the atoms follow from the distribution
//! of the total counter value split binomially into busy and idle slots. The
//! PGF factors are also differentiated symbolically at `z = 1` to give the
//! moments without building the atoms.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{ac1_windows, Ac, EdcaParams, FixedPointSolution, SlotTiming};
use crate::error::{Error, Result};

/// One support point of a delay distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub delay_us: u64,
    /// Probability of this delay.
    pub prob: f64,
    /// Part of `prob` contributed by AC1 packets dropped at the retry limit.
    pub dropped: f64,
}

impl Atom {
    pub fn delay_s(&self) -> f64 {
        self.delay_us as f64 * 1e-6
    }
}

/// Discrete access-delay distribution with strictly increasing delays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayDistribution {
    atoms: Vec<Atom>,
    total_mass: f64,
    truncation_loss: f64,
}

impl DelayDistribution {
    /// Builds a distribution from atoms, merging equal delays and dropping
    /// zero-mass entries. Fails if the mass differs from one by more than
    /// `1e-9`.
    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Result<Self> {
        let mut merged: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        for a in atoms {
            if !(a.prob >= 0.0) || !(a.dropped >= 0.0) || a.dropped > a.prob * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!("invalid atom {a:?}")));
            }
            let e = merged.entry(a.delay_us).or_insert((0.0, 0.0));
            e.0 += a.prob;
            e.1 += a.dropped;
        }
        let atoms: Vec<Atom> = merged
            .into_iter()
            .filter(|(_, (p, _))| *p > 0.0)
            .map(|(delay_us, (prob, dropped))| Atom {
                delay_us,
                prob,
                dropped,
            })
            .collect();
        let total_mass: f64 = atoms.iter().map(|a| a.prob).sum();
        let loss = 1.0 - total_mass;
        if loss.abs() > 1e-9 {
            return Err(Error::Truncated(loss));
        }
        Ok(Self {
            atoms,
            total_mass,
            truncation_loss: 0.0,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn truncation_loss(&self) -> f64 {
        self.truncation_loss
    }

    pub fn mean_us(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.prob * a.delay_us as f64)
            .sum::<f64>()
            / self.total_mass
    }

    pub fn variance_us2(&self) -> f64 {
        let m = self.mean_us();
        self.atoms
            .iter()
            .map(|a| a.prob * (a.delay_us as f64 - m).powi(2))
            .sum::<f64>()
            / self.total_mass
    }

    pub fn mean_s(&self) -> f64 {
        self.mean_us() * 1e-6
    }

    pub fn std_s(&self) -> f64 {
        self.variance_us2().sqrt() * 1e-6
    }

    /// Probability that the packet is dropped at the retry limit.
    pub fn drop_probability(&self) -> f64 {
        self.atoms.iter().map(|a| a.dropped).sum()
    }

    /// `P(delay ≤ t)` over all outcomes.
    pub fn cdf_us(&self, t_us: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| a.delay_us as f64 <= t_us)
            .map(|a| a.prob)
            .sum()
    }

    /// `P(delivered and delay ≤ t)`.
    pub fn delivered_cdf_us(&self, t_us: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| a.delay_us as f64 <= t_us)
            .map(|a| a.prob - a.dropped)
            .sum()
    }
}

/// Derivatives of a (sub-)probability generating function at `z = 1`:
/// `m0 = P(1)`, `m1 = P′(1)`, `m2 = P″(1)`. Units are microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PgfMoments {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
}

impl PgfMoments {
    fn point(t: f64) -> Self {
        Self {
            m0: 1.0,
            m1: t,
            m2: t * (t - 1.0),
        }
    }

    fn zero() -> Self {
        Self {
            m0: 0.0,
            m1: 0.0,
            m2: 0.0,
        }
    }

    fn add(self, o: Self, w: f64) -> Self {
        Self {
            m0: self.m0 + w * o.m0,
            m1: self.m1 + w * o.m1,
            m2: self.m2 + w * o.m2,
        }
    }

    /// Moments of the PGF product `G·H`.
    fn product(self, o: Self) -> Self {
        Self {
            m0: self.m0 * o.m0,
            m1: self.m1 * o.m0 + self.m0 * o.m1,
            m2: self.m2 * o.m0 + 2.0 * self.m1 * o.m1 + self.m0 * o.m2,
        }
    }

    fn uniform_powers(h: Self, w: u64) -> Self {
        let mut acc = Self::zero();
        let mut power = Self::point(0.0);
        for k in 0..w {
            if k > 0 {
                power = power.product(h);
            }
            acc = acc.add(power, 1.0 / w as f64);
        }
        acc
    }

    /// Mean delay `P′(1)` (µs).
    pub fn mean_us(&self) -> f64 {
        self.m1
    }

    /// `D = P″(1) + P′(1) − P′(1)²` (µs²).
    pub fn variance_us2(&self) -> f64 {
        self.m2 + self.m1 - self.m1 * self.m1
    }

    pub fn mean_s(&self) -> f64 {
        self.m1 * 1e-6
    }

    pub fn std_s(&self) -> f64 {
        self.variance_us2().max(0.0).sqrt() * 1e-6
    }
}

fn check_probs(pb: f64, pv1: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&pb) || !(0.0..=1.0).contains(&pv1) {
        return Err(Error::InvalidParameter(format!(
            "blocking {pb} and virtual-collision {pv1} probabilities must lie in [0, 1]"
        )));
    }
    Ok(())
}

/// Returns the PGF moments of delivered packets and of dropped packets.
fn assemble(p: &EdcaParams, ac: Ac, pb: f64, pv1: f64) -> Result<(PgfMoments, PgfMoments)> {
    check_probs(pb, pv1)?;
    let t = SlotTiming::new(p);
    let tr = PgfMoments::point(t.transmission_us as f64);
    let h = PgfMoments::zero()
        .add(PgfMoments::point(t.slot_us as f64), 1.0 - pb)
        .add(
            PgfMoments::point((t.transmission_us + t.aifs_us[ac.index()]) as f64),
            pb,
        );
    match ac {
        Ac::Ac0 => {
            let b = PgfMoments::uniform_powers(h, p.w0(Ac::Ac0) as u64);
            Ok((tr.product(b), PgfMoments::zero()))
        }
        Ac::Ac1 => {
            let mut delivered = PgfMoments::zero();
            let mut prefix = PgfMoments::point(0.0);
            let mut weight = 1.0;
            for w in ac1_windows(p)? {
                prefix = prefix.product(PgfMoments::uniform_powers(h, w));
                delivered = delivered.add(tr.product(prefix), (1.0 - pv1) * weight);
                weight *= pv1;
            }
            Ok((delivered, PgfMoments::zero().add(prefix, weight)))
        }
    }
}

/// Convolves a distribution of backoff-counter totals with a uniform draw
/// from `0..w`.
fn add_uniform_counter(totals: &[f64], w: u64) -> Vec<f64> {
    let w = w as usize;
    let mut out = vec![0.0; totals.len() + w - 1];
    let mut running = 0.0;
    for (k, o) in out.iter_mut().enumerate() {
        if k < totals.len() {
            running += totals[k];
        }
        if k >= w {
            running -= totals[k - w];
        }
        *o = running / w as f64;
    }
    out
}

/// Counter-total distributions (before the binomial split) of delivered and
/// dropped packets, indexed by the total number of backoff slots.
fn counter_totals(p: &EdcaParams, ac: Ac, pv1: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    match ac {
        Ac::Ac0 => Ok((
            add_uniform_counter(&[1.0], p.w0(Ac::Ac0) as u64),
            Vec::new(),
        )),
        Ac::Ac1 => {
            let mut delivered: Vec<f64> = Vec::new();
            let mut prefix = vec![1.0];
            let mut weight = 1.0;
            for w in ac1_windows(p)? {
                prefix = add_uniform_counter(&prefix, w);
                delivered.resize(prefix.len(), 0.0);
                for (d, q) in delivered.iter_mut().zip(&prefix) {
                    *d += (1.0 - pv1) * weight * q;
                }
                weight *= pv1;
            }
            Ok((delivered, prefix.into_iter().map(|q| q * weight).collect()))
        }
    }
}

/// Exact access-delay distribution of `ac` for blocking probability `pb` and
/// AC1 virtual-collision probability `pv1`.
pub fn delay_distribution(p: &EdcaParams, ac: Ac, pb: f64, pv1: f64) -> Result<DelayDistribution> {
    check_probs(pb, pv1)?;
    let t = SlotTiming::new(p);
    let busy_us = t.transmission_us + t.aifs_us[ac.index()];
    let (delivered, dropped) = counter_totals(p, ac, pv1)?;
    let mut atoms = Vec::new();
    // row K of the binomial triangle: probability that j of K slots are busy
    let mut row = vec![1.0];
    for k in 0..delivered.len().max(dropped.len()) {
        if k > 0 {
            let mut next = vec![0.0; k + 1];
            for (j, &q) in row.iter().enumerate() {
                next[j] += q * (1.0 - pb);
                next[j + 1] += q * pb;
            }
            row = next;
        }
        let (dk, xk) = (
            delivered.get(k).copied().unwrap_or(0.0),
            dropped.get(k).copied().unwrap_or(0.0),
        );
        if dk == 0.0 && xk == 0.0 {
            continue;
        }
        for (j, &q) in row.iter().enumerate() {
            let backoff_us = (k - j) as u64 * t.slot_us + j as u64 * busy_us;
            if dk > 0.0 {
                atoms.push(Atom {
                    delay_us: t.transmission_us + backoff_us,
                    prob: dk * q,
                    dropped: 0.0,
                });
            }
            if xk > 0.0 {
                atoms.push(Atom {
                    delay_us: backoff_us,
                    prob: xk * q,
                    dropped: xk * q,
                });
            }
        }
    }
    DelayDistribution::from_atoms(atoms)
}

/// `P′(1)` and `P″(1)` of the delay PGF of `ac`, obtained by differentiating
/// its factors rather than from the atoms.
pub fn pgf_moments(p: &EdcaParams, ac: Ac, pb: f64, pv1: f64) -> Result<PgfMoments> {
    let (delivered, dropped) = assemble(p, ac, pb, pv1)?;
    Ok(delivered.add(dropped, 1.0))
}

/// Distribution of `ac` at a solved fixed point.
pub fn delay_pgf(sol: &FixedPointSolution, p: &EdcaParams, ac: Ac) -> Result<DelayDistribution> {
    delay_distribution(p, ac, sol.pb[ac.index()], sol.pv1)
}

/// Moments of `ac` at a solved fixed point.
pub fn delay_moments(sol: &FixedPointSolution, p: &EdcaParams, ac: Ac) -> Result<PgfMoments> {
    pgf_moments(p, ac, sol.pb[ac.index()], sol.pv1)
}
