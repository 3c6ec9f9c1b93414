//! Analytical model of IEEE 802.11p EDCA broadcast access with two access
//! categories in every vehicle.
//!
//! AC0 carries event-driven safety messages and AC1 periodic beacons. Each AC
//! is a Markov chain coupled to the other through virtual collisions inside
//! the vehicle and to the neighbours through the blocking probability. The
//! fixed point of that coupling yields the backoff blocking probabilities,
//! from which the exact access-delay distribution follows by atom algebra.
//!
//! Durations inside the distribution are integer microseconds. Slot, SIFS,
//! AIFS and the transmission time are rounded to the nearest microsecond
//! (ties away from zero); the default transmission time 1420.667 µs becomes
//! 1421 µs.

mod distribution;
mod fit;
mod fixed_point;

pub use distribution::{
    delay_distribution, delay_moments, delay_pgf, pgf_moments, Atom, DelayDistribution, PgfMoments,
};
pub use fit::{
    cdf_fit, headway_rate_regression, reliability_exact, reliability_fit, CdfFit, LinearFit,
};
pub use fixed_point::{
    fixed_point_update, omega_closed_forms, solve_fixed_point, FixedPointOptions,
    FixedPointSolution, Loads,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};

/// Access category index: 0 for safety messages, 1 for beacons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ac {
    Ac0,
    Ac1,
}

impl Ac {
    pub const BOTH: [Ac; 2] = [Ac::Ac0, Ac::Ac1];

    pub fn index(self) -> usize {
        match self {
            Ac::Ac0 => 0,
            Ac::Ac1 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Ac::Ac0 => "AC0",
            Ac::Ac1 => "AC1",
        }
    }
}

impl std::fmt::Display for Ac {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// EDCA and PHY/MAC timing parameters. Times are in seconds, rates in bit/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdcaParams {
    /// CWmin per AC; the first backoff window is `CWmin + 1`.
    pub cw_min: [u32; 2],
    pub cw_max: [u32; 2],
    pub aifsn: [u32; 2],
    /// Retry limit L of AC1.
    pub retry_limit: u32,
    pub sifs: f64,
    /// Slot time σ.
    pub slot: f64,
    /// PHY header length (bits).
    pub phy_header: f64,
    /// MAC header length (bits).
    pub mac_header: f64,
    pub basic_rate: f64,
    pub data_rate: f64,
    /// Mean payload E[P] (bytes).
    pub mean_payload: f64,
    /// Propagation delay δ.
    pub prop_delay: f64,
    /// Transmission range (m).
    pub tx_range: f64,
    /// Carrier-sense range (m).
    pub cs_range: f64,
}

impl Default for EdcaParams {
    fn default() -> Self {
        Self {
            cw_min: [3, 15],
            cw_max: [3, 31],
            aifsn: [2, 3],
            retry_limit: 2,
            sifs: 32e-6,
            slot: 13e-6,
            phy_header: 48.0,
            mac_header: 112.0,
            basic_rate: 1e6,
            data_rate: 3e6,
            mean_payload: 500.0,
            prop_delay: 2e-6,
            tx_range: 500.0,
            cs_range: 700.0,
        }
    }
}

impl EdcaParams {
    /// Every invariant violation, with field paths relative to the struct.
    pub fn field_errors(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        for i in 0..2 {
            if self.cw_min[i] > self.cw_max[i] {
                errs.push(FieldError::new(
                    format!("cw_max[{i}]"),
                    format!("must be at least cw_min[{i}] = {}", self.cw_min[i]),
                ));
            }
        }
        let ratio = (self.cw_max[1] as u64 + 1) as f64 / (self.cw_min[1] as u64 + 1) as f64;
        let is_pow2 = (self.cw_max[1] as u64 + 1).is_multiple_of(self.cw_min[1] as u64 + 1)
            && ((self.cw_max[1] as u64 + 1) / (self.cw_min[1] as u64 + 1)).is_power_of_two();
        if !is_pow2 {
            errs.push(FieldError::new(
                "cw_max[1]",
                format!("(cw_max[1] + 1)/(cw_min[1] + 1) = {ratio} is not a power of two"),
            ));
        }
        if self.aifsn[1] <= self.aifsn[0] {
            errs.push(FieldError::new(
                "aifsn[1]",
                format!("must exceed aifsn[0] = {}", self.aifsn[0]),
            ));
        }
        if is_pow2 {
            let m = ratio.log2().round() as u32;
            if self.retry_limit < m {
                errs.push(FieldError::new(
                    "retry_limit",
                    format!("must be at least the number of doublings M = {m}"),
                ));
            }
        }
        let positive = [
            ("sifs", self.sifs),
            ("slot", self.slot),
            ("phy_header", self.phy_header),
            ("basic_rate", self.basic_rate),
            ("data_rate", self.data_rate),
            ("tx_range", self.tx_range),
            ("cs_range", self.cs_range),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(FieldError::new(name, format!("must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("mac_header", self.mac_header),
            ("mean_payload", self.mean_payload),
            ("prop_delay", self.prop_delay),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                errs.push(FieldError::new(
                    name,
                    format!("must be non-negative, got {v}"),
                ));
            }
        }
        if self.slot > 0.0 && (self.slot * 1e6).round() < 1.0 {
            errs.push(FieldError::new("slot", "must be at least 1 µs"));
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

    /// First backoff window of `ac`, `CWmin + 1`.
    pub fn w0(&self, ac: Ac) -> u32 {
        self.cw_min[ac.index()] + 1
    }
}

/// Mean transmission time `PHY_H/R_b + (MAC_H + 8 E[P])/R_d + δ` in seconds.
pub fn transmission_time(p: &EdcaParams) -> f64 {
    p.phy_header / p.basic_rate + (p.mac_header + 8.0 * p.mean_payload) / p.data_rate + p.prop_delay
}

/// Number of AC1 window doublings M.
pub fn backoff_stages(p: &EdcaParams) -> Result<u32> {
    let num = p.cw_max[1] as u64 + 1;
    let den = p.cw_min[1] as u64 + 1;
    if !num.is_multiple_of(den) || !(num / den).is_power_of_two() {
        return Err(Error::Config(vec![FieldError::new(
            "cw_max[1]",
            format!("({num})/({den}) is not a power of two"),
        )]));
    }
    Ok((num / den).trailing_zeros())
}

/// AC1 backoff windows `W_{1,j}` for `j = 0..=L`: doubling up to stage M,
/// then flat.
pub fn ac1_windows(p: &EdcaParams) -> Result<Vec<u64>> {
    let m = backoff_stages(p)?;
    let w10 = p.w0(Ac::Ac1) as u64;
    Ok((0..=p.retry_limit).map(|j| w10 << j.min(m)).collect())
}

/// `SIFS + AIFSN[ac]·σ` in seconds.
pub fn aifs(p: &EdcaParams, ac: Ac) -> f64 {
    p.sifs + p.aifsn[ac.index()] as f64 * p.slot
}

/// AIFSN difference relative to AC0: `A₀ = 0`, `A₁ = AIFSN₁ − AIFSN₀`.
pub fn aifs_offset(p: &EdcaParams, ac: Ac) -> u32 {
    match ac {
        Ac::Ac0 => 0,
        Ac::Ac1 => p.aifsn[1].saturating_sub(p.aifsn[0]),
    }
}

fn to_us(seconds: f64) -> u64 {
    (seconds * 1e6).round() as u64
}

/// Durations in whole microseconds, as used for distribution atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlotTiming {
    pub slot_us: u64,
    pub sifs_us: u64,
    pub transmission_us: u64,
    pub aifs_us: [u64; 2],
}

impl SlotTiming {
    pub fn new(p: &EdcaParams) -> Self {
        let slot_us = to_us(p.slot);
        let sifs_us = to_us(p.sifs);
        Self {
            slot_us,
            sifs_us,
            transmission_us: to_us(transmission_time(p)),
            aifs_us: [
                sifs_us + p.aifsn[0] as u64 * slot_us,
                sifs_us + p.aifsn[1] as u64 * slot_us,
            ],
        }
    }
}

/// Vehicles within carrier-sense range on a line with spacing `y_star`,
/// counting both sides and the vehicle itself, optionally capped at the
/// platoon size.
pub fn contender_count(y_star: f64, cs_range: f64, cap: Option<usize>) -> Result<usize> {
    if !(y_star > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "headway must be positive, got {y_star}"
        )));
    }
    if !(cs_range >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cs_range must be non-negative, got {cs_range}"
        )));
    }
    let n = (2.0 * cs_range / y_star).floor() as usize + 1;
    Ok(match cap {
        Some(c) => n.min(c.max(1)),
        None => n,
    })
}

/// Per-slot arrival probabilities `(1 − e^{−λ₀σ}, λ₁σ)`.
pub fn arrival_probabilities(lambda0: f64, lambda1: f64, slot: f64) -> Result<(f64, f64)> {
    if !(lambda0 >= 0.0 && lambda1 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "arrival rates must be non-negative, got {lambda0} and {lambda1}"
        )));
    }
    let pa1 = lambda1 * slot;
    if pa1 > 1.0 {
        return Err(Error::Config(vec![FieldError::new(
            "traffic.lambda1",
            format!("lambda1 * slot = {pa1} exceeds 1"),
        )]));
    }
    Ok((-(-lambda0 * slot).exp_m1(), pa1))
}

/// Probability that none of the `n_cs − 1` neighbours transmits in a slot,
/// `e^{−τ(N_cs − 1)}`.
pub fn poisson_idle_factor(tau_total: f64, n_cs: usize) -> f64 {
    (-tau_total * n_cs.saturating_sub(1) as f64).exp()
}

/// The same factor as the series `Σ_k (1−τ)^k (N−1)^k e^{−(N−1)} / k!`
/// truncated after `terms` terms, summed in log space.
pub fn poisson_idle_factor_series(tau_total: f64, n_cs: usize, terms: usize) -> f64 {
    let n1 = n_cs.saturating_sub(1) as f64;
    if n1 == 0.0 {
        return 1.0;
    }
    let x = (1.0 - tau_total) * n1;
    if x == 0.0 {
        return (-n1).exp();
    }
    let mut sum = 0.0;
    let mut log_fact = 0.0;
    for k in 0..terms {
        if k > 0 {
            log_fact += (k as f64).ln();
        }
        sum += (k as f64 * x.ln() - log_fact - n1).exp();
    }
    sum
}

/// Backoff blocking probability `1 − [P(k)(1 − ω_other)]^{A+1}`.
pub fn blocking_probability(omega_other: f64, tau_total: f64, n_cs: usize, a_i: u32) -> f64 {
    let base = poisson_idle_factor(tau_total, n_cs) * (1.0 - omega_other);
    1.0 - base.powi(a_i as i32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn transmission_time_table4() {
        let p = EdcaParams::default();
        let want = 48.0 / 1e6 + (112.0 + 4000.0) / 3e6 + 2e-6;
        assert!((transmission_time(&p) - want).abs() < 1e-15);
        assert!((transmission_time(&p) * 1e3 - 1.4207).abs() < 5e-4);
        assert_eq!(SlotTiming::new(&p).transmission_us, 1421);
    }

    #[test]
    fn transmission_time_header_only() {
        let p = EdcaParams {
            prop_delay: 0.0,
            mac_header: 0.0,
            mean_payload: 0.0,
            ..EdcaParams::default()
        };
        assert_eq!(transmission_time(&p), 48.0 / 1e6);
    }

    #[test]
    fn transmission_time_linear_in_payload() {
        let p = EdcaParams::default();
        let q = EdcaParams {
            mean_payload: 1000.0,
            ..p
        };
        let diff = transmission_time(&q) - transmission_time(&p);
        assert!((diff - 8.0 * 500.0 / 3e6).abs() < 1e-15);
    }

    #[test]
    fn backoff_stages_and_windows() {
        let p = EdcaParams::default();
        assert_eq!(backoff_stages(&p).unwrap(), 1);
        assert_eq!(ac1_windows(&p).unwrap(), vec![16, 32, 32]);
        let flat = EdcaParams {
            cw_max: [3, 15],
            ..p
        };
        assert_eq!(backoff_stages(&flat).unwrap(), 0);
        let bad = EdcaParams {
            cw_max: [3, 30],
            ..p
        };
        assert!(backoff_stages(&bad).is_err());
        let deep = EdcaParams {
            cw_min: [3, 7],
            cw_max: [3, 63],
            retry_limit: 5,
            ..p
        };
        assert_eq!(backoff_stages(&deep).unwrap(), 3);
        assert_eq!(ac1_windows(&deep).unwrap(), vec![8, 16, 32, 64, 64, 64]);
    }

    #[test]
    fn aifs_values() {
        let p = EdcaParams::default();
        assert!((aifs(&p, Ac::Ac1) - 71e-6).abs() < 1e-15);
        assert!((aifs(&p, Ac::Ac0) - 58e-6).abs() < 1e-15);
        let zero = EdcaParams { aifsn: [0, 1], ..p };
        assert_eq!(aifs(&zero, Ac::Ac0), zero.sifs);
        assert_eq!(aifs_offset(&p, Ac::Ac1), 1);
        assert_eq!(aifs_offset(&p, Ac::Ac0), 0);
        assert_eq!(SlotTiming::new(&p).aifs_us, [58, 71]);
    }

    #[test]
    fn validation_collects_every_violation() {
        let p = EdcaParams {
            cw_max: [2, 30],
            aifsn: [3, 3],
            slot: -1.0,
            ..EdcaParams::default()
        };
        let errs = p.field_errors();
        let paths: Vec<_> = errs.iter().map(|e| e.path.as_str()).collect();
        assert!(paths.contains(&"cw_max[0]"));
        assert!(paths.contains(&"cw_max[1]"));
        assert!(paths.contains(&"aifsn[1]"));
        assert!(paths.contains(&"slot"));
        assert!(EdcaParams::default().validate().is_ok());
        let short = EdcaParams {
            cw_max: [3, 63],
            retry_limit: 1,
            ..EdcaParams::default()
        };
        assert_eq!(short.field_errors()[0].path, "retry_limit");
    }

    #[test]
    fn contenders() {
        assert_eq!(contender_count(10.0, 700.0, None).unwrap(), 141);
        assert_eq!(contender_count(5.0, 700.0, None).unwrap(), 281);
        assert_eq!(contender_count(3.0, 700.0, None).unwrap(), 467);
        assert_eq!(contender_count(1500.0, 700.0, None).unwrap(), 1);
        assert_eq!(contender_count(5.0, 700.0, Some(20)).unwrap(), 20);
        assert!(contender_count(0.0, 700.0, None).is_err());
    }

    #[test]
    fn arrivals() {
        let (pa0, pa1) = arrival_probabilities(70.8, 10.0, 13e-6).unwrap();
        assert!((pa0 - (1.0 - (-70.8f64 * 13e-6).exp())).abs() < 1e-15);
        assert!((pa0 - 9.20e-4).abs() < 1e-6);
        assert!((pa1 - 1.3e-4).abs() < 1e-15);
        assert_eq!(arrival_probabilities(0.0, 10.0, 13e-6).unwrap().0, 0.0);
        assert!(arrival_probabilities(1.0, 1e6, 13e-6)
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn blocking_limits() {
        assert_eq!(blocking_probability(0.0, 0.0, 141, 1), 0.0);
        assert_eq!(blocking_probability(0.0, 0.3, 1, 0), 0.0);
        let pb = blocking_probability(0.2, 0.0, 1, 1);
        assert!((pb - (1.0 - 0.8f64.powi(2))).abs() < 1e-15);
    }

    #[test]
    fn poisson_series_matches_closed_form() {
        let closed = poisson_idle_factor(0.01, 141);
        let series = poisson_idle_factor_series(0.01, 141, 1000);
        assert!((closed - series).abs() < 1e-12, "{closed} {series}");
    }

    #[test]
    fn fifty_terms_do_not_reach_the_mode_of_a_large_neighbourhood() {
        // the summand peaks near k = (1 − τ)(N − 1) ≈ 139
        let closed = poisson_idle_factor(0.01, 141);
        let series = poisson_idle_factor_series(0.01, 141, 50);
        assert!(series < 1e-12 * closed);
    }

    proptest! {
        #[test]
        fn poisson_identity_across_sweep(tau in 0.0f64..1.0, y in 2.0f64..10.0) {
            let n = contender_count(y, 700.0, None).unwrap();
            let closed = poisson_idle_factor(tau, n);
            let series = poisson_idle_factor_series(tau, n, 2000);
            prop_assert!((closed - series).abs() < 1e-10 * closed);
        }

        #[test]
        fn contenders_non_increasing(y in 0.5f64..2000.0, dy in 0.0f64..50.0) {
            let a = contender_count(y, 700.0, None).unwrap();
            let b = contender_count(y + dy, 700.0, None).unwrap();
            prop_assert!(b <= a);
        }

        #[test]
        fn blocking_is_a_probability(w in 0.0f64..1.0, tau in 0.0f64..1.0, n in 1usize..500, a in 0u32..4) {
            let pb = blocking_probability(w, tau, n, a);
            prop_assert!((0.0..=1.0).contains(&pb));
        }
    }
}
