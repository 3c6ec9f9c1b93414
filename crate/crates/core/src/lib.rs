//! Platoon stability and IEEE 802.11p EDCA access-delay analysis for
//! platoons of connected vehicles sharing the road with motorised
//! two-wheelers.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`platoon`]: optimal-velocity car following with feedback delay,
//!    the equilibrium, and the critical delay for non-oscillatory
//!    convergence of the headway (plus a DDE integrator to check it).
//! 2. [`traffic`]: gap-acceptance probability of a two-wheeler and the
//!    AC0 packet-rate models derived from it.
//! 3. [`edca`]: the coupled AC0/AC1 Markov-chain fixed point, the exact
//!    MAC access-delay distribution, its moments, a shifted-exponential
//!    CDF fit and reliability against a delay budget.
//! 4. [`des`]: a slot-level discrete-event simulator of broadcast EDCA
//!    stations used to cross-check the analytic model.
//! 5. [`scenario`]: configuration, headway sweeps and CSV reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod des;
pub mod edca;
pub mod error;
pub mod platoon;
pub mod scenario;
pub mod traffic;

pub use error::{Error, FieldError, Result};
