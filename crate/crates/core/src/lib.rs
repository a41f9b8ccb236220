//! Online monotone submodular maximization in the random-order shortlist model.
//!
//! The crate is organised bottom-up:
//!
//! - [`submodular`]: value oracles (coverage, modular, facility location, the
//!   adversarial hardness family) and evaluation counting.
//! - [`constraints`]: matroid and p-matchoid independence oracles plus the
//!   replacement-gain machinery used by the online algorithm.
//! - [`windows`]: random arrival orders and the `(alpha, beta)` window/slot plan.
//! - [`secretary`]: the replacement secretary subroutine with a logarithmic shortlist.
//! - [`algorithm`]: the window shortlist algorithm in full, preemption and
//!   streaming modes.
//! - [`baselines`]: offline greedy, exact optimum and verification oracles.
//! - [`harness`]: instance generation, seeded sweeps and mode comparison.

pub mod algorithm;
pub mod baselines;
pub mod constraints;
pub mod error;
pub mod harness;
pub mod secretary;
pub mod submodular;
pub mod windows;

pub use error::{Error, Result};
