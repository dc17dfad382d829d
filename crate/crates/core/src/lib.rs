//! Numerics for the thermodynamics of measurement and information erasure.
//!
//! The crate is organised bottom-up:
//!
//! - [`operator`]: Hermitian operators, density operators, entropies and
//!   canonical states.
//! - [`measurement`]: POVM statistics, Shannon and QC-mutual information, and
//!   the measurement operators induced by a classical (permutation) coupling.
//! - [`memory`]: memory layouts with per-outcome free energies, a
//!   quench-and-thermalize protocol engine with work/heat ledgers, and the
//!   checks for the measurement, erasure, sum and demon inequalities.
//! - [`twobox`]: closed forms for the single-molecule two-box memory.
//! - [`langevin`]: overdamped Langevin erasure in a tilted quartic double well.
//!
//! Units: `k_B = 1`, natural logarithms, entropies in nats.

// `!(x > 0.0)` is used to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod langevin;
pub mod measurement;
pub mod memory;
pub mod operator;
pub mod policy;
pub mod twobox;

pub use error::{Error, Result};
pub use operator::{CMatrix, DensityOperator, HermitianOperator, Temperature};

/// Toolkit version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
