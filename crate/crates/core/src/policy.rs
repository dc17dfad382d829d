//! Shared numerical tolerances. Library checks and tests read from here so
//! they agree on what "equal" means.

/// Hermiticity, positivity and trace checks on input operators.
pub const VALIDATION: f64 = 1e-10;

/// Identity checks between two independently computed quantities.
pub const IDENTITY: f64 = 1e-8;

/// POVM completeness `sum_k E_k = 1` and normalisation of probability vectors.
pub const COMPLETENESS: f64 = 1e-9;

/// Eigenvalues at or below this are treated as zero in `x ln x`.
pub const EIGEN_CLAMP: f64 = 1e-14;

/// Eigenvalues at or below this are outside the support.
pub const SUPPORT: f64 = 1e-12;

/// Slack for analytic bound checks.
pub const BOUND: f64 = 1e-8;

/// Slack for bound checks on protocol-engine output, which carries a small
/// residual population outside the target branch.
pub const PROTOCOL_BOUND: f64 = 1e-6;

/// Default cap on how far a level is raised during a protocol, in units of T.
pub const ENERGY_CAP: f64 = 50.0;
