use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("not a density operator: {0}")]
    InvalidDensity(String),

    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("relative entropy is infinite: support of rho not contained in support of sigma (leaked weight {leak:.3e})")]
    InfiniteRelativeEntropy { leak: f64 },

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("non-classical input: {0}")]
    NonClassical(String),

    #[error("not a permutation matrix: {0}")]
    NotPermutation(String),

    #[error("reconstruction of the post-measurement state failed (max deviation {max_deviation:.3e})")]
    ReconstructionFailed { max_deviation: f64 },

    #[error("numerical identity violated: {0}")]
    IdentityViolated(String),

    #[error("invalid memory layout: {0}")]
    InvalidLayout(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("protocol is not an erasure: {outside:.3e} probability left outside the standard branch (allowed {allowed:.3e})")]
    NotAnErasure { outside: f64, allowed: f64 },

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("potential has no interior barrier (single well)")]
    SingleWell,

    #[error("barrier height {height:.3} is below the required minimum {min:.3}")]
    BarrierTooLow { height: f64, min: f64 },

    #[error("time step {dt} exceeds the stability limit {limit:.3e}")]
    UnstableTimestep { dt: f64, limit: f64 },

    #[error("trajectory {index} (seed {seed}) produced a non-finite value")]
    NonFiniteTrajectory { index: usize, seed: u64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
