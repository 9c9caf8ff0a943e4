use crate::prelude::*;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure mode of the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("eigendecomposition failed: {0}")]
    DecompositionFailed(String),
    #[error("matrix is not positive definite after maximum jitter")]
    NotPositiveDefinite,
    #[error("linear solver failed: {0}")]
    SolverFailed(String),
    #[error("transport needs {needed} steps, cap is {cap}")]
    StepLimitExceeded { needed: usize, cap: usize },
    #[error("no concentration snapshot at t = {0}")]
    MissingSnapshot(f64),
    #[error("saturation {0} outside the residual range")]
    SaturationOutOfRange(f64),
    #[error("selected design columns are linearly dependent")]
    SingularDesign,
    #[error("underdetermined fit: {points} points for {terms} terms")]
    Underdetermined { points: usize, terms: usize },
    #[error("surrogate fit failed: {0}")]
    FitFailed(String),
    #[error("archive holds {0} states, at least 3 are needed")]
    ArchiveTooSmall(usize),
    #[error("no chain could be initialised at a finite log-density")]
    BadInitialization,
    #[error("requested {requested} samples but only {available} are available")]
    InsufficientSamples { requested: usize, available: usize },
    #[error("forward model failed: {0}")]
    Forward(String),
}
