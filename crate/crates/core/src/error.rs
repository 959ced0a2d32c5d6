use thiserror::Error;

/// Errors produced by the model, media, engine and oracle layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid system specification: {0}")]
    InvalidSpec(String),

    #[error("free-space Green tensor evaluated at coincident points")]
    SingularSelfTerm,

    #[error("collective decay matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("non-Hermitian Hamiltonian is singular at omega = {omega} (condition estimate {condition:e})")]
    SingularAtFrequency { omega: f64, condition: f64 },

    #[error("time step too large: dt * |generator| = {product} (must be < 0.1)")]
    StepTooLarge { product: f64 },

    #[error("state space dimension {dim} exceeds the limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("no steady state found (residual {residual:e})")]
    NoSteadyState { residual: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
