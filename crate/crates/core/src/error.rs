use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Parametric coordinate or argument outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or degenerate geometry (singular Jacobian, bad control net).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Refinement request that cannot be honored (multiplicity, band bounds).
    #[error("refinement error: {0}")]
    Refinement(String),

    /// Run configuration rejected during validation.
    #[error("config error: {0}")]
    Config(String),

    /// Nonlinear or linear solve failure.
    #[error("solver error: {0}")]
    Solver(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
