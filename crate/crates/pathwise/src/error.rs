use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum PathwiseError {
    /// Invalid caller-supplied parameter (dimensions, meshes, off-grid times).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A contract between modules was violated (missing derivative suite,
    /// dimension mismatch, asymmetric Hessian slot).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Query outside the tabulated or admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Too few usable points for a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Numerical blow-up or loss of a structural property during time stepping.
    #[error("stability failure: {0}")]
    Stability(String),

    /// Parabolicity lost beyond tolerance.
    #[error("parabolicity violation: {0}")]
    Parabolicity(String),

    /// Internal invariant check failed (e.g. reduced vs unreduced operator
    /// forms disagree).
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PathwiseError>;
