use thiserror::Error;

/// Errors raised across the crate.
///
/// The variants fall into three groups that the command-line front end maps
/// to exit codes: bad input (`Input`, `Validation`, `DimensionMismatch`),
/// resource limits (`Resource`), and violated construction invariants
/// (`Integrity`, `Closure`, `Convergence`, `StepSize`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("construction integrity violated: {0}")]
    Integrity(String),

    #[error("subspace not closed under term `{tag}` (residual {residual:.3e})")]
    Closure { tag: String, residual: f64 },

    #[error("eigensolver did not converge after {matvecs} matvecs (last residuals {residuals:?})")]
    Convergence { matvecs: usize, residuals: Vec<f64> },

    #[error("integrator norm drift {drift:.3e} exceeds tolerance")]
    StepSize { drift: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's input rather than a broken invariant.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Input(_)
                | Error::Validation(_)
                | Error::DimensionMismatch { .. }
                | Error::Resource(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
