//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument: mismatched dimensions, bad flags, malformed input.
    #[error("argument error: {0}")]
    Argument(String),

    /// Input outside the mathematical domain of an operation (e.g. a matrix
    /// that must be positive definite is not).
    #[error("domain error: {0}")]
    Domain(String),

    /// The model does not expose a capability required by the operation.
    #[error("capability error: {0}")]
    Capability(String),

    /// Operation only defined up to a maximum dimension.
    #[error("unsupported dimension {dim}: {msg}")]
    UnsupportedDimension { dim: usize, msg: String },

    /// Mode search left the trust region; treated as non-existence of a
    /// finite minimizer.
    #[error("mode diverged: {0}")]
    ModeDiverged(String),

    /// The Hessian at the mode is not positive definite.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// An iteration failed to reach its tolerance.
    #[error("no convergence: {0}")]
    Convergence(String),

    /// A computation produced non-finite intermediate values.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code for the CLI: 1 for argument-level errors, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_)
            | Error::Capability(_)
            | Error::UnsupportedDimension { .. }
            | Error::Io(_)
            | Error::Parse(_) => 1,
            Error::Domain(_)
            | Error::ModeDiverged(_)
            | Error::DegenerateFit(_)
            | Error::Convergence(_)
            | Error::Numerical(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
