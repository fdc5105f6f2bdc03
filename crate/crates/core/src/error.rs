use thiserror::Error;

/// Errors produced by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Profile solver ran out of iterations or lost its bisection bracket.
    #[error("profile solver did not converge: {0}")]
    NonConvergence(String),

    #[error("interpolation failed: {0}")]
    Interpolation(String),

    /// `max |eA| * h` exceeded the stencil accuracy guard.
    #[error("stencil overflow: max|eA|*h = {value:.3} exceeds {limit}")]
    StencilOverflow { value: f64, limit: f64 },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    /// Iterative eigensolver hit its iteration cap.
    #[error("spectral solver did not converge after {iterations} iterations (worst residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("radial channel m={channel} did not converge: {reason}")]
    ChannelNonConvergence { channel: i64, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown sector: {0}")]
    UnknownSector(String),

    #[error("sector mismatch: expected {expected}, got {found}")]
    SectorMismatch { expected: String, found: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("expected a kernel of dimension {expected}, got {found}")]
    WrongKernelDimension { expected: usize, found: usize },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
