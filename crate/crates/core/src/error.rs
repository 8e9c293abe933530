use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Clone, Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate geometry: point coincides with base station {bs}")]
    DegenerateGeometry { bs: usize },

    #[error("degenerate fading for user {user} of cell {cell}")]
    DegenerateFading { cell: usize, user: usize },

    #[error("unsupported pilot reuse factor {0} (expected 1, 3, 4 or 7)")]
    UnsupportedReuse(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative error variance {value:e} at BS {bs} for user {user} of cell {cell}")]
    NegativeVariance {
        bs: usize,
        cell: usize,
        user: usize,
        value: f64,
    },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("detector is identically zero")]
    ZeroDetector,

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e}){}", context_suffix(.context))]
    NoConvergence {
        iterations: usize,
        residual: f64,
        /// `(bs, pilot)` when raised while assembling a deterministic equivalent.
        context: Option<(usize, usize)>,
    },

    #[error("singular linear system (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("configuration: {0}")]
    Config(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: Arc<std::io::Error>,
    },

    #[error("{}: {message}", .path.display())]
    Format { path: PathBuf, message: String },
}

fn context_suffix(context: &Option<(usize, usize)>) -> String {
    match context {
        Some((bs, pilot)) => format!(" at BS {bs}, pilot {pilot}"),
        None => String::new(),
    }
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source: Arc::new(source),
        }
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DegenerateGeometry { .. } => "degenerate_geometry",
            Error::DegenerateFading { .. } => "degenerate_fading",
            Error::UnsupportedReuse(_) => "unsupported_reuse",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NegativeVariance { .. } => "negative_variance",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::RankDeficient(_) => "rank_deficient",
            Error::ZeroDetector => "zero_detector",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Singular { .. } => "singular",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
        }
    }

    /// Attach a `(bs, pilot)` tag to a convergence failure.
    pub fn with_pilot_context(self, bs: usize, pilot: usize) -> Self {
        match self {
            Error::NoConvergence {
                iterations,
                residual,
                ..
            } => Error::NoConvergence {
                iterations,
                residual,
                context: Some((bs, pilot)),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
