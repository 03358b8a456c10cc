use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("moment of total order {order} requested but the kernel supports at most {max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("basis of {columns} columns exceeds the budget of {budget}; lower m_max")]
    Resource { columns: usize, budget: usize },

    #[error("factorization failed after jitter {jitter:e} (dimension {dim}, trace scale {scale:e})")]
    Numerical { dim: usize, jitter: f64, scale: f64 },

    #[error("target is not in the span of the basis (relative residual {residual:e} > {tolerance:e})")]
    NotInSpan { residual: f64, tolerance: f64 },

    #[error("sampler diagnostics: {0}")]
    Diagnostics(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("study failed: {failed} of {total} replicates failed")]
    Study { failed: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
