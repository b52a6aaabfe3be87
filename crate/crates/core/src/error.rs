use std::path::PathBuf;

use crate::model::TraceRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A network or plan violates a structural invariant.
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("plan does not match network: {0}")]
    Mismatch(String),

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    /// An analytical routine was called on an instance outside its hypotheses.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<TraceRecord>,
    },

    #[error("missing message: {0}")]
    MissingMessage(String),

    #[error("scenario rejected:\n{}", .0.join("\n"))]
    Parse(Vec<String>),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
