use crate::solver::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("value outside tabulated range: {0}")]
    Range(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("no convergence after {} iterations (last residual {:e})", .0.iterations, .0.residual_history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence(Box<SolveReport>),

    #[error("cell problem failed at xi = ({}, {}): {source}", .xi[0], .xi[1])]
    CellSolve {
        xi: [f64; 2],
        #[source]
        source: Box<Error>,
    },

    #[error("study job failed at eps = {eps}: {source}")]
    StudyJob {
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True when the failure is (or wraps) a solver non-convergence.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::NonConvergence(_) => true,
            Error::CellSolve { source, .. } | Error::StudyJob { source, .. } => {
                source.is_non_convergence()
            }
            _ => false,
        }
    }
}
