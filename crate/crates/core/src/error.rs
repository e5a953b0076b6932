use thiserror::Error;

/// Errors produced by the geometry, fitting, forecasting and ingestion layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point is not on the manifold: {0}")]
    NotOnManifold(String),

    #[error("tangent vectors are based at different points")]
    BaseMismatch,

    /// Inputs at or beyond the cut locus, where the logarithm is undefined.
    #[error("cut locus: {0}")]
    CutLocus(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("line search failed at iteration {iteration}: step {step:e}, objective {value:e}, gradient norm {grad_norm:e}")]
    LineSearch {
        iteration: usize,
        step: f64,
        value: f64,
        grad_norm: f64,
        last: Vec<f64>,
    },

    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        last: Vec<f64>,
    },

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(#[from] crate::hurdat::ParseError),

    #[error("{0}")]
    NotFound(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Failure stage, used by the command line for its exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Input,
    Solver,
    Domain,
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error after peeling context layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn stage(&self) -> Stage {
        match self.root() {
            Error::LineSearch { .. } | Error::NonConvergence { .. } | Error::SingularCovariance(_) => {
                Stage::Solver
            }
            Error::CutLocus(_) | Error::NotOnManifold(_) | Error::BaseMismatch => Stage::Domain,
            _ => Stage::Input,
        }
    }
}
