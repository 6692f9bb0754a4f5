use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("factorization failed at row {row}: pivot {pivot:e} is not positive")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-positive boundary flux {0:e}; quantity of interest undefined")]
    NonPositiveFlux(f64),

    #[error("Newton-CG did not converge in {iterations} iterations (gradient norm {grad_norm:e})")]
    NewtonNotConverged { iterations: usize, grad_norm: f64 },

    #[error("randomized eigensolver breakdown: {0}")]
    EigenBreakdown(String),

    #[error("within-chain covariance singular after jitter")]
    SingularWithinCovariance,

    #[error("degenerate chain ensemble: {0}")]
    DegenerateEnsemble(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
