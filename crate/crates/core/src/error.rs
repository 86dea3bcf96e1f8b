use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("entry ({row}, {col}) out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite: diagonal entry {index} is {value}")]
    NotPositiveDefinite { index: usize, value: f64 },

    #[error("linear solver stopped after {iterations} iterations with relative residual {relative_residual:e}")]
    NoConvergence { iterations: usize, relative_residual: f64 },

    #[error("point {0:?} lies outside the closed unit domain")]
    OutOfDomain(Vec<f64>),

    #[error("at least {needed} points are required, found {found}")]
    InsufficientPoints { needed: usize, found: usize },

    #[error("unknown analytic function `{0}`")]
    UnknownFunction(String),

    #[error("empty input vector")]
    Empty,

    #[error("iteration aborted: {0}")]
    Aborted(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Tags the error with the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownFunction(_) => 2,
            Error::Io(_) | Error::Csv(_) => 1,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
