use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the prognosis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("empty sequence passed to {0}")]
    EmptySequence(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at iteration {iteration} (lr = {lr}): loss = {loss}")]
    Diverged { iteration: usize, lr: f64, loss: f64 },

    #[error("no events in survival data")]
    NoEvents,

    #[error("no permissible pairs for concordance")]
    NoPermissiblePairs,

    #[error("covariate `{0}` is constant")]
    ConstantCovariate(String),

    #[error("monotone likelihood: coefficient for `{covariate}` diverged ({value})")]
    Separation { covariate: String, value: f64 },

    #[error("measure `{0}` has zero variance in the training split")]
    ZeroVariance(&'static str),

    #[error("generator config infeasible: {0}")]
    InfeasibleConfig(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("malformed model file at line {line}: {msg}")]
    ModelFormat { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::InvalidArgument(_) | Error::Config(_) => 1,
            Error::Data(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::ModelFormat { .. }
            | Error::ZeroVariance(_)
            | Error::ConstantCovariate(_)
            | Error::NoEvents
            | Error::NoPermissiblePairs
            | Error::EmptySequence(_)
            | Error::DimensionMismatch { .. } => 2,
            Error::NonFinite(_)
            | Error::Diverged { .. }
            | Error::Separation { .. }
            | Error::InfeasibleConfig(_) => 3,
        }
    }
}
