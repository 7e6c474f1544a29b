use std::path::PathBuf;

use odscale_core::{EstimateError, MetricsError, ModelError, NetworkError};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input: bad header, unparsable field, wrong field count.
    /// `line` and `column` are 1-based; column 0 means the whole line.
    #[error("{}:{line}:{column}: {message}", file.display())]
    Parse {
        file: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },
    /// Well-formed input that violates a model constraint.
    #[error("{}:{line}: constraint violated: {constraint}", file.display())]
    Schema {
        file: PathBuf,
        line: u64,
        constraint: String,
    },
    #[error("{}:{line}: unrecognized unit `{tag}` (expected s, min or h)", file.display())]
    Unit {
        file: PathBuf,
        line: u64,
        tag: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),
    #[error("no sensor counts available for validation")]
    NoSensors,
    #[error("hour label `{0}` appears more than once in the batch")]
    DuplicateHour(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(
        file: impl Into<PathBuf>,
        line: u64,
        constraint: impl Into<String>,
    ) -> Self {
        Error::Schema {
            file: file.into(),
            line,
            constraint: constraint.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
