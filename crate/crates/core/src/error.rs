use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the search, evaluation and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("genotype has {actual} parameters, controller expects {expected}")]
    GenotypeLength { expected: usize, actual: usize },

    #[error("gene {index} = {value} lies outside [{low}, {high}]")]
    GeneOutOfBounds {
        index: usize,
        value: f64,
        low: f64,
        high: f64,
    },

    #[error("unknown rng purpose label `{0}`")]
    UnknownPurpose(String),

    #[error("descriptor has dimension {actual}, container expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("container is empty")]
    EmptyContainer,

    #[error("not enough samples: {samples} rows for {components} components")]
    NotEnoughSamples { samples: usize, components: usize },

    #[error("encoder has not been fitted")]
    NotFitted,

    #[error("encoder training diverged at step {step}: loss = {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("malformed snapshot row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("invalid encoder file: {0}")]
    ModelFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
