use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("feature {0} has no observed values")]
    AllMissingFeature(usize),

    #[error("class {label} has {count} members, at least {needed} required")]
    ClassTooSmall {
        label: i32,
        count: usize,
        needed: usize,
    },

    #[error("training set must contain both classes")]
    SingleClass,

    #[error("input contains missing cells")]
    MissingValues,

    #[error("label {0} is outside {{-1, +1}}")]
    Label(i32),

    #[error("undefined measure: {0}")]
    UndefinedMeasure(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown graph node {0}")]
    UnknownNode(usize),

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error("no candidate could be evaluated: {0}")]
    SearchFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
