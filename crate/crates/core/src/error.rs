use std::path::PathBuf;

use thiserror::Error;

use crate::metric::MetricKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("invalid scheme catalog: {0}")]
    InvalidCatalog(String),

    #[error("empty series for {0}")]
    EmptySeries(String),

    #[error("MissingMetric({kind:?}) for {context}")]
    MissingMetric { kind: MetricKind, context: String },

    #[error("weight sum violation: {constraint} sums to {sum} (expected 1)")]
    WeightSumViolation { constraint: &'static str, sum: f64 },

    #[error("negative weight: {name} = {value}")]
    NegativeWeight { name: String, value: f64 },

    #[error("score {0} is outside [0, 100]")]
    OutOfRange(f64),

    #[error("invalid bounds for {kind}: min {min} > max {max}")]
    InvalidBounds {
        kind: MetricKind,
        min: f64,
        max: f64,
    },

    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),

    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown schema version `{0}`")]
    UnknownSchemaVersion(String),

    #[error("malformed log: {0}")]
    MalformedLog(String),

    #[error("cannot write {path}: {source}")]
    WriteFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
