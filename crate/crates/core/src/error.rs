use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of a physical relation.
    #[error("domain error: {name} = {value} violates {constraint}")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: String,
    },

    /// A configuration value failed validation. `key` is the dotted config path.
    #[error("invalid configuration `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("integration became unstable in segment {segment} at step {step} (t = {time:.6} s)")]
    Integration {
        segment: usize,
        step: usize,
        time: f64,
    },

    #[error("feedback error: {0}")]
    Feedback(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("feature error: {0}")]
    Feature(String),

    #[error("augmentation error: {0}")]
    Augmentation(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("simulation of cell {cell} failed: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {path} at byte {offset}: {reason}")]
    Parse {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(name: &'static str, value: f64, constraint: impl Into<String>) -> Self {
        Error::Domain {
            name,
            value,
            constraint: constraint.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
