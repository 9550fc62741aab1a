//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("layer {index}: {reason}")]
    LayerMismatch { index: usize, reason: String },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),

    #[error("no usable rows in {path} ({dropped} dropped)")]
    NoUsableRows { path: PathBuf, dropped: usize },

    #[error("class {class} has {available} samples, {needed} required for the test split")]
    InsufficientClass {
        class: usize,
        needed: usize,
        available: usize,
    },

    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-binary label {0} in binary alignment")]
    NonBinaryLabel(usize),

    #[error("cannot fit {k} clusters to {points} points")]
    TooFewPoints { k: usize, points: usize },

    #[error("aggregation: client {client}, layer {layer}: {reason}")]
    Aggregation {
        client: usize,
        layer: usize,
        reason: String,
    },

    #[error("aggregation weight for client {client} must be positive, got {value}")]
    NonPositiveWeight { client: usize, value: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("model file: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error("client `{name}`: {source}")]
    Client {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn for_client(self, name: &str) -> Self {
        Error::Client {
            name: name.to_string(),
            source: Box::new(self),
        }
    }
}
