use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid intervention: {0}")]
    Intervention(String),

    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("unsupported format version {found} in {what} (expected {expected})")]
    FormatVersion {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("row {row}, column `{column}`: value {value} outside [{lo}, {hi}]")]
    OutOfRange {
        row: usize,
        column: String,
        value: i64,
        lo: i64,
        hi: i64,
    },

    #[error("row {row}, column `{column}`: `{cell}` is not an integer")]
    NonInteger {
        row: usize,
        column: String,
        cell: String,
    },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    TrainingDiverged { epoch: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("intervention {layer}/{neuron} = {value} is inadmissible: accuracy moved by {drop:.4} (budget {budget})")]
    Inadmissible {
        layer: usize,
        neuron: usize,
        value: f64,
        drop: f64,
        budget: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Shape {
            context: context.into(),
            expected,
            actual,
        }
    }
}
