use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: invalid UTF-8")]
    InvalidUtf8 { path: PathBuf, line: usize },

    #[error("injection fraction {0} outside [0, 1]")]
    InvalidFraction(f64),

    #[error("synthetic corpus is empty but fraction {0} > 0")]
    EmptySynthetic(f64),

    #[error("need {needed} sentences, corpus has {available}")]
    InsufficientSentences { needed: usize, available: usize },

    #[error("vocabulary size {requested} is smaller than the {required} base symbols")]
    VocabTooSmall { requested: usize, required: usize },

    #[error("token id {id} out of range for vocabulary of {size}")]
    TokenOutOfRange { id: u32, size: usize },

    #[error("n-gram order must be at least 1")]
    ZeroOrder,

    #[error("add-lambda requires lambda > 0, got {0}")]
    InvalidLambda(f64),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("sequence of {len} tokens exceeds {max} positions")]
    SequenceTooLong { len: usize, max: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("NaN in input")]
    NaN,

    #[error("non-finite loss {loss} at step {step}")]
    NonFiniteLoss { loss: f64, step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("pair file row {row}: {msg}")]
    PairRow { row: usize, msg: String },

    #[error("unknown bias category {0:?}")]
    UnknownCategory(String),

    #[error("all {0} pairs were skipped")]
    AllSkipped(usize),

    #[error("empty input")]
    EmptyInput,

    #[error("statistics: {0}")]
    Stats(String),

    #[error("lexicon: {0}")]
    Lexicon(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
