use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("design matrix is singular: {0}")]
    SingularDesign(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("unknown feature '{0}'")]
    UnknownFeature(String),

    #[error("model serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;
