use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Two operands (or an operand and an expected shape) do not line up.
    #[error("{op}: incompatible shapes {lhs} and {rhs}")]
    Shape {
        op: &'static str,
        lhs: String,
        rhs: String,
    },

    /// An underlying I/O operation failed.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A CSV header does not match the expected column set.
    #[error("schema error: {0}")]
    Schema(String),

    /// A record had the wrong number of fields.
    #[error("row {row}: expected {expected} fields, found {found}")]
    FieldCount {
        row: usize,
        expected: usize,
        found: usize,
    },

    /// A single cell could not be parsed.
    #[error("row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// A column cannot be imputed because it has no observed values.
    #[error("column '{0}' has no observed values to impute from")]
    Imputation(String),

    /// A requested train/test split cannot be satisfied.
    #[error("split error: {0}")]
    Split(String),

    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A model or sidecar file is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// Runtime input (features, scores, labels) violates a precondition.
    #[error("invalid input: {0}")]
    Input(String),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
