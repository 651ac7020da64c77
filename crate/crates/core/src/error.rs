use std::path::PathBuf;

/// Errors raised by the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: schema violation: {message}")]
    Schema { path: String, message: String },

    #[error("shape mismatch in `{field}`: expected {expected}, found {found}")]
    Shape {
        field: String,
        expected: String,
        found: String,
    },

    #[error("non-finite value in `{field}` at [{row}][{col}]")]
    NonFinite { field: String, row: usize, col: usize },

    #[error("unsupported format_version {found} (this build reads version {expected})")]
    Version { found: u64, expected: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn shape(field: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            field: field.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
