use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An index, wavenumber or argument outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: String, found: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A fit or statistic that has no well-defined value for the given data.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("unphysical field: {regularized} of {total} points below the vacuum threshold")]
    Unphysical { regularized: usize, total: usize },

    #[error("malformed dump {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
