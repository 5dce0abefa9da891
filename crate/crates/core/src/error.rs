use std::path::PathBuf;

/// Errors produced by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid parameters, mismatched truncations, bad configuration values.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data that cannot be used (non-finite samples and the like).
    #[error("data error: {0}")]
    Data(String),

    /// A result violated an internal invariant that should hold by construction.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    /// A non-finite coefficient appeared while stepping.
    #[error("blow-up at t = {t} in particle {particle}")]
    BlowUp { t: f64, particle: usize },

    /// Malformed snapshot or config file contents.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for failures that happen while a valid run is executing, as opposed
    /// to rejected inputs.
    pub fn is_runtime_failure(&self) -> bool {
        matches!(self, Error::BlowUp { .. } | Error::Consistency(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
