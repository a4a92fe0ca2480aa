//! Crate-wide error type and the exit-code contract of the CLI.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operating-system level failure while touching `path`.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file exists and is readable but its contents violate the expected
    /// format (bad magic, wrong column count, inconsistent header, ...).
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    /// A caller handed an operation arguments it cannot work with.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The run configuration itself is unusable (missing keys, duplicate
    /// airports, unknown region, ...). Distinguished from `InvalidArgument`
    /// because the CLI maps it to the usage exit code.
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }

    /// Process exit code for the CLI: 0 success, 1 usage, 2 data, 3 internal.
    /// `Io`/`Format` are data errors (2); bad configuration or arguments are
    /// usage errors (1). Code 3 is reserved for panics and other defects and
    /// is produced by the binary's top level, not by this enum.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 1,
            Error::Io { .. } | Error::Format { .. } => 2,
        }
    }

    /// Single-line machine-readable rendering for standard error.
    pub fn machine_line(&self) -> String {
        let kind = match self {
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
        };
        format!(
            "error: {}",
            serde_json::json!({ "kind": kind, "message": self.to_string() })
        )
    }
}
