//! File formats and reporting for the `msid` command-line tool.
//!
//! The numerical pipeline lives in `msid-core`; this crate adds the things
//! that need an operating system: CSV archives, selection files, JSON
//! model/spec/diagnostic documents, and the table rendering shared by the
//! CLI subcommands.

use std::path::PathBuf;

pub mod csvio;
pub mod modelio;
pub mod report;
pub mod selection;
pub mod specio;

/// Errors from reading or writing any of the file formats.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A malformed value, with the 1-based line it came from.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },
    /// A structural problem not tied to a single line.
    #[error("{path}: {msg}")]
    Schema { path: PathBuf, msg: String },
    #[error(transparent)]
    Core(#[from] msid_core::Error),
}

impl FormatError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(path: &std::path::Path, line: u64, msg: impl Into<String>) -> Self {
        FormatError::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn schema(path: &std::path::Path, msg: impl Into<String>) -> Self {
        FormatError::Schema {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }
}
