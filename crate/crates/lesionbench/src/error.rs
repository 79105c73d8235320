use std::path::PathBuf;

use lesionbench_core::CoreError;

/// Errors from file parsing and emission.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: not a NIfTI-1 file: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: unsupported NIfTI datatype code {code}")]
    UnsupportedType { path: PathBuf, code: i16 },
    #[error("{path}: truncated: expected {expected} data bytes, found {found}")]
    Truncated { path: PathBuf, expected: usize, found: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {reason}")]
    MetaRow { path: PathBuf, line: u64, reason: String },
    #[error("{path}: duplicate case_id {case_id}")]
    DuplicateCase { path: PathBuf, case_id: String },
    #[error("{path}: {reason}")]
    MetaFormat { path: PathBuf, reason: String },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl IoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.into(),
            source,
        }
    }
}
