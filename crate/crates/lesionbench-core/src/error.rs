use alloc::string::String;
use core::fmt;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Grid construction violated an invariant (dims, spacing, data length, affine).
    InvalidGrid(String),
    /// Two volumes that must share geometry do not.
    ShapeMismatch(String),
    /// A parameter was out of its documented range.
    InvalidParameter(String),
    /// The requested interpolation mode is not valid for the input.
    InvalidMode(String),
    /// Aggregation excluded every case; there is no mean to report.
    EmptySummary,
    /// Results whose case_id has no metadata row.
    MissingMeta(alloc::vec::Vec<String>),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            CoreError::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            CoreError::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            CoreError::InvalidMode(msg) => write!(f, "invalid mode: {msg}"),
            CoreError::EmptySummary => write!(f, "all cases excluded, nothing to aggregate"),
            CoreError::MissingMeta(ids) => {
                write!(f, "results without metadata rows: {}", ids.join(", "))
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}
