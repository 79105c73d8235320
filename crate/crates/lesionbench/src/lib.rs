//! File formats, reports and the command-line interface for the
//! lesionbench toolkit. The algorithms live in `lesionbench-core`.

pub mod cli;
pub mod error;
pub mod meta;
pub mod nifti;
pub mod report;

pub use error::IoError;
