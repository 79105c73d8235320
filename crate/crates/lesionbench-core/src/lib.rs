//! Core algorithms for volumetric lesion segmentation evaluation.
//!
//! Everything in this crate is pure computation over in-memory buffers:
//! voxel grids and label masks, isotropic resampling and z-score
//! normalization, Dice and surface Dice with an exact anisotropic
//! Euclidean distance transform, aggregation policies and subgroup
//! reports, precision-controlled probability ensembling, and the
//! training-side sampling / learning-rate schedules.
//!
//! The crate is `no_std` (with `alloc`); all file formats, the CLI and
//! report emission live in the companion `lesionbench` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod metrics;
pub mod preprocess;
pub mod schedules;

pub use error::CoreError;
pub use grid::{Affine4, LabelMask, VoxelGrid};
pub use metrics::MetricValue;
