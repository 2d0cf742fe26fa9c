//! Two-stage defect inspection for periodic patterned textures.
//!
//! A cheap screening stage scores every lattice sub-region with the
//! locality-constrained reconstruction error of its aggregated HOG vector.
//! Only sub-regions that fail screening are cut into texture primitives and
//! examined by the dense-SIFT stage, which encodes each patch against a
//! per-position dictionary and compares the resulting index map with a
//! template.
//!
//! Modules, bottom-up:
//!
//! - [`imaging`]: rasters, Gaussian smoothing, projection curves.
//! - [`synthgen`]: seeded synthetic fabric with defect injection.
//! - [`segment`]: lattice segmentation into sub-regions and primitives.
//! - [`features`]: HOG blocks, aggregated HOG, dense SIFT.
//! - [`coding`]: K-Means codebooks and the coding family (hard, soft, LSC,
//!   LLC, restricted LLC) plus the reconstruction-error score.
//! - [`cascade`]: training, calibration and the two-stage detector.
//! - [`eval`]: metrics, ROC and the index-map versus histogram benchmark.

// Negated float comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod coding;
pub mod error;
pub mod eval;
pub mod features;
pub mod imaging;
pub mod segment;
pub mod synthgen;

pub use error::{Error, Result};
