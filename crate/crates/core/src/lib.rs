//! Stereo training data from 3D reconstructions.
//!
//! Reads COLMAP sparse models, triangle meshes and Gaussian-splat scenes,
//! renders rectified virtual stereo pairs with pseudo ground-truth disparity,
//! ranks cameras by how well they observe the reconstructed geometry, and
//! evaluates disparity predictions with the bad-τ metric.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod colmap;
pub mod dataset;
pub mod eval;
pub mod formats;
pub mod geometry;
pub mod mesh;
pub mod observability;
pub mod procedural;
pub mod raster;
pub mod raycast;
pub mod splat;
pub mod stereo;
