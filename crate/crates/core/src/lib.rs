//! Hilbert-curve ROI spatial correlation features for resting-state fMRI and
//! the small CNN classifiers trained on them.
//!
//! The pipeline runs 4D volumes through slice-timing correction, Gaussian
//! smoothing and time-averaging, reads each region's voxels along a 3D Hilbert
//! curve segment centred on its seed, and correlates the resulting arrays into
//! a symmetric region-by-region matrix per subject.

// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod features;
pub mod hilbert;
pub mod manifest;
pub mod nn;
pub mod preprocess;
pub mod rng;
pub mod synth;
pub mod volume;

pub use error::{Error, Result};
