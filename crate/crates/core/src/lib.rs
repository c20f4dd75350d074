//! Temporally coherent video and spherical-image stylization by energy
//! minimization.
//!
//! The crate couples a deterministic seeded convolutional feature extractor
//! (content and style losses over its taps) with optical-flow-derived
//! temporal losses, a limited-memory quasi-Newton solver, a multi-pass
//! refinement scheme, cubemap border-consistency machinery for spherical
//! media, evaluation metrics and a synthetic ground-truth generator.

pub mod config;
pub mod consistency;
pub mod cubemap;
pub mod energy;
pub mod error;
pub mod io;
pub mod manifest;
pub mod metrics;
pub mod multipass;
pub mod perceptual;
pub mod raster;
pub mod report;
pub mod solver;
pub mod synth;
pub mod video;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use raster::{weight_flags, FlowDirection, FlowField, RasterImage, WeightMap};
