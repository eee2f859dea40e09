//! Pose-lifting CRF pipeline.
//!
//! Per-joint heat maps are reduced to ranked candidate modes, the best joint
//! assignments are enumerated exactly, every candidate 2D pose is lifted to 3D
//! by a small MLP, and candidates are re-ranked by how well the re-projected
//! lift agrees with the 2D pose.

pub mod error;
pub mod formats;
pub mod geometry;
pub mod heatmap;
pub mod inference;
pub mod lifter;
pub mod nbest;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
