//! Normalized 3D human-object spatial configuration volumes built from 2D
//! detections and recovered body points, together with the part attention,
//! consistency losses, score fusion and pose-ambiguity tools that operate on
//! them.
//!
//! The pipeline for one human-object pair:
//!
//! 1. [`geometry::estimate_sphere`] back-projects the object box to a sphere
//!    whose radius comes from a per-category prior ([`priors`]).
//! 2. [`volume::build_volume`] samples the body and the sphere surface,
//!    normalizes the frame and labels every point with a body part.
//! 3. [`maps2d`] rasterizes the box and pose maps for the 2D stream.
//!
//! The [`attention`] and [`losses`] modules evaluate the training objectives
//! with analytic gradients; [`gradcheck`] verifies them numerically.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ambiguity;
pub mod attention;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod losses;
pub mod maps2d;
pub mod priors;
pub mod skeleton;
pub mod tensor;
pub mod volume;

pub use error::{Error, Result};
