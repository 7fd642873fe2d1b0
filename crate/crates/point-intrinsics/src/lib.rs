//! Intrinsic decomposition of colored point clouds built from RGB-D input.
//!
//! The pipeline: an RGB-D image becomes a colored point cloud, three
//! per-point MLP subnets estimate albedo, light direction and shading, and
//! the product of albedo and shading reconstructs the input. The crate also
//! ships the two-stage training loop, the losses, the standard evaluation
//! metrics, and a synthetic Lambertian scene generator with analytic ground
//! truth for end-to-end verification.

pub mod autodiff;
pub mod data;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod raster;
