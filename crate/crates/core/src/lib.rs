//! Articulated volumetric feature warping.
//!
//! A person's feature volume is cut into ten capsule-shaped body parts, each
//! part is moved by its own least-squares similarity transform fitted from
//! input and target joints, and the warped parts are recombined by an
//! elementwise maximum. Around that core sit the volumetric pose heatmaps,
//! the lift/project reshapes between 2D maps and volumes, background masking
//! and alpha compositing, and the evaluation metrics (SSIM, foreground SSIM,
//! PCK-AUC).
//!
//! The crate is `no_std` + `alloc`; file formats, threading and the command
//! line live in the `volwarp` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod mannequin;
pub mod metrics;
pub mod pipeline;
pub mod sampler;
pub mod skeleton;
pub mod tensor;
pub mod transform;
pub mod voxelize;
pub mod warp;

pub use nalgebra;

/// Continuous 3D point or vector in `(row, column, depth)` order.
pub type Vec3 = nalgebra::Vector3<f64>;

pub use error::{Error, Result};
pub use skeleton::{default_skeleton, CoordinateSpace, Pose, SkeletonConfig};
pub use tensor::{lift, project, Dims3, Image, Volume};
pub use transform::{fit_affine2, fit_helmert, Affine2, Helmert3};
pub use voxelize::{PartMask, HeatmapParams};
