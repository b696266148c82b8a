//! Synthetic voxel mannequin: a feature volume whose channel `i` lights up
//! exactly inside body part `i`, so reposing it has a known answer.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::skeleton::{CoordinateSpace, Pose, SkeletonConfig, DEFAULT_JOINTS};
use crate::tensor::{Dims3, Volume};
use crate::voxelize::{part_capsules, part_masks, segment_distance, PartMask};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct MannequinSpec {
    pub dims: Dims3,
    pub channels: usize,
    pub pose: Pose,
    pub skeleton: SkeletonConfig,
    /// Radial falloff inside each capsule (1 on the axis, 0.5 at the surface)
    /// instead of a constant 1.
    pub falloff: bool,
}

impl MannequinSpec {
    /// Standing figure from [`canonical_pose`] with the default skeleton.
    pub fn canonical(dims: Dims3, channels: usize) -> Self {
        Self {
            dims,
            channels,
            pose: canonical_pose(dims),
            skeleton: crate::skeleton::default_skeleton(),
            falloff: false,
        }
    }
}

/// Relative `(row, column, depth)` placement of the default joints.
const CANONICAL_LAYOUT: [[f64; 3]; 14] = [
    [0.06, 0.52, 0.56], // head_top
    [0.20, 0.50, 0.50], // neck
    [0.24, 0.43, 0.50], // l_shoulder
    [0.24, 0.57, 0.50], // r_shoulder
    [0.40, 0.35, 0.40], // l_elbow
    [0.40, 0.65, 0.60], // r_elbow
    [0.55, 0.31, 0.30], // l_wrist
    [0.55, 0.69, 0.70], // r_wrist
    [0.55, 0.45, 0.50], // l_hip
    [0.55, 0.55, 0.50], // r_hip
    [0.75, 0.44, 0.55], // l_knee
    [0.75, 0.56, 0.45], // r_knee
    [0.94, 0.43, 0.50], // l_ankle
    [0.94, 0.57, 0.50], // r_ankle
];

/// A slightly asymmetric standing pose scaled to fill `dims`, in voxel space.
pub fn canonical_pose(dims: Dims3) -> Pose {
    let extent = [
        (dims.height - 1) as f64,
        (dims.width - 1) as f64,
        (dims.depth - 1) as f64,
    ];
    let joints = DEFAULT_JOINTS
        .iter()
        .zip(CANONICAL_LAYOUT)
        .map(|(name, rel)| {
            (
                name.to_string(),
                Vec3::new(rel[0] * extent[0], rel[1] * extent[1], rel[2] * extent[2]),
            )
        })
        .collect();
    Pose::new(CoordinateSpace::Voxel, joints).expect("canonical pose is valid")
}

/// Builds the mannequin volume and the part masks it was painted from.
/// Channels past the part count stay zero.
pub fn make_mannequin(spec: &MannequinSpec) -> Result<(Volume, Vec<PartMask>)> {
    let parts = spec.skeleton.parts();
    if spec.channels < parts.len() {
        return Err(Error::Parameter(format!(
            "mannequin needs at least {} channels, got {}",
            parts.len(),
            spec.channels
        )));
    }
    if spec.pose.space() != CoordinateSpace::Voxel {
        return Err(Error::Space("voxel"));
    }
    let masks = part_masks(&spec.pose, &spec.skeleton, spec.dims)?.masks;
    let mut volume = Volume::zeros(spec.dims, spec.channels)?;
    let d = spec.dims;
    for (ch, (part, mask)) in parts.iter().zip(&masks).enumerate() {
        let capsules = if spec.falloff {
            part_capsules(part, &spec.pose)?
        } else {
            Vec::new()
        };
        for y in 0..d.height {
            for x in 0..d.width {
                for z in 0..d.depth {
                    if !mask.get(y, x, z) {
                        continue;
                    }
                    let value = if spec.falloff {
                        let p = Vec3::new(y as f64, x as f64, z as f64);
                        let rel = capsules
                            .iter()
                            .map(|(a, b, r)| segment_distance(&p, a, b) / r)
                            .fold(f64::INFINITY, f64::min);
                        (1.0 - 0.5 * rel.min(1.0)) as f32
                    } else {
                        1.0
                    };
                    volume.set(y, x, z, ch, value);
                }
            }
        }
    }
    Ok((volume, masks))
}
