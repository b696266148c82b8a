//! End-to-end reposing of a feature volume: part masks, per-part fits,
//! masked warp and target heatmaps, in any of the four 2D/3D ablation modes.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::skeleton::{correspondences, CoordinateSpace, Pose, SkeletonConfig};
use crate::tensor::Volume;
use crate::transform::{fit_affine2, fit_helmert, Affine2, Helmert3};
use crate::voxelize::{gaussian_heatmaps, heatmaps_2d_mode, part_masks, HeatmapParams, PartMask};
use crate::warp::{MaskedWarp2d, MaskedWarp3d, RowExecutor, Sequential};

/// Which stages run in 3D and which use the depth-free ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// 3D warping, 3D target heatmaps.
    Full3d,
    /// In-plane affine warping, 3D target heatmaps.
    Warp2d,
    /// 3D warping, depth-replicated 2D heatmaps.
    Pose2d,
    /// Both ablations.
    Both2d,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Full3d, Mode::Warp2d, Mode::Pose2d, Mode::Both2d];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Full3d => "3d",
            Mode::Warp2d => "2d-warp",
            Mode::Pose2d => "2d-pose",
            Mode::Both2d => "2d-both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn warps_in_3d(&self) -> bool {
        matches!(self, Mode::Full3d | Mode::Pose2d)
    }

    pub fn heatmaps_in_3d(&self) -> bool {
        matches!(self, Mode::Full3d | Mode::Warp2d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartTransform {
    Helmert(Helmert3),
    Affine(Affine2),
}

impl PartTransform {
    pub fn is_degenerate(&self) -> bool {
        match self {
            PartTransform::Helmert(t) => t.is_degenerate(),
            PartTransform::Affine(a) => a.is_degenerate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartFit {
    pub part: String,
    pub transform: PartTransform,
}

fn check_voxel_poses(input: &Pose, target: &Pose) -> Result<()> {
    if input.space() != CoordinateSpace::Voxel || target.space() != CoordinateSpace::Voxel {
        return Err(Error::Space("voxel"));
    }
    Ok(())
}

/// Fits one transform per part: similarities when `in_3d`, in-plane affines
/// from the `(row, column)` projections otherwise.
pub fn fit_parts(cfg: &SkeletonConfig, input: &Pose, target: &Pose, in_3d: bool) -> Result<Vec<PartFit>> {
    check_voxel_poses(input, target)?;
    cfg.parts()
        .iter()
        .map(|part| {
            let (src, dst) = correspondences(part, input, target)?;
            let transform = if in_3d {
                PartTransform::Helmert(fit_helmert(&src, &dst)?)
            } else {
                let flat = |pts: &[crate::Vec3]| pts.iter().map(|p| Vector2::new(p.x, p.y)).collect::<Vec<_>>();
                PartTransform::Affine(fit_affine2(&flat(&src), &flat(&dst))?)
            };
            Ok(PartFit {
                part: part.name.clone(),
                transform,
            })
        })
        .collect()
}

/// Applies fitted transforms to `volume` under `masks`. All fits must be of
/// one kind and align with the masks.
pub fn warp_with_fits(
    volume: &Volume,
    masks: &[PartMask],
    fits: &[PartFit],
    exec: &dyn RowExecutor,
) -> Result<Volume> {
    let helmerts: Option<Vec<Helmert3>> = fits
        .iter()
        .map(|f| match f.transform {
            PartTransform::Helmert(t) => Some(t),
            PartTransform::Affine(_) => None,
        })
        .collect();
    if let Some(ts) = helmerts {
        return Ok(MaskedWarp3d::new(volume, masks, &ts)?.render_with(exec));
    }
    let affines: Option<Vec<Affine2>> = fits
        .iter()
        .map(|f| match f.transform {
            PartTransform::Affine(a) => Some(a),
            PartTransform::Helmert(_) => None,
        })
        .collect();
    match affines {
        Some(a) => Ok(MaskedWarp2d::new(volume, masks, &a)?.render_with(exec)),
        None => Err(Error::Parameter("cannot mix 3D and 2D part transforms".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReposeOptions {
    pub mode: Mode,
    pub heatmap: HeatmapParams,
}

impl Default for ReposeOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Full3d,
            heatmap: HeatmapParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reposed {
    pub warped: Volume,
    pub heatmaps: Volume,
    pub masks: Vec<PartMask>,
    pub fits: Vec<PartFit>,
    /// Parts whose masks missed the grid.
    pub empty_parts: Vec<String>,
}

/// Runs masks -> correspondences -> fits -> masked warp -> target heatmaps.
pub fn repose_with(
    volume: &Volume,
    input: &Pose,
    target: &Pose,
    cfg: &SkeletonConfig,
    opts: &ReposeOptions,
    exec: &dyn RowExecutor,
) -> Result<Reposed> {
    check_voxel_poses(input, target)?;
    let dims = volume.dims();
    let set = part_masks(input, cfg, dims)?;
    let fits = fit_parts(cfg, input, target, opts.mode.warps_in_3d())?;
    let warped = warp_with_fits(volume, &set.masks, &fits, exec)?;
    let heatmaps = if opts.mode.heatmaps_in_3d() {
        gaussian_heatmaps(target, dims, &opts.heatmap)?
    } else {
        heatmaps_2d_mode(target, dims, &opts.heatmap)?
    };
    Ok(Reposed {
        warped,
        heatmaps,
        masks: set.masks,
        fits,
        empty_parts: set.empty_parts,
    })
}

/// Sequential [`repose_with`].
pub fn repose(
    volume: &Volume,
    input: &Pose,
    target: &Pose,
    cfg: &SkeletonConfig,
    opts: &ReposeOptions,
) -> Result<Reposed> {
    repose_with(volume, input, target, cfg, opts, &Sequential)
}
