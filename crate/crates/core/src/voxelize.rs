//! Rasterisation of capsule part masks, joint heatmaps and the background mask.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::skeleton::{Pose, SkeletonConfig};
use crate::tensor::{Dims3, Image, Volume};
use crate::Vec3;

/// Binary occupancy of one body part, stored as `0.0` / `1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartMask {
    name: String,
    dims: Dims3,
    data: Vec<f32>,
}

/// Inclusive voxel bounds `[min, max]` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelBounds {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl PartMask {
    pub fn empty(name: impl Into<String>, dims: Dims3) -> Self {
        Self {
            name: name.into(),
            dims,
            data: vec![0.0; dims.voxel_count()],
        }
    }

    /// Builds a mask from raw occupancy; every value must be exactly 0 or 1.
    pub fn from_data(name: impl Into<String>, dims: Dims3, data: Vec<f32>) -> Result<Self> {
        if data.len() != dims.voxel_count() {
            return Err(Error::Shape(format!(
                "mask has {} values, grid needs {}",
                data.len(),
                dims.voxel_count()
            )));
        }
        if data.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Range("mask values must be 0 or 1".into()));
        }
        Ok(Self {
            name: name.into(),
            dims,
            data,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, z: usize) -> bool {
        self.data[self.dims.index(y, x, z)] != 0.0
    }

    pub fn popcount(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Voxel-wise union with another mask on the same grid.
    pub fn union_with(&mut self, other: &PartMask) -> Result<()> {
        if other.dims != self.dims {
            return Err(Error::Shape("mask grids differ".into()));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            if b != 0.0 {
                *a = 1.0;
            }
        }
        Ok(())
    }

    /// Tight bounds of the occupied voxels, `None` for an empty mask.
    pub fn bounds(&self) -> Option<VoxelBounds> {
        let d = self.dims;
        let mut min = [usize::MAX; 3];
        let mut max = [0usize; 3];
        let mut any = false;
        for y in 0..d.height {
            for x in 0..d.width {
                for z in 0..d.depth {
                    if self.data[d.index(y, x, z)] != 0.0 {
                        any = true;
                        for (axis, v) in [y, x, z].into_iter().enumerate() {
                            min[axis] = min[axis].min(v);
                            max[axis] = max[axis].max(v);
                        }
                    }
                }
            }
        }
        any.then_some(VoxelBounds { min, max })
    }

    /// Occupancy collapsed over depth: `H x W`, 1 where any layer is set.
    pub fn depth_projection(&self) -> Vec<f32> {
        let d = self.dims;
        let mut out = vec![0.0f32; d.height * d.width];
        for y in 0..d.height {
            for x in 0..d.width {
                let start = d.index(y, x, 0);
                if self.data[start..start + d.depth].iter().any(|&v| v != 0.0) {
                    out[y * d.width + x] = 1.0;
                }
            }
        }
        out
    }
}

/// Euclidean distance from `p` to the closed segment `[a, b]`.
pub fn segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    libm::sqrt(segment_distance_sq(p, a, b))
}

#[inline]
fn segment_distance_sq(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let ap = p - a;
    let len_sq = ab.norm_squared();
    let t = if len_sq > 0.0 {
        (ap.dot(&ab) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (ap - ab * t).norm_squared()
}

/// Orders endpoints lexicographically so a capsule rasterises identically
/// whichever end is given first.
fn canonical_endpoints(p0: Vec3, p1: Vec3) -> (Vec3, Vec3) {
    let key = |p: &Vec3| [p.x, p.y, p.z];
    match key(&p0).partial_cmp(&key(&p1)) {
        Some(core::cmp::Ordering::Greater) => (p1, p0),
        _ => (p0, p1),
    }
}

/// Axis range of voxel centres within `[lo, hi]`, clipped to `0..n`.
fn voxel_span(lo: f64, hi: f64, n: usize) -> core::ops::Range<usize> {
    let start = libm::ceil(lo).max(0.0);
    let end = libm::floor(hi) + 1.0;
    if end <= start {
        return 0..0;
    }
    (start.min(n as f64) as usize)..(end.min(n as f64) as usize)
}

/// Sets every voxel whose centre lies within `radius` of the segment `[p0, p1]`.
/// Coincident endpoints give a sphere.
pub fn capsule_mask(dims: Dims3, p0: &Vec3, p1: &Vec3, radius: f64) -> Result<PartMask> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Parameter(format!("capsule radius must be positive, got {radius}")));
    }
    if !p0.iter().chain(p1.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("capsule endpoint"));
    }
    let mut mask = PartMask::empty("capsule", dims);
    rasterize_capsule(&mut mask, *p0, *p1, radius);
    Ok(mask)
}

fn rasterize_capsule(mask: &mut PartMask, p0: Vec3, p1: Vec3, radius: f64) {
    let (a, b) = canonical_endpoints(p0, p1);
    let d = mask.dims;
    let r_sq = radius * radius;
    let lo = a.inf(&b);
    let hi = a.sup(&b);
    let ys = voxel_span(lo.x - radius, hi.x + radius, d.height);
    let xs = voxel_span(lo.y - radius, hi.y + radius, d.width);
    let zs = voxel_span(lo.z - radius, hi.z + radius, d.depth);
    for y in ys {
        for x in xs.clone() {
            for z in zs.clone() {
                let p = Vec3::new(y as f64, x as f64, z as f64);
                if segment_distance_sq(&p, &a, &b) <= r_sq {
                    mask.data[d.index(y, x, z)] = 1.0;
                }
            }
        }
    }
}

/// Capsules `(p0, p1, radius)` making up one part for the given pose.
pub fn part_capsules(
    part: &crate::skeleton::PartDefinition,
    pose: &Pose,
) -> Result<Vec<(Vec3, Vec3, f64)>> {
    let radius = part.radius_for(pose)?;
    part.segments()
        .into_iter()
        .map(|(a, b)| Ok((pose.joint(a)?, pose.joint(b)?, radius)))
        .collect()
}

/// Masks for every part of `cfg`, in config order, plus the names of parts
/// whose capsules missed the grid entirely.
#[derive(Debug, Clone, PartialEq)]
pub struct PartMaskSet {
    pub masks: Vec<PartMask>,
    pub empty_parts: Vec<String>,
}

impl PartMaskSet {
    pub fn warnings(&self) -> usize {
        self.empty_parts.len()
    }
}

pub fn part_masks(pose: &Pose, cfg: &SkeletonConfig, dims: Dims3) -> Result<PartMaskSet> {
    let mut masks = Vec::with_capacity(cfg.parts().len());
    let mut empty_parts = Vec::new();
    for part in cfg.parts() {
        let mut mask = PartMask::empty(part.name.clone(), dims);
        for (p0, p1, r) in part_capsules(part, pose)? {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Parameter(format!("part `{}` has radius {r}", part.name)));
            }
            rasterize_capsule(&mut mask, p0, p1, r);
        }
        if mask.is_empty() {
            empty_parts.push(part.name.clone());
        }
        masks.push(mask);
    }
    Ok(PartMaskSet { masks, empty_parts })
}

/// Foreground union projected over depth, dilated by a disk of radius
/// `dilation` pixels, then complemented: 1 marks known background.
pub fn background_mask(masks: &[PartMask], dilation: usize) -> Result<Image> {
    let first = masks.first().ok_or(Error::Empty("no part masks"))?;
    let d = first.dims;
    if masks.iter().any(|m| m.dims != d) {
        return Err(Error::Shape("part masks have different grids".into()));
    }
    let (h, w) = (d.height, d.width);
    let mut fg = vec![false; h * w];
    for m in masks {
        for (f, v) in fg.iter_mut().zip(m.depth_projection()) {
            *f |= v != 0.0;
        }
    }
    let fg = if dilation == 0 { fg } else { dilate(&fg, h, w, dilation) };
    let data = fg.into_iter().map(|f| if f { 0.0 } else { 1.0 }).collect();
    Image::from_data(h, w, 1, data)
}

fn dilate(src: &[bool], h: usize, w: usize, k: usize) -> Vec<bool> {
    let k = k as isize;
    let offsets: Vec<(isize, isize)> = (-k..=k)
        .flat_map(|dy| (-k..=k).map(move |dx| (dy, dx)))
        .filter(|(dy, dx)| dy * dy + dx * dx <= k * k)
        .collect();
    let mut out = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            if !src[y * w + x] {
                continue;
            }
            for &(dy, dx) in &offsets {
                let (yy, xx) = (y as isize + dy, x as isize + dx);
                if yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w {
                    out[yy as usize * w + xx as usize] = true;
                }
            }
        }
    }
    out
}

/// Gaussian width and cut-off for joint heatmaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapParams {
    pub sigma: f64,
    /// Cut-off radius in multiples of `sigma`.
    pub truncation: f64,
}

impl Default for HeatmapParams {
    fn default() -> Self {
        Self {
            sigma: 2.0,
            truncation: 3.0,
        }
    }
}

impl HeatmapParams {
    pub fn new(sigma: f64, truncation: f64) -> Result<Self> {
        let p = Self { sigma, truncation };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Parameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.truncation.is_finite() && self.truncation >= 1.0) {
            return Err(Error::Parameter(format!(
                "truncation must be at least 1, got {}",
                self.truncation
            )));
        }
        Ok(())
    }
}

/// One peak-normalised 3D Gaussian per joint, `H x W x D x J`.
pub fn gaussian_heatmaps(pose: &Pose, dims: Dims3, params: &HeatmapParams) -> Result<Volume> {
    params.validate()?;
    let j = pose.len();
    let mut out = Volume::zeros(dims, j)?;
    let cutoff = params.truncation * params.sigma;
    let cutoff_sq = cutoff * cutoff;
    let denom = 2.0 * params.sigma * params.sigma;
    for (c, (_, p)) in pose.joints().iter().enumerate() {
        for y in voxel_span(p.x - cutoff, p.x + cutoff, dims.height) {
            for x in voxel_span(p.y - cutoff, p.y + cutoff, dims.width) {
                for z in voxel_span(p.z - cutoff, p.z + cutoff, dims.depth) {
                    let d_sq = (Vec3::new(y as f64, x as f64, z as f64) - p).norm_squared();
                    if d_sq <= cutoff_sq {
                        out.set(y, x, z, c, libm::exp(-d_sq / denom) as f32);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Ablation variant: a 2D Gaussian around each joint's `(row, column)`
/// projection, copied unchanged to every depth layer.
pub fn heatmaps_2d_mode(pose: &Pose, dims: Dims3, params: &HeatmapParams) -> Result<Volume> {
    params.validate()?;
    let j = pose.len();
    let mut out = Volume::zeros(dims, j)?;
    let cutoff = params.truncation * params.sigma;
    let cutoff_sq = cutoff * cutoff;
    let denom = 2.0 * params.sigma * params.sigma;
    for (c, (_, p)) in pose.joints().iter().enumerate() {
        for y in voxel_span(p.x - cutoff, p.x + cutoff, dims.height) {
            for x in voxel_span(p.y - cutoff, p.y + cutoff, dims.width) {
                let (dy, dx) = (y as f64 - p.x, x as f64 - p.y);
                let d_sq = dy * dy + dx * dx;
                if d_sq <= cutoff_sq {
                    let v = libm::exp(-d_sq / denom) as f32;
                    for z in 0..dims.depth {
                        out.set(y, x, z, c, v);
                    }
                }
            }
        }
    }
    Ok(out)
}
