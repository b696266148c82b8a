//! Masked per-part warping with max composition, background fill and
//! alpha compositing.
//!
//! Both warps map backwards: each output voxel is inverse-transformed into
//! the source and the masked volume `M_i * V` is interpolated there. Parts are
//! combined by an elementwise maximum per voxel and channel; samples that land
//! outside a part's support read zero, so zero is the floor whenever some part
//! misses the voxel.
//!
//! Kernels render whole output rows (`y`), which lets callers split the work
//! across threads through a [`RowExecutor`] without changing any value.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::tensor::{sample_bilinear_slice, sample_trilinear, Dims3, Image, Volume};
use crate::transform::{Affine2, Helmert3};
use crate::voxelize::{PartMask, VoxelBounds};
use crate::Vec3;

/// Runs a row kernel over `rows` output rows of `row_len` values each.
pub trait RowExecutor {
    fn run(&self, rows: usize, row_len: usize, out: &mut [f32], kernel: &(dyn Fn(Range<usize>, &mut [f32]) + Sync));
}

/// Single-threaded executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl RowExecutor for Sequential {
    fn run(&self, rows: usize, _row_len: usize, out: &mut [f32], kernel: &(dyn Fn(Range<usize>, &mut [f32]) + Sync)) {
        kernel(0..rows, out);
    }
}

#[inline]
fn fold_max(acc: &mut [f32], values: impl Iterator<Item = f32>) {
    for (a, v) in acc.iter_mut().zip(values) {
        // `+ 0.0` maps -0 to +0 so the max is order independent bit for bit.
        let v = v + 0.0;
        if v > *a {
            *a = v;
        }
    }
}

fn check_parts(volume_dims: Dims3, masks: &[PartMask], n_transforms: usize) -> Result<()> {
    if masks.len() != n_transforms {
        return Err(Error::CountMismatch {
            src: masks.len(),
            dst: n_transforms,
        });
    }
    if masks.is_empty() {
        return Err(Error::Empty("no parts to warp"));
    }
    if let Some(m) = masks.iter().find(|m| m.dims() != volume_dims) {
        return Err(Error::Shape(format!(
            "mask `{}` grid {:?} differs from volume grid {:?}",
            m.name(),
            m.dims(),
            volume_dims
        )));
    }
    Ok(())
}

struct Part3<'a> {
    mask: &'a [f32],
    inverse: Helmert3,
    /// Source points strictly outside `(min - 1, max + 1)` on any axis touch no masked voxel.
    support: Option<([f64; 3], [f64; 3])>,
}

fn open_support(b: Option<VoxelBounds>) -> Option<([f64; 3], [f64; 3])> {
    b.map(|b| {
        (
            b.min.map(|v| v as f64 - 1.0),
            b.max.map(|v| v as f64 + 1.0),
        )
    })
}

#[inline]
fn inside(p: &[f64], support: &([f64; 3], [f64; 3]), axes: usize) -> bool {
    (0..axes).all(|i| p[i] > support.0[i] && p[i] < support.1[i])
}

/// `V' = max_i T_i(M_i * V)` with trilinear backward sampling.
pub struct MaskedWarp3d<'a> {
    volume: &'a Volume,
    parts: Vec<Part3<'a>>,
}

impl<'a> MaskedWarp3d<'a> {
    pub fn new(volume: &'a Volume, masks: &'a [PartMask], transforms: &[Helmert3]) -> Result<Self> {
        check_parts(volume.dims(), masks, transforms.len())?;
        let parts = masks
            .iter()
            .zip(transforms)
            .map(|(m, t)| Part3 {
                mask: m.data(),
                inverse: t.invert(),
                support: open_support(m.bounds()),
            })
            .collect();
        Ok(Self { volume, parts })
    }

    fn row_len(&self) -> usize {
        let d = self.volume.dims();
        d.width * d.depth * self.volume.channels()
    }

    /// Renders output rows `rows` into `out` (exactly `rows.len()` rows).
    pub fn render_rows(&self, rows: Range<usize>, out: &mut [f32]) {
        let d = self.volume.dims();
        let c = self.volume.channels();
        debug_assert_eq!(out.len(), rows.len() * self.row_len());
        let mut sample = vec![0.0f64; c];
        let mut acc = vec![0.0f32; c];
        let mut k = 0;
        for y in rows {
            for x in 0..d.width {
                for z in 0..d.depth {
                    acc.fill(f32::NEG_INFINITY);
                    let target = Vec3::new(y as f64, x as f64, z as f64);
                    for part in &self.parts {
                        let q = part.inverse.apply(&target);
                        let hit = part
                            .support
                            .as_ref()
                            .is_some_and(|s| inside(q.as_slice(), s, 3));
                        if hit {
                            sample.fill(0.0);
                            sample_trilinear(self.volume, Some(part.mask), [q.x, q.y, q.z], &mut sample);
                            fold_max(&mut acc, sample.iter().map(|&v| v as f32));
                        } else {
                            fold_max(&mut acc, core::iter::repeat_n(0.0, c));
                        }
                    }
                    out[k..k + c].copy_from_slice(&acc);
                    k += c;
                }
            }
        }
    }

    pub fn render_with(&self, exec: &dyn RowExecutor) -> Volume {
        let d = self.volume.dims();
        let mut out = vec![0.0f32; d.voxel_count() * self.volume.channels()];
        exec.run(d.height, self.row_len(), &mut out, &|rows, buf| self.render_rows(rows, buf));
        Volume::from_data(d, self.volume.channels(), out).expect("warp output is finite")
    }
}

/// Sequential [`MaskedWarp3d`].
pub fn masked_warp_3d(volume: &Volume, masks: &[PartMask], transforms: &[Helmert3]) -> Result<Volume> {
    Ok(MaskedWarp3d::new(volume, masks, transforms)?.render_with(&Sequential))
}

struct Part2 {
    mask2d: Vec<f32>,
    inverse: Affine2,
    support: Option<([f64; 3], [f64; 3])>,
}

/// Ablation warp: masks collapsed over depth and replicated to every layer,
/// each depth slice warped by the same in-plane affine, no mixing across depth.
pub struct MaskedWarp2d<'a> {
    volume: &'a Volume,
    parts: Vec<Part2>,
}

impl<'a> MaskedWarp2d<'a> {
    pub fn new(volume: &'a Volume, masks: &[PartMask], affines: &[Affine2]) -> Result<Self> {
        check_parts(volume.dims(), masks, affines.len())?;
        let w = volume.dims().width;
        let parts = masks
            .iter()
            .zip(affines)
            .map(|(m, a)| {
                let mask2d = m.depth_projection();
                let mut bounds: Option<VoxelBounds> = None;
                for (i, _) in mask2d.iter().enumerate().filter(|(_, &v)| v != 0.0) {
                    let (y, x) = (i / w, i % w);
                    let b = bounds.get_or_insert(VoxelBounds {
                        min: [y, x, 0],
                        max: [y, x, 0],
                    });
                    b.min[0] = b.min[0].min(y);
                    b.min[1] = b.min[1].min(x);
                    b.max[0] = b.max[0].max(y);
                    b.max[1] = b.max[1].max(x);
                }
                Ok(Part2 {
                    mask2d,
                    inverse: a.invert()?,
                    support: open_support(bounds),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { volume, parts })
    }

    fn row_len(&self) -> usize {
        let d = self.volume.dims();
        d.width * d.depth * self.volume.channels()
    }

    pub fn render_rows(&self, rows: Range<usize>, out: &mut [f32]) {
        let d = self.volume.dims();
        let c = self.volume.channels();
        debug_assert_eq!(out.len(), rows.len() * self.row_len());
        let mut sample = vec![0.0f64; c];
        let mut sources: Vec<Option<[f64; 2]>> = vec![None; self.parts.len()];
        let mut acc = vec![0.0f32; c];
        let mut k = 0;
        for y in rows {
            for x in 0..d.width {
                let target = Vector2::new(y as f64, x as f64);
                for (src, part) in sources.iter_mut().zip(&self.parts) {
                    let q = part.inverse.apply(&target);
                    *src = part
                        .support
                        .as_ref()
                        .is_some_and(|s| inside(q.as_slice(), s, 2))
                        .then_some([q.x, q.y]);
                }
                for z in 0..d.depth {
                    acc.fill(f32::NEG_INFINITY);
                    for (src, part) in sources.iter().zip(&self.parts) {
                        match src {
                            Some(q) => {
                                sample.fill(0.0);
                                sample_bilinear_slice(self.volume, Some(&part.mask2d), *q, z, &mut sample);
                                fold_max(&mut acc, sample.iter().map(|&v| v as f32));
                            }
                            None => fold_max(&mut acc, core::iter::repeat_n(0.0, c)),
                        }
                    }
                    out[k..k + c].copy_from_slice(&acc);
                    k += c;
                }
            }
        }
    }

    pub fn render_with(&self, exec: &dyn RowExecutor) -> Volume {
        let d = self.volume.dims();
        let mut out = vec![0.0f32; d.voxel_count() * self.volume.channels()];
        exec.run(d.height, self.row_len(), &mut out, &|rows, buf| self.render_rows(rows, buf));
        Volume::from_data(d, self.volume.channels(), out).expect("warp output is finite")
    }
}

/// Sequential [`MaskedWarp2d`].
pub fn masked_warp_2d(volume: &Volume, masks: &[PartMask], affines: &[Affine2]) -> Result<Volume> {
    Ok(MaskedWarp2d::new(volume, masks, affines)?.render_with(&Sequential))
}

/// `max_i (M_i * V)` without any motion.
pub fn masked_union(volume: &Volume, masks: &[PartMask]) -> Result<Volume> {
    check_parts(volume.dims(), masks, masks.len())?;
    let c = volume.channels();
    let mut out = Volume::zeros(volume.dims(), c)?;
    let src = volume.data();
    for (cell, dst) in out.data_mut().chunks_exact_mut(c).enumerate() {
        dst.fill(f32::NEG_INFINITY);
        for m in masks {
            let factor = m.data()[cell];
            fold_max(dst, src[cell * c..(cell + 1) * c].iter().map(|&v| factor * v));
        }
    }
    Ok(out)
}

const SMOOTHING_SWEEPS: usize = 3;

fn check_binary_mask(mask: &Image, h: usize, w: usize) -> Result<()> {
    if mask.shape() != [h, w, 1] {
        return Err(Error::Shape(format!(
            "mask shape {:?} does not match image {h}x{w}x1",
            mask.shape()
        )));
    }
    if mask.data().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Range("background mask must be binary".into()));
    }
    Ok(())
}

fn scan_order(h: usize, w: usize, sweep: usize) -> impl Iterator<Item = usize> {
    let n = h * w;
    let forward = sweep.is_multiple_of(2);
    (0..n).map(move |i| if forward { i } else { n - 1 - i })
}

fn neighbours(i: usize, h: usize, w: usize) -> impl Iterator<Item = usize> {
    let (y, x) = (i / w, i % w);
    [
        (y > 0).then(|| i - w),
        (y + 1 < h).then(|| i + w),
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
    ]
    .into_iter()
    .flatten()
}

/// Fills pixels outside the known background (`bg_mask == 0`) by repeated
/// 4-neighbour averaging, then smooths the filled region.
///
/// Sweeps scan row-major, alternating forward and backward; a pixel filled
/// earlier in a sweep is visible to later pixels of the same sweep. Each fill
/// is a convex combination of known values, so results stay within the known
/// range per channel.
pub fn inpaint_background(img: &Image, bg_mask: &Image) -> Result<Image> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    check_binary_mask(bg_mask, h, w)?;
    let known: Vec<bool> = bg_mask.data().iter().map(|&v| v == 1.0).collect();
    if !known.iter().any(|&k| k) {
        return Err(Error::Empty("background mask has no known pixels"));
    }
    let mut out = img.clone();
    let mut filled = known.clone();
    let mut remaining = filled.iter().filter(|f| !**f).count();
    let mut mean = vec![0.0f64; c];
    let mut sweep = 0;
    while remaining > 0 {
        for i in scan_order(h, w, sweep) {
            if filled[i] {
                continue;
            }
            mean.fill(0.0);
            let mut count = 0usize;
            for j in neighbours(i, h, w).filter(|&j| filled[j]) {
                count += 1;
                for (m, &v) in mean.iter_mut().zip(&out.data()[j * c..(j + 1) * c]) {
                    *m += v as f64;
                }
            }
            if count > 0 {
                for (dst, m) in out.data_mut()[i * c..(i + 1) * c].iter_mut().zip(&mean) {
                    *dst = (m / count as f64) as f32;
                }
                filled[i] = true;
                remaining -= 1;
            }
        }
        sweep += 1;
    }
    for s in 0..SMOOTHING_SWEEPS {
        for i in scan_order(h, w, sweep + s) {
            if known[i] {
                continue;
            }
            mean.fill(0.0);
            let mut count = 0usize;
            for j in neighbours(i, h, w) {
                count += 1;
                for (m, &v) in mean.iter_mut().zip(&out.data()[j * c..(j + 1) * c]) {
                    *m += v as f64;
                }
            }
            if count > 0 {
                for (dst, m) in out.data_mut()[i * c..(i + 1) * c].iter_mut().zip(&mean) {
                    *dst = (m / count as f64) as f32;
                }
            }
        }
    }
    Ok(out)
}

/// Alpha blend `mask * fg + (1 - mask) * bg`.
pub fn composite(fg: &Image, fg_mask: &Image, bg: &Image) -> Result<Image> {
    if fg.shape() != bg.shape() {
        return Err(Error::Shape(format!(
            "foreground {:?} and background {:?} differ",
            fg.shape(),
            bg.shape()
        )));
    }
    let (h, w, c) = (fg.height(), fg.width(), fg.channels());
    if fg_mask.shape() != [h, w, 1] {
        return Err(Error::Shape(format!(
            "mask shape {:?} does not match image {h}x{w}x1",
            fg_mask.shape()
        )));
    }
    if let Some(v) = fg_mask.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Range(format!("mask value {v} outside [0, 1]")));
    }
    let mut out = fg.clone();
    for (i, &m) in fg_mask.data().iter().enumerate() {
        for k in i * c..(i + 1) * c {
            out.data_mut()[k] = m * fg.data()[k] + (1.0 - m) * bg.data()[k];
        }
    }
    Ok(out)
}
