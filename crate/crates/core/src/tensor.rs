//! Dense feature tensors and the resampling primitives shared by the warps.
//!
//! Layouts are row-major: a [`Volume`] is indexed `(y, x, z, c)` and an
//! [`Image`] `(y, x, k)`. Voxel `(y, x, z)` is centred on the continuous
//! coordinate `(y, x, z)`; samples outside the lattice read zero.
//!
//! Because a volume's `(z, c)` pair flattens to `z * C + c`, the depth-major
//! channel split of [`lift`] shares its memory layout with the image it came
//! from, so [`lift`] and [`project`] never touch a value.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::Vec3;

/// Sample coordinates closer than this to an integer are treated as lying on
/// the lattice. Fitted transforms carry ~1e-14 rounding noise; without the
/// snap, integer-valued warps would leak that noise across mask borders.
pub const LATTICE_SNAP: f64 = 1e-9;

/// Spatial extent of a volume or mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims3 {
    pub height: usize,
    pub width: usize,
    pub depth: usize,
}

impl Dims3 {
    pub fn new(height: usize, width: usize, depth: usize) -> Result<Self> {
        if height == 0 || width == 0 || depth == 0 {
            return Err(Error::EmptyExtent);
        }
        Ok(Self {
            height,
            width,
            depth,
        })
    }

    pub fn voxel_count(&self) -> usize {
        self.height * self.width * self.depth
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, z: usize) -> usize {
        (y * self.width + x) * self.depth + z
    }

    #[inline]
    pub fn contains(&self, y: isize, x: isize, z: isize) -> bool {
        y >= 0
            && x >= 0
            && z >= 0
            && (y as usize) < self.height
            && (x as usize) < self.width
            && (z as usize) < self.depth
    }
}

/// An `H x W x D x C` feature volume of 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: Dims3,
    channels: usize,
    data: Vec<f32>,
}

impl Volume {
    pub fn zeros(dims: Dims3, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::EmptyExtent);
        }
        Ok(Self {
            dims,
            channels,
            data: vec![0.0; dims.voxel_count() * channels],
        })
    }

    /// Wraps existing data; rejects length mismatches and non-finite values.
    pub fn from_data(dims: Dims3, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::EmptyExtent);
        }
        let expected = dims.voxel_count() * channels;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "volume data has {} values, shape needs {expected}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("volume data"));
        }
        Ok(Self {
            dims,
            channels,
            data,
        })
    }

    pub fn dims(&self) -> Dims3 {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> [usize; 4] {
        [
            self.dims.height,
            self.dims.width,
            self.dims.depth,
            self.channels,
        ]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, z: usize, c: usize) -> usize {
        self.dims.index(y, x, z) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, z: usize, c: usize) -> f32 {
        self.data[self.index(y, x, z, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, z: usize, c: usize, value: f32) {
        let i = self.index(y, x, z, c);
        self.data[i] = value;
    }

    /// Feature vector stored at a voxel.
    pub fn voxel(&self, y: usize, x: usize, z: usize) -> &[f32] {
        let start = self.dims.index(y, x, z) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Trilinear interpolation at a continuous point with zero padding.
    pub fn sample(&self, p: &Vec3) -> Result<Vec<f32>> {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(Error::NonFinite("sample point"));
        }
        let mut acc = vec![0.0f64; self.channels];
        sample_trilinear(self, None, [p.x, p.y, p.z], &mut acc);
        Ok(acc.into_iter().map(|v| v as f32).collect())
    }
}

/// An `H x W x C` image or 2D feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::EmptyExtent);
        }
        Ok(Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        })
    }

    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::EmptyExtent);
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "image data has {} values, shape needs {expected}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image data"));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Image with every value set to `value`.
    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        let mut img = Self::zeros(height, width, channels)?;
        img.data.fill(value);
        Ok(img)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f32) {
        let i = self.index(y, x, c);
        self.data[i] = value;
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[f32] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// Copies one channel out as a single-channel image.
    pub fn channel(&self, c: usize) -> Result<Image> {
        if c >= self.channels {
            return Err(Error::Shape(format!(
                "channel {c} out of range for {} channels",
                self.channels
            )));
        }
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Image::from_data(self.height, self.width, 1, data)
    }
}

/// Splits the channels of a 2D map into `depth` layers of `channels` each.
///
/// Channel `k` of the map becomes depth `k / channels`, channel `k % channels`.
pub fn lift(map: &Image, depth: usize, channels: usize) -> Result<Volume> {
    if depth == 0 || channels == 0 || map.channels != depth * channels {
        return Err(Error::ChannelSplit {
            channels: map.channels,
            depth,
            per_layer: channels,
        });
    }
    let dims = Dims3::new(map.height, map.width, depth)?;
    Ok(Volume {
        dims,
        channels,
        data: map.data.clone(),
    })
}

/// Folds depth and channels back into a single channel axis; inverse of [`lift`].
pub fn project(volume: &Volume) -> Image {
    Image {
        height: volume.dims.height,
        width: volume.dims.width,
        channels: volume.dims.depth * volume.channels,
        data: volume.data.clone(),
    }
}

#[inline]
pub(crate) fn snap(c: f64) -> f64 {
    let r = libm::round(c);
    if libm::fabs(c - r) <= LATTICE_SNAP {
        r
    } else {
        c
    }
}

/// Lower lattice corner and the weights of the lower/upper corners along one axis.
#[inline]
fn axis_weights(c: f64) -> (isize, f64, f64) {
    let c = snap(c);
    let lo = libm::floor(c);
    let f = c - lo;
    (lo as isize, 1.0 - f, f)
}

/// Accumulates the trilinear sample of `volume` (optionally multiplied by a
/// binary `mask` over the same spatial grid) into `acc`, which must be zeroed
/// by the caller and have `channels` entries.
pub(crate) fn sample_trilinear(volume: &Volume, mask: Option<&[f32]>, p: [f64; 3], acc: &mut [f64]) {
    let dims = volume.dims;
    let c = volume.channels;
    let (y0, wy0, wy1) = axis_weights(p[0]);
    let (x0, wx0, wx1) = axis_weights(p[1]);
    let (z0, wz0, wz1) = axis_weights(p[2]);
    for (dy, wy) in [(0isize, wy0), (1, wy1)] {
        if wy == 0.0 {
            continue;
        }
        for (dx, wx) in [(0isize, wx0), (1, wx1)] {
            if wx == 0.0 {
                continue;
            }
            for (dz, wz) in [(0isize, wz0), (1, wz1)] {
                if wz == 0.0 {
                    continue;
                }
                let (yy, xx, zz) = (y0 + dy, x0 + dx, z0 + dz);
                if !dims.contains(yy, xx, zz) {
                    continue;
                }
                let cell = dims.index(yy as usize, xx as usize, zz as usize);
                if let Some(m) = mask {
                    if m[cell] == 0.0 {
                        continue;
                    }
                }
                let w = wy * wx * wz;
                let base = cell * c;
                for (a, &v) in acc.iter_mut().zip(&volume.data[base..base + c]) {
                    *a += w * v as f64;
                }
            }
        }
    }
}

/// In-plane bilinear sample of depth slice `z`, optionally multiplied by a
/// binary `mask2d` over the `H x W` plane.
pub(crate) fn sample_bilinear_slice(
    volume: &Volume,
    mask2d: Option<&[f32]>,
    p: [f64; 2],
    z: usize,
    acc: &mut [f64],
) {
    let dims = volume.dims;
    let c = volume.channels;
    let (y0, wy0, wy1) = axis_weights(p[0]);
    let (x0, wx0, wx1) = axis_weights(p[1]);
    for (dy, wy) in [(0isize, wy0), (1, wy1)] {
        if wy == 0.0 {
            continue;
        }
        for (dx, wx) in [(0isize, wx0), (1, wx1)] {
            if wx == 0.0 {
                continue;
            }
            let (yy, xx) = (y0 + dy, x0 + dx);
            if !dims.contains(yy, xx, z as isize) {
                continue;
            }
            let (yy, xx) = (yy as usize, xx as usize);
            if let Some(m) = mask2d {
                if m[yy * dims.width + xx] == 0.0 {
                    continue;
                }
            }
            let w = wy * wx;
            let base = dims.index(yy, xx, z) * c;
            for (a, &v) in acc.iter_mut().zip(&volume.data[base..base + c]) {
                *a += w * v as f64;
            }
        }
    }
}
