//! VOLT tensor container.
//!
//! Layout: the four magic bytes `VOLT`, a little-endian `u32` header length,
//! a UTF-8 JSON header
//! `{"dtype":"f32","shape":[...],"order":"row-major","kind":"volume"}`, then
//! the row-major payload as little-endian `f32`. Rank is 3 or 4.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use volwarp_core::{Dims3, Image, PartMask, Volume};

use crate::error::{io_at, Error, Result};

pub const MAGIC: &[u8; 4] = b"VOLT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Volume,
    Image,
    Mask,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Volume => "volume",
            Kind::Image => "image",
            Kind::Mask => "mask",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Kind::Volume, Kind::Image, Kind::Mask].into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub kind: Kind,
    pub data: Vec<f32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dtype: String,
    shape: Vec<usize>,
    order: String,
    kind: String,
}

fn element_count(shape: &[usize]) -> Result<usize> {
    if !(3..=4).contains(&shape.len()) {
        return Err(Error::Volt(format!("rank must be 3 or 4, got {}", shape.len())));
    }
    if shape.contains(&0) {
        return Err(Error::Volt("zero-sized dimension".into()));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Volt("shape overflows".into()))
}

impl Tensor {
    pub fn new(shape: Vec<usize>, kind: Kind, data: Vec<f32>) -> Result<Self> {
        let n = element_count(&shape)?;
        if n != data.len() {
            return Err(Error::Volt(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Self { shape, kind, data })
    }

    pub fn encode(&self) -> Vec<u8> {
        let dims: Vec<String> = self.shape.iter().map(|d| d.to_string()).collect();
        let header = format!(
            "{{\"dtype\":\"f32\",\"shape\":[{}],\"order\":\"row-major\",\"kind\":\"{}\"}}",
            dims.join(","),
            self.kind.as_str()
        );
        let mut out = Vec::with_capacity(8 + header.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Volt("truncated preamble".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Volt(format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..4]))));
        }
        let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let body = &bytes[8..];
        if body.len() < header_len {
            return Err(Error::Volt("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&body[..header_len])
            .map_err(|e| Error::Volt(format!("malformed header: {e}")))?;
        if header.dtype != "f32" {
            return Err(Error::Volt(format!("unsupported dtype `{}`", header.dtype)));
        }
        if header.order != "row-major" {
            return Err(Error::Volt(format!("unsupported order `{}`", header.order)));
        }
        let kind = Kind::parse(&header.kind).ok_or_else(|| Error::Volt(format!("unknown kind `{}`", header.kind)))?;
        let n = element_count(&header.shape)?;
        let payload = &body[header_len..];
        if payload.len() != 4 * n {
            return Err(Error::Volt(format!(
                "payload size mismatch: shape {:?} needs {} bytes, found {}",
                header.shape,
                4 * n,
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            shape: header.shape,
            kind,
            data,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path).map_err(io_at(path))?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(io_at(path))
    }

    pub fn from_volume(v: &Volume) -> Self {
        Self {
            shape: v.shape().to_vec(),
            kind: Kind::Volume,
            data: v.data().to_vec(),
        }
    }

    pub fn from_image(img: &Image, kind: Kind) -> Self {
        Self {
            shape: img.shape().to_vec(),
            kind,
            data: img.data().to_vec(),
        }
    }

    /// Part masks stacked on a trailing axis: `H x W x D x N`.
    pub fn from_masks(masks: &[PartMask]) -> Result<Self> {
        let first = masks.first().ok_or_else(|| Error::Format("no masks to write".into()))?;
        let d = first.dims();
        let n = masks.len();
        let mut data = vec![0.0f32; d.voxel_count() * n];
        for (i, m) in masks.iter().enumerate() {
            if m.dims() != d {
                return Err(Error::Format("masks have different grids".into()));
            }
            for (cell, &v) in m.data().iter().enumerate() {
                data[cell * n + i] = v;
            }
        }
        Self::new(vec![d.height, d.width, d.depth, n], Kind::Mask, data)
    }

    pub fn into_volume(self) -> Result<Volume> {
        match self.shape[..] {
            [h, w, d, c] => Ok(Volume::from_data(Dims3::new(h, w, d)?, c, self.data)?),
            _ => Err(Error::Volt(format!("expected a rank-4 volume, got shape {:?}", self.shape))),
        }
    }

    pub fn into_image(self) -> Result<Image> {
        match self.shape[..] {
            [h, w, c] => Ok(Image::from_data(h, w, c, self.data)?),
            _ => Err(Error::Volt(format!("expected a rank-3 image, got shape {:?}", self.shape))),
        }
    }

    /// Splits an `H x W x D x N` mask tensor into `N` masks named by `names`.
    pub fn into_masks(self, names: &[String]) -> Result<Vec<PartMask>> {
        let [h, w, d, n] = self.shape[..] else {
            return Err(Error::Volt(format!("expected rank-4 masks, got shape {:?}", self.shape)));
        };
        if n != names.len() {
            return Err(Error::Format(format!("{n} masks in file, {} part names", names.len())));
        }
        let dims = Dims3::new(h, w, d)?;
        names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let data = self.data.iter().skip(i).step_by(n).copied().collect();
                Ok(PartMask::from_data(name.as_str(), dims, data)?)
            })
            .collect()
    }
}
