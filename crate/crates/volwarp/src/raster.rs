//! 8-bit PNG import/export and extension-based image loading.
//!
//! PNG pixels map to `[0, 1]` by `/ 255`; export clamps and rounds. Any path
//! not ending in `.png` is a VOLT tensor.

use std::path::Path;

use image::{GrayImage, RgbImage};
use volwarp_core::Image;

use crate::error::{Error, Result};
use crate::volt::{Kind, Tensor};

pub fn is_png(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Reads any PNG as 3-channel RGB.
pub fn read_png(path: &Path) -> Result<Image> {
    let rgb = image::open(path)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.into_raw().into_iter().map(|b| b as f32 / 255.0).collect();
    Ok(Image::from_data(h as usize, w as usize, 3, data)?)
}

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a 1-channel image as grayscale, a 3-channel image as RGB.
pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let (h, w) = (img.height() as u32, img.width() as u32);
    let bytes: Vec<u8> = img.data().iter().map(|&v| to_byte(v)).collect();
    match img.channels() {
        1 => GrayImage::from_raw(w, h, bytes).expect("buffer matches").save(path)?,
        3 => RgbImage::from_raw(w, h, bytes).expect("buffer matches").save(path)?,
        c => return Err(Error::Format(format!("PNG export needs 1 or 3 channels, got {c}"))),
    }
    Ok(())
}

pub fn read_image(path: &Path) -> Result<Image> {
    if is_png(path) {
        read_png(path)
    } else {
        Tensor::read(path)?.into_image()
    }
}

pub fn write_image(path: &Path, img: &Image, kind: Kind) -> Result<()> {
    if is_png(path) {
        write_png(path, img)
    } else {
        Tensor::from_image(img, kind).write(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_on_byte_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let data: Vec<f32> = (0..4 * 5 * 3).map(|i| ((i * 37) % 256) as f32 / 255.0).collect();
        let img = Image::from_data(4, 5, 3, data).unwrap();
        write_png(&path, &img).unwrap();
        assert_eq!(read_png(&path).unwrap(), img);
    }
}
