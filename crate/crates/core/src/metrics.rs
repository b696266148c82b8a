//! Image and pose quality metrics: SSIM, foreground SSIM and PCK / AUC.
//!
//! SSIM uses the classic Gaussian window (11x11, sigma 1.5, K1 = 0.01,
//! K2 = 0.03) with half-sample symmetric ("reflect") border padding,
//! evaluated per channel in double precision and averaged over channels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::skeleton::{CoordinateSpace, Pose};
use crate::tensor::Image;

/// Slack on the `[0, 1]` input range.
const RANGE_SLACK: f32 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            window_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        let v = self.k1 * self.dynamic_range;
        v * v
    }

    pub fn c2(&self) -> f64 {
        let v = self.k2 * self.dynamic_range;
        v * v
    }

    /// Normalised 1D Gaussian taps; the 2D window is their outer product.
    pub fn taps(&self) -> Vec<f64> {
        let half = (self.window / 2) as f64;
        let mut taps: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - half;
                libm::exp(-d * d / (2.0 * self.window_sigma * self.window_sigma))
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        taps
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::Parameter(format!("SSIM window must be odd, got {}", self.window)));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.window_sigma) && positive(self.k1) && positive(self.k2) && positive(self.dynamic_range)) {
            return Err(Error::Parameter("SSIM constants must be positive".into()));
        }
        Ok(())
    }
}

/// Half-sample symmetric index: `... b a | a b c ... | c b ...`.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Separable Gaussian filter of one `h x w` plane.
fn filter(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (k, t) in taps.iter().enumerate() {
                s += t * plane[y * w + reflect(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = s;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (k, t) in taps.iter().enumerate() {
                s += t * tmp[reflect(y as isize + k as isize - r, h) * w + x];
            }
            out[y * w + x] = s;
        }
    }
    out
}

fn check_unit_range(img: &Image, what: &'static str) -> Result<()> {
    if let Some(v) = img
        .data()
        .iter()
        .find(|&&v| !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v))
    {
        return Err(Error::Range(format!("{what} value {v} outside [0, 1]")));
    }
    Ok(())
}

/// Per-channel SSIM maps, each `H x W`, row-major.
pub fn ssim_maps(a: &Image, b: &Image, p: &SsimParams) -> Result<Vec<Vec<f64>>> {
    p.validate()?;
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("images differ: {:?} vs {:?}", a.shape(), b.shape())));
    }
    check_unit_range(a, "first image")?;
    check_unit_range(b, "second image")?;
    let (h, w, c) = (a.height(), a.width(), a.channels());
    let taps = p.taps();
    let (c1, c2) = (p.c1(), p.c2());
    let mut maps = Vec::with_capacity(c);
    for ch in 0..c {
        let pa: Vec<f64> = a.data().iter().skip(ch).step_by(c).map(|&v| v as f64).collect();
        let pb: Vec<f64> = b.data().iter().skip(ch).step_by(c).map(|&v| v as f64).collect();
        let aa: Vec<f64> = pa.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = pb.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
        let mu_a = filter(&pa, h, w, &taps);
        let mu_b = filter(&pb, h, w, &taps);
        let e_aa = filter(&aa, h, w, &taps);
        let e_bb = filter(&bb, h, w, &taps);
        let e_ab = filter(&ab, h, w, &taps);
        let map = (0..h * w)
            .map(|i| {
                let (ma, mb) = (mu_a[i], mu_b[i]);
                let var_a = e_aa[i] - ma * ma;
                let var_b = e_bb[i] - mb * mb;
                let cov = e_ab[i] - ma * mb;
                ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2))
            })
            .collect();
        maps.push(map);
    }
    Ok(maps)
}

fn masked_mean(maps: &[Vec<f64>], mask: Option<&[f32]>) -> Result<f64> {
    let mut total = 0.0;
    for map in maps {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (i, v) in map.iter().enumerate() {
            if mask.is_none_or(|m| m[i] != 0.0) {
                sum += v;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Empty("foreground mask selects no pixels"));
        }
        total += sum / count as f64;
    }
    Ok(total / maps.len() as f64)
}

/// Mean SSIM over all pixels and channels.
pub fn ssim(a: &Image, b: &Image, p: &SsimParams) -> Result<f64> {
    masked_mean(&ssim_maps(a, b, p)?, None)
}

/// SSIM averaged only over pixels whose binary mask value is 1.
pub fn ssim_fg(a: &Image, b: &Image, fg_mask: &Image, p: &SsimParams) -> Result<f64> {
    if fg_mask.shape() != [a.height(), a.width(), 1] {
        return Err(Error::Shape(format!(
            "mask shape {:?} does not match image {}x{}x1",
            fg_mask.shape(),
            a.height(),
            a.width()
        )));
    }
    if fg_mask.data().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Range("foreground mask must be binary".into()));
    }
    masked_mean(&ssim_maps(a, b, p)?, Some(fg_mask.data()))
}

pub const PCK_MAX_MM: usize = 150;

/// Fraction of joints within each integer threshold `0..=150` mm.
#[derive(Debug, Clone, PartialEq)]
pub struct PckCurve {
    pub thresholds: Vec<f64>,
    pub pck: Vec<f64>,
}

/// PCK curve and its area (the mean of the 151 curve values).
pub fn pck_auc(predicted: &Pose, reference: &Pose) -> Result<(PckCurve, f64)> {
    if predicted.space() != CoordinateSpace::Millimeter || reference.space() != CoordinateSpace::Millimeter {
        return Err(Error::Space("millimeter"));
    }
    if predicted.len() != reference.len() {
        return Err(Error::Shape(format!(
            "{} predicted joints vs {} reference joints",
            predicted.len(),
            reference.len()
        )));
    }
    let errors: Vec<f64> = reference
        .joints()
        .iter()
        .map(|(name, r)| Ok((predicted.joint(name)? - r).norm()))
        .collect::<Result<_>>()?;
    let n = errors.len() as f64;
    let thresholds: Vec<f64> = (0..=PCK_MAX_MM).map(|t| t as f64).collect();
    let pck: Vec<f64> = thresholds
        .iter()
        .map(|&t| errors.iter().filter(|&&e| e <= t).count() as f64 / n)
        .collect();
    let auc = pck.iter().sum::<f64>() / pck.len() as f64;
    Ok((PckCurve { thresholds, pck }, auc))
}
