//! Reference implementations used only by tests.
//!
//! Every oracle here works on plain arrays with straightforward loops and
//! shares no code with the kernels in `volwarp-core`; the generators build
//! random core values from a seeded ChaCha stream.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use volwarp_core::nalgebra::{Matrix2, Matrix3, Vector2};
use volwarp_core::{Dims3, Helmert3, Affine2, Image, PartMask, Vec3, Volume};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Forward similarity `p -> scale * rot * p + trans` as plain arrays.
#[derive(Debug, Clone, Copy)]
pub struct Similarity {
    pub scale: f64,
    pub rot: [[f64; 3]; 3],
    pub trans: [f64; 3],
}

impl Similarity {
    pub fn of(t: &Helmert3) -> Self {
        let r = t.rotation();
        let mut rot = [[0.0; 3]; 3];
        for (i, row) in rot.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = r[(i, j)];
            }
        }
        let tr = t.translation();
        Self {
            scale: t.scale(),
            rot,
            trans: [tr.x, tr.y, tr.z],
        }
    }

    /// Source point for output point `p`: `rot^T (p - trans) / scale`.
    pub fn pull_back(&self, p: [f64; 3]) -> [f64; 3] {
        let d = [p[0] - self.trans[0], p[1] - self.trans[1], p[2] - self.trans[2]];
        let mut q = [0.0; 3];
        for (i, qi) in q.iter_mut().enumerate() {
            for (j, dj) in d.iter().enumerate() {
                *qi += self.rot[j][i] * dj;
            }
            *qi /= self.scale;
        }
        q
    }

    pub fn push(&self, p: [f64; 3]) -> [f64; 3] {
        let mut q = self.trans;
        for (i, qi) in q.iter_mut().enumerate() {
            for (j, pj) in p.iter().enumerate() {
                *qi += self.scale * self.rot[i][j] * pj;
            }
        }
        q
    }
}

/// Tent weight of lattice index `i` for continuous coordinate `q`.
fn tent(q: f64, i: isize) -> f64 {
    (1.0 - (q - i as f64).abs()).max(0.0)
}

/// Per output voxel, per part: pull the voxel centre back through the part's
/// transform, interpolate `mask * volume` from the surrounding lattice points
/// with tent weights (zero outside the grid), and keep the maximum.
pub fn warp_3d(volume: &[f32], shape: [usize; 4], masks: &[Vec<f32>], parts: &[Similarity]) -> Vec<f32> {
    let [h, w, d, c] = shape;
    let mut out = vec![0.0f32; h * w * d * c];
    for y in 0..h {
        for x in 0..w {
            for z in 0..d {
                let mut best = vec![f64::NEG_INFINITY; c];
                for (mask, part) in masks.iter().zip(parts) {
                    let q = part.pull_back([y as f64, x as f64, z as f64]);
                    let mut val = vec![0.0f64; c];
                    let base = [q[0].floor() as isize, q[1].floor() as isize, q[2].floor() as isize];
                    for cy in base[0]..=base[0] + 1 {
                        for cx in base[1]..=base[1] + 1 {
                            for cz in base[2]..=base[2] + 1 {
                                if cy < 0 || cx < 0 || cz < 0 || cy >= h as isize || cx >= w as isize || cz >= d as isize {
                                    continue;
                                }
                                let wgt = tent(q[0], cy) * tent(q[1], cx) * tent(q[2], cz);
                                let cell = (cy as usize * w + cx as usize) * d + cz as usize;
                                for ch in 0..c {
                                    val[ch] += wgt * (mask[cell] * volume[cell * c + ch]) as f64;
                                }
                            }
                        }
                    }
                    for ch in 0..c {
                        best[ch] = best[ch].max(val[ch]);
                    }
                }
                let cell = (y * w + x) * d + z;
                for ch in 0..c {
                    out[cell * c + ch] = best[ch] as f32;
                }
            }
        }
    }
    out
}

/// 2D affine `p -> m p + t` as plain arrays.
#[derive(Debug, Clone, Copy)]
pub struct PlaneAffine {
    pub m: [[f64; 2]; 2],
    pub t: [f64; 2],
}

impl PlaneAffine {
    pub fn of(a: &Affine2) -> Self {
        let l = a.linear();
        let t = a.translation();
        Self {
            m: [[l[(0, 0)], l[(0, 1)]], [l[(1, 0)], l[(1, 1)]]],
            t: [t.x, t.y],
        }
    }

    pub fn pull_back(&self, p: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.m;
        let det = a * d - b * c;
        let (u, v) = (p[0] - self.t[0], p[1] - self.t[1]);
        [(d * u - b * v) / det, (-c * u + a * v) / det]
    }
}

/// Per-slice bilinear oracle for the depth-free warp: masks are collapsed
/// over depth and reused on every layer; no sample mixes two layers.
pub fn warp_2d(volume: &[f32], shape: [usize; 4], masks: &[Vec<f32>], parts: &[PlaneAffine]) -> Vec<f32> {
    let [h, w, d, c] = shape;
    let flat: Vec<Vec<f32>> = masks
        .iter()
        .map(|m| {
            let mut f = vec![0.0f32; h * w];
            for y in 0..h {
                for x in 0..w {
                    for z in 0..d {
                        if m[(y * w + x) * d + z] > 0.0 {
                            f[y * w + x] = 1.0;
                        }
                    }
                }
            }
            f
        })
        .collect();
    let mut out = vec![0.0f32; h * w * d * c];
    for y in 0..h {
        for x in 0..w {
            for z in 0..d {
                let mut best = vec![f64::NEG_INFINITY; c];
                for (mask, part) in flat.iter().zip(parts) {
                    let q = part.pull_back([y as f64, x as f64]);
                    let mut val = vec![0.0f64; c];
                    let base = [q[0].floor() as isize, q[1].floor() as isize];
                    for cy in base[0]..=base[0] + 1 {
                        for cx in base[1]..=base[1] + 1 {
                            if cy < 0 || cx < 0 || cy >= h as isize || cx >= w as isize {
                                continue;
                            }
                            let wgt = tent(q[0], cy) * tent(q[1], cx);
                            let pix = cy as usize * w + cx as usize;
                            let cell = pix * d + z;
                            for ch in 0..c {
                                val[ch] += wgt * (mask[pix] * volume[cell * c + ch]) as f64;
                            }
                        }
                    }
                    for ch in 0..c {
                        best[ch] = best[ch].max(val[ch]);
                    }
                }
                let cell = (y * w + x) * d + z;
                for ch in 0..c {
                    out[cell * c + ch] = best[ch] as f32;
                }
            }
        }
    }
    out
}

/// Voxel set within `radius` of the segment, using the cross-product distance
/// to the line when the projection falls inside the segment and endpoint
/// distances otherwise.
pub fn capsule(shape: [usize; 3], p0: [f64; 3], p1: [f64; 3], radius: f64) -> Vec<bool> {
    let [h, w, d] = shape;
    let seg = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
    let seg_len_sq = seg.iter().map(|v| v * v).sum::<f64>();
    let dist_sq = |p: [f64; 3], q: [f64; 3]| (0..3).map(|i| (p[i] - q[i]).powi(2)).sum::<f64>();
    let mut out = vec![false; h * w * d];
    for y in 0..h {
        for x in 0..w {
            for z in 0..d {
                let p = [y as f64, x as f64, z as f64];
                let v = [p[0] - p0[0], p[1] - p0[1], p[2] - p0[2]];
                let along = v[0] * seg[0] + v[1] * seg[1] + v[2] * seg[2];
                let dsq = if seg_len_sq == 0.0 || along <= 0.0 {
                    dist_sq(p, p0)
                } else if along >= seg_len_sq {
                    dist_sq(p, p1)
                } else {
                    let cross = [
                        v[1] * seg[2] - v[2] * seg[1],
                        v[2] * seg[0] - v[0] * seg[2],
                        v[0] * seg[1] - v[1] * seg[0],
                    ];
                    cross.iter().map(|v| v * v).sum::<f64>() / seg_len_sq
                };
                out[(y * w + x) * d + z] = dsq <= radius * radius;
            }
        }
    }
    out
}

/// Reference SSIM map for one channel: explicit 2D window around each pixel,
/// mirrored borders (edge sample repeated), two-pass variances.
pub fn ssim_map(a: &[f64], b: &[f64], h: usize, w: usize) -> Vec<f64> {
    let radius = 5isize;
    let sigma = 1.5f64;
    let (c1, c2) = ((0.01f64 * 1.0).powi(2), (0.03f64 * 1.0).powi(2));
    let mirror = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let mut i = i;
        loop {
            if i < 0 {
                i = -i - 1;
            } else if i >= n {
                i = 2 * n - i - 1;
            } else {
                return i as usize;
            }
        }
    };
    let mut weights = Vec::new();
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            weights.push(((-(dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|v| *v /= total);
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut idx = Vec::with_capacity(weights.len());
            for dy in -radius..=radius {
                for dx in -radius..=radius {
                    idx.push(mirror(y as isize + dy, h) * w + mirror(x as isize + dx, w));
                }
            }
            let mu_a: f64 = idx.iter().zip(&weights).map(|(&i, wt)| wt * a[i]).sum();
            let mu_b: f64 = idx.iter().zip(&weights).map(|(&i, wt)| wt * b[i]).sum();
            let var_a: f64 = idx.iter().zip(&weights).map(|(&i, wt)| wt * (a[i] - mu_a).powi(2)).sum();
            let var_b: f64 = idx.iter().zip(&weights).map(|(&i, wt)| wt * (b[i] - mu_b).powi(2)).sum();
            let cov: f64 = idx
                .iter()
                .zip(&weights)
                .map(|(&i, wt)| wt * (a[i] - mu_a) * (b[i] - mu_b))
                .sum();
            out[y * w + x] = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        }
    }
    out
}

/// Reference SSIM of two images: per-channel map means, averaged; an optional
/// binary mask restricts the mean.
pub fn ssim(a: &Image, b: &Image, mask: Option<&[f32]>) -> f64 {
    let (h, w, c) = (a.height(), a.width(), a.channels());
    let mut total = 0.0;
    for ch in 0..c {
        let pa: Vec<f64> = (0..h * w).map(|i| a.data()[i * c + ch] as f64).collect();
        let pb: Vec<f64> = (0..h * w).map(|i| b.data()[i * c + ch] as f64).collect();
        let map = ssim_map(&pa, &pb, h, w);
        let (mut s, mut n) = (0.0, 0usize);
        for (i, v) in map.iter().enumerate() {
            if mask.is_none_or(|m| m[i] == 1.0) {
                s += v;
                n += 1;
            }
        }
        total += s / n as f64;
    }
    total / c as f64
}

/// Peak-normalised Gaussian heatmap of one joint by direct evaluation.
pub fn heatmap(shape: [usize; 3], joint: [f64; 3], sigma: f64, truncation: f64) -> Vec<f64> {
    let [h, w, d] = shape;
    let mut out = vec![0.0; h * w * d];
    for y in 0..h {
        for x in 0..w {
            for z in 0..d {
                let r = ((y as f64 - joint[0]).powi(2) + (x as f64 - joint[1]).powi(2) + (z as f64 - joint[2]).powi(2)).sqrt();
                if r <= truncation * sigma {
                    out[(y * w + x) * d + z] = (-r * r / (2.0 * sigma * sigma)).exp();
                }
            }
        }
    }
    out
}

// ---- generators ----

pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    loop {
        let q: [f64; 4] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(0.1..=1.0).contains(&n) {
            continue;
        }
        let [w, x, y, z] = q.map(|v| v / n);
        return Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
    }
}

pub fn random_helmert(rng: &mut impl Rng, scale: (f64, f64), trans: f64) -> Helmert3 {
    let s = rng.gen_range(scale.0..=scale.1);
    let t = Vec3::new(rng.gen_range(-trans..=trans), rng.gen_range(-trans..=trans), rng.gen_range(-trans..=trans));
    Helmert3::new(s, random_rotation(rng), t).expect("random rotation is proper")
}

/// Points whose spread is clearly three-dimensional or at least planar:
/// each new point keeps a minimum distance from the line of the first two.
pub fn random_points(rng: &mut impl Rng, n: usize, extent: f64) -> Vec<Vec3> {
    loop {
        let pts: Vec<Vec3> = (0..n)
            .map(|_| Vec3::new(rng.gen_range(-extent..extent), rng.gen_range(-extent..extent), rng.gen_range(-extent..extent)))
            .collect();
        let axis = pts[1] - pts[0];
        if axis.norm() < 0.2 * extent {
            continue;
        }
        let dir = axis.normalize();
        let max_perp = pts
            .iter()
            .map(|p| {
                let r = p - pts[0];
                (r - dir * r.dot(&dir)).norm()
            })
            .fold(0.0, f64::max);
        if max_perp > 0.2 * extent {
            return pts;
        }
    }
}

pub fn random_volume(rng: &mut impl Rng, dims: Dims3, channels: usize, lo: f32, hi: f32) -> Volume {
    let n = dims.voxel_count() * channels;
    Volume::from_data(dims, channels, (0..n).map(|_| rng.gen_range(lo..=hi)).collect()).unwrap()
}

pub fn random_capsule_mask(rng: &mut impl Rng, dims: Dims3) -> PartMask {
    let point = |rng: &mut dyn rand::RngCore| {
        Vec3::new(
            rng.gen_range(-1.0..dims.height as f64),
            rng.gen_range(-1.0..dims.width as f64),
            rng.gen_range(-1.0..dims.depth as f64),
        )
    };
    let a = point(rng);
    let b = point(rng);
    let r = rng.gen_range(0.8..2.5);
    volwarp_core::voxelize::capsule_mask(dims, &a, &b, r).unwrap()
}

pub fn random_affine(rng: &mut impl Rng) -> Affine2 {
    loop {
        let m: Matrix2<f64> = Matrix2::new(
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
        );
        if m.determinant().abs() > 0.3 {
            let t = Vector2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            return Affine2::new(m, t).unwrap();
        }
    }
}

pub fn random_image(rng: &mut impl Rng, h: usize, w: usize, c: usize) -> Image {
    Image::from_data(h, w, c, (0..h * w * c).map(|_| rng.gen_range(0.0..=1.0)).collect()).unwrap()
}

pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).abs()).fold(0.0, f64::max)
}

/// Angle of `a * b^T`, from `||a - b||_F = 2 sqrt(2) sin(theta / 2)`.
pub fn rotation_distance(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    2.0 * ((a - b).norm() / (2.0 * 2f64.sqrt())).min(1.0).asin()
}
