//! Similarity (Helmert) and 2D affine transforms, with least-squares fitting.

use alloc::format;

use nalgebra::{Matrix2, Matrix3, Vector2};

use crate::error::{Error, Result};
use crate::Vec3;

/// Source variance below this means all points coincide.
const MIN_SPREAD: f64 = 1e-12;
/// Relative perpendicular extent below which a point set counts as collinear.
const COLLINEAR_TOL: f64 = 1e-9;
/// Tikhonov damping on the linear part of the affine normal equations.
pub const AFFINE_DAMPING: f64 = 1e-9;

/// Seven-parameter similarity transform `p -> s * R * p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Helmert3 {
    scale: f64,
    rotation: Matrix3<f64>,
    translation: Vec3,
    degenerate: bool,
}

impl Helmert3 {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
            degenerate: false,
        }
    }

    /// Checks `scale > 0` and that `rotation` is a proper rotation to 1e-6.
    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Parameter(format!("scale must be positive, got {scale}")));
        }
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("transform"));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if ortho > 1e-6 || libm::fabs(det - 1.0) > 1e-6 {
            return Err(Error::Parameter(format!(
                "rotation is not orthonormal with det +1 (|RtR-I|={ortho:e}, det={det})"
            )));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
            degenerate: false,
        })
    }

    pub fn translation_only(t: Vec3) -> Self {
        Self {
            translation: t,
            ..Self::identity()
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// True when the fit fell back to the collinear-source solution.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn with_degenerate(mut self, flag: bool) -> Self {
        self.degenerate = flag;
        self
    }

    #[inline]
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p * self.scale + self.translation
    }

    pub fn invert(&self) -> Self {
        let rt = self.rotation.transpose();
        let inv_scale = 1.0 / self.scale;
        Self {
            scale: inv_scale,
            rotation: rt,
            translation: -(rt * self.translation) * inv_scale,
            degenerate: self.degenerate,
        }
    }

    /// `self` after `first`: `p -> self(first(p))`.
    pub fn compose(&self, first: &Helmert3) -> Self {
        Self {
            scale: self.scale * first.scale,
            rotation: self.rotation * first.rotation,
            translation: self.apply(&first.translation),
            degenerate: self.degenerate || first.degenerate,
        }
    }
}

fn centroid3(points: &[Vec3]) -> Vec3 {
    points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / points.len() as f64
}

/// Least-squares similarity transform mapping `src` onto `dst`.
///
/// Closed form: centre both sets, take the SVD of the cross-covariance, flip
/// the weakest singular direction when the raw solution would be a
/// reflection, and recover scale and translation from the corrected singular
/// values and the centroids. Collinear sources have no unique rotation about
/// their line; they get the minimal rotation aligning the two segment
/// directions and are flagged degenerate.
pub fn fit_helmert(src: &[Vec3], dst: &[Vec3]) -> Result<Helmert3> {
    if src.len() != dst.len() {
        return Err(Error::CountMismatch {
            src: src.len(),
            dst: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(Error::TooFewPoints {
            need: 3,
            got: src.len(),
        });
    }
    if src.iter().chain(dst).any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite("correspondence"));
    }
    let n = src.len() as f64;
    let mu_s = centroid3(src);
    let mu_d = centroid3(dst);
    let var_s = src.iter().map(|p| (p - mu_s).norm_squared()).sum::<f64>() / n;
    if var_s < MIN_SPREAD {
        return Err(Error::Degenerate("source points coincide"));
    }

    if let Some((a, b)) = collinear_extremes(src, &mu_s) {
        return fit_collinear(src, dst, &mu_s, &mu_d, a, b);
    }

    let mut cov = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        cov += (d - mu_d) * (s - mu_s).transpose();
    }
    cov /= n;

    let svd = cov.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Degenerate("singular value decomposition failed")),
    };
    // nalgebra does not order singular values; the correction must hit the smallest.
    let sv = svd.singular_values;
    let weakest = (0..3)
        .min_by(|&i, &j| sv[i].partial_cmp(&sv[j]).unwrap_or(core::cmp::Ordering::Equal))
        .unwrap_or(2);
    let mut signs = Vec3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        signs[weakest] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&signs) * v_t;
    let scale = sv.component_mul(&signs).sum() / var_s;
    if scale.is_nan() || scale <= MIN_SPREAD {
        return Err(Error::Degenerate("target points coincide"));
    }
    let translation = mu_d - rotation * mu_s * scale;
    Ok(Helmert3 {
        scale,
        rotation,
        translation,
        degenerate: false,
    })
}

/// Returns the farthest-apart pair `(a, b)` if every point lies on the line
/// through them (relative to the segment length).
fn collinear_extremes(points: &[Vec3], centroid: &Vec3) -> Option<(usize, usize)> {
    let far_from = |origin: &Vec3| {
        let mut best = (0, -1.0);
        for (i, p) in points.iter().enumerate() {
            let d = (p - origin).norm_squared();
            if d > best.1 {
                best = (i, d);
            }
        }
        best.0
    };
    let a = far_from(centroid);
    let b = far_from(&points[a]);
    let axis = points[b] - points[a];
    let len = axis.norm();
    let dir = axis / len;
    let max_perp = points
        .iter()
        .map(|p| {
            let r = p - points[a];
            (r - dir * r.dot(&dir)).norm()
        })
        .fold(0.0, f64::max);
    (max_perp <= COLLINEAR_TOL * len).then_some((a, b))
}

fn fit_collinear(src: &[Vec3], dst: &[Vec3], mu_s: &Vec3, mu_d: &Vec3, a: usize, b: usize) -> Result<Helmert3> {
    let ds = src[b] - src[a];
    let dd = dst[b] - dst[a];
    let (ls, ld) = (ds.norm(), dd.norm());
    if ld < libm::sqrt(MIN_SPREAD) {
        return Err(Error::Degenerate("target points coincide"));
    }
    let rotation = align_directions(&(ds / ls), &(dd / ld));
    let scale = ld / ls;
    let translation = mu_d - rotation * mu_s * scale;
    Ok(Helmert3 {
        scale,
        rotation,
        translation,
        degenerate: true,
    })
}

/// Smallest rotation taking unit vector `from` onto unit vector `to`.
fn align_directions(from: &Vec3, to: &Vec3) -> Matrix3<f64> {
    let c = from.dot(to);
    let axis = from.cross(to);
    let s = axis.norm();
    if s < 1e-12 {
        if c > 0.0 {
            return Matrix3::identity();
        }
        // Antiparallel: half turn about any axis perpendicular to `from`.
        let helper = if libm::fabs(from.x) < 0.9 { Vec3::x() } else { Vec3::y() };
        let k = from.cross(&helper).normalize();
        return k * k.transpose() * 2.0 - Matrix3::identity();
    }
    let k = axis / s;
    let kx = k.cross_matrix();
    Matrix3::identity() + kx * s + kx * kx * (1.0 - c)
}

/// 2D affine map `p -> A * p + t`, applied in the `(row, column)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2 {
    linear: Matrix2<f64>,
    translation: Vector2<f64>,
    degenerate: bool,
}

impl Affine2 {
    pub fn identity() -> Self {
        Self {
            linear: Matrix2::identity(),
            translation: Vector2::zeros(),
            degenerate: false,
        }
    }

    pub fn new(linear: Matrix2<f64>, translation: Vector2<f64>) -> Result<Self> {
        if linear.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("affine"));
        }
        Ok(Self {
            linear,
            translation,
            degenerate: false,
        })
    }

    pub fn linear(&self) -> &Matrix2<f64> {
        &self.linear
    }

    pub fn translation(&self) -> &Vector2<f64> {
        &self.translation
    }

    /// True when the fit fell back to a similarity because the source was collinear.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn with_degenerate(mut self, flag: bool) -> Self {
        self.degenerate = flag;
        self
    }

    #[inline]
    pub fn apply(&self, p: &Vector2<f64>) -> Vector2<f64> {
        self.linear * p + self.translation
    }

    pub fn invert(&self) -> Result<Self> {
        let inv = self
            .linear
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or(Error::Degenerate("affine map is singular"))?;
        Ok(Self {
            linear: inv,
            translation: -(inv * self.translation),
            degenerate: self.degenerate,
        })
    }
}

/// Least-squares affine fit via damped normal equations on centred points.
///
/// Three non-collinear points are interpolated (up to the damping). A
/// collinear source falls back to the best 2D similarity and is flagged.
pub fn fit_affine2(src: &[Vector2<f64>], dst: &[Vector2<f64>]) -> Result<Affine2> {
    if src.len() != dst.len() {
        return Err(Error::CountMismatch {
            src: src.len(),
            dst: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(Error::TooFewPoints {
            need: 3,
            got: src.len(),
        });
    }
    if src.iter().chain(dst).any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite("correspondence"));
    }
    let n = src.len() as f64;
    let mu_s = src.iter().fold(Vector2::zeros(), |a, p| a + p) / n;
    let mu_d = dst.iter().fold(Vector2::zeros(), |a, p| a + p) / n;
    let mut sxx = Matrix2::zeros();
    let mut sdx = Matrix2::zeros();
    for (s, d) in src.iter().zip(dst) {
        let (cs, cd) = (s - mu_s, d - mu_d);
        sxx += cs * cs.transpose();
        sdx += cd * cs.transpose();
    }
    let spread = sxx.trace();
    if spread / n < MIN_SPREAD {
        return Err(Error::Degenerate("source points coincide"));
    }
    // Collinear when the scatter's determinant vanishes relative to its trace.
    if sxx.determinant() <= COLLINEAR_TOL * spread * spread {
        return fit_similarity2(src, dst, &mu_s, &mu_d);
    }
    let damped = sxx + Matrix2::identity() * AFFINE_DAMPING;
    let inv = damped
        .try_inverse()
        .ok_or(Error::Degenerate("affine normal equations are singular"))?;
    // The damping only guards invertibility; refinement against the undamped
    // system removes its bias (error shrinks by damping / scatter per step).
    let mut linear = sdx * inv;
    for _ in 0..2 {
        linear += (sdx - linear * sxx) * inv;
    }
    Ok(Affine2 {
        linear,
        translation: mu_d - linear * mu_s,
        degenerate: false,
    })
}

/// Rotation + isotropic scale + translation, solved as `w = a z + b` over
/// complex numbers (no reflections).
fn fit_similarity2(
    src: &[Vector2<f64>],
    dst: &[Vector2<f64>],
    mu_s: &Vector2<f64>,
    mu_d: &Vector2<f64>,
) -> Result<Affine2> {
    let (mut re, mut im, mut norm) = (0.0, 0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let (z, w) = (s - mu_s, d - mu_d);
        // conj(z) * w
        re += z.x * w.x + z.y * w.y;
        im += z.x * w.y - z.y * w.x;
        norm += z.norm_squared();
    }
    let (a, b) = (re / norm, im / norm);
    if a * a + b * b < MIN_SPREAD {
        return Err(Error::Degenerate("target points coincide"));
    }
    let linear = Matrix2::new(a, -b, b, a);
    Ok(Affine2 {
        linear,
        translation: mu_d - linear * mu_s,
        degenerate: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Unit};

    fn rot_about(axis: Vec3, angle: f64) -> Matrix3<f64> {
        *Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).matrix()
    }

    fn generic_points() -> [Vec3; 5] {
        [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(3.0, 1.0, -2.0),
            Vec3::new(-1.0, 4.0, 0.5),
            Vec3::new(2.0, -3.0, 5.0),
            Vec3::new(6.0, 2.0, 1.0),
        ]
    }

    fn rotation_angle_between(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
        // ||A - B||_F = 2 sqrt(2) sin(theta / 2)
        2.0 * ((a - b).norm() / (2.0 * 2f64.sqrt())).min(1.0).asin()
    }

    #[test]
    fn identity_fit() {
        let p = &generic_points()[..3];
        let t = fit_helmert(p, p).unwrap();
        assert!((t.scale() - 1.0).abs() < 1e-9);
        assert!((t.rotation() - Matrix3::identity()).amax() < 1e-9);
        assert!(t.translation().amax() < 1e-9);
        assert!(!t.is_degenerate());
    }

    #[test]
    fn pure_translation_fit() {
        let p = generic_points();
        let shift = Vec3::new(1.0, 2.0, 3.0);
        let q: alloc::vec::Vec<_> = p.iter().map(|v| v + shift).collect();
        let t = fit_helmert(&p, &q).unwrap();
        assert!((t.scale() - 1.0).abs() < 1e-9);
        assert!((t.rotation() - Matrix3::identity()).amax() < 1e-9);
        assert!((t.translation() - shift).amax() < 1e-9);
    }

    #[test]
    fn recovers_constructed_similarity() {
        let truth = Helmert3::new(
            1.3,
            rot_about(Vec3::new(1.0, 1.0, 0.0), 40f64.to_radians()),
            Vec3::new(5.0, -2.0, 7.0),
        )
        .unwrap();
        let p = generic_points();
        let q: alloc::vec::Vec<_> = p.iter().map(|v| truth.apply(v)).collect();
        let t = fit_helmert(&p, &q).unwrap();
        assert!((t.scale() / 1.3 - 1.0).abs() < 1e-6);
        assert!(rotation_angle_between(t.rotation(), truth.rotation()) < 1e-6);
        assert!((t.translation() - truth.translation()).amax() < 1e-5);
    }

    #[test]
    fn three_points_never_reflect() {
        // A mirrored target: the unconstrained optimum is a reflection.
        let p = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let q = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let t = fit_helmert(&p, &q).unwrap();
        assert!((t.rotation().determinant() - 1.0).abs() < 1e-9);
        let p4 = [p[0], p[1], p[2], Vec3::new(0.0, 0.0, 1.0)];
        let q4 = [q[0], q[1], q[2], Vec3::new(0.0, 0.0, 1.0)];
        let t = fit_helmert(&p4, &q4).unwrap();
        assert!((t.rotation().determinant() - 1.0).abs() < 1e-9);
        assert!(t.scale() > 0.0);
    }

    #[test]
    fn collinear_source_falls_back() {
        let p = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0)];
        let q = [Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0, 3.0, 1.0), Vec3::new(1.0, 7.0, 1.0)];
        let t = fit_helmert(&p, &q).unwrap();
        assert!(t.is_degenerate());
        assert!((t.scale() - 2.0).abs() < 1e-12);
        for (a, b) in p.iter().zip(&q) {
            assert!((t.apply(a) - b).norm() < 1e-9);
        }
        // antiparallel segment
        let r = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0), Vec3::new(-3.0, 0.0, 0.0)];
        let t = fit_helmert(&p, &r).unwrap();
        assert!((t.rotation().determinant() - 1.0).abs() < 1e-9);
        for (a, b) in p.iter().zip(&r) {
            assert!((t.apply(a) - b).norm() < 1e-9);
        }
    }

    #[test]
    fn fit_errors() {
        let p = generic_points();
        assert!(matches!(fit_helmert(&p[..2], &p[..2]), Err(Error::TooFewPoints { .. })));
        assert!(matches!(fit_helmert(&p[..3], &p[..4]), Err(Error::CountMismatch { .. })));
        let same = [Vec3::new(1.0, 1.0, 1.0); 3];
        assert_eq!(fit_helmert(&same, &p[..3]), Err(Error::Degenerate("source points coincide")));
        assert_eq!(fit_helmert(&p[..3], &same), Err(Error::Degenerate("target points coincide")));
        let mut bad = p;
        bad[1].x = f64::NAN;
        assert!(fit_helmert(&bad, &p).is_err());
    }

    #[test]
    fn apply_and_invert() {
        let t = Helmert3::new(2.0, Matrix3::identity(), Vec3::zeros()).unwrap();
        assert_eq!(t.apply(&Vec3::new(1.0, 1.0, 1.0)), Vec3::new(2.0, 2.0, 2.0));
        assert_eq!(Helmert3::identity().invert(), Helmert3::identity());
        let tr = Helmert3::translation_only(Vec3::new(1.0, -2.0, 3.0)).invert();
        assert_eq!(*tr.translation(), Vec3::new(-1.0, 2.0, -3.0));
        let t = Helmert3::new(0.7, rot_about(Vec3::new(0.2, -1.0, 0.4), 2.1), Vec3::new(3.0, 1.0, -4.0)).unwrap();
        let back = t.invert().invert();
        assert!((back.scale() - t.scale()).abs() < 1e-9);
        assert!((back.rotation() - t.rotation()).amax() < 1e-9);
        assert!((back.translation() - t.translation()).amax() < 1e-9);
        let p = Vec3::new(-2.0, 5.0, 0.25);
        assert!((t.invert().apply(&t.apply(&p)) - p).norm() < 1e-6);
        assert!((t.compose(&t.invert()).apply(&p) - p).norm() < 1e-9);
    }

    #[test]
    fn helmert_new_validates() {
        assert!(Helmert3::new(0.0, Matrix3::identity(), Vec3::zeros()).is_err());
        assert!(Helmert3::new(1.0, Matrix3::identity() * 2.0, Vec3::zeros()).is_err());
        let reflection = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(Helmert3::new(1.0, reflection, Vec3::zeros()).is_err());
    }

    #[test]
    fn affine_identity_and_rotation() {
        let p = [Vector2::new(0.0, 0.0), Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)];
        let a = fit_affine2(&p, &p).unwrap();
        assert!((a.linear() - Matrix2::identity()).amax() < 1e-9);
        assert!(a.translation().amax() < 1e-9);
        let q = p.map(|v| Vector2::new(-v.y, v.x));
        let a = fit_affine2(&p, &q).unwrap();
        assert!((a.linear() - Matrix2::new(0.0, -1.0, 1.0, 0.0)).amax() < 1e-6);
    }

    #[test]
    fn affine_recovers_constructed_map() {
        let truth = Affine2::new(Matrix2::new(1.2, -0.4, 0.3, 0.8), Vector2::new(4.0, -1.5)).unwrap();
        let p = [
            Vector2::new(1.0, 2.0),
            Vector2::new(-3.0, 0.5),
            Vector2::new(4.0, -2.0),
            Vector2::new(0.0, 6.0),
        ];
        let q = p.map(|v| truth.apply(&v));
        let a = fit_affine2(&p, &q).unwrap();
        assert!((a.linear() - truth.linear()).amax() < 1e-6);
        assert!((a.translation() - truth.translation()).amax() < 1e-6);
        let inv = a.invert().unwrap();
        assert!((inv.apply(&a.apply(&p[0])) - p[0]).norm() < 1e-9);
    }

    #[test]
    fn affine_collinear_falls_back_to_similarity() {
        let p = [Vector2::new(0.0, 0.0), Vector2::new(1.0, 1.0), Vector2::new(2.0, 2.0)];
        let q = p.map(|v| Vector2::new(-v.y, v.x) * 2.0 + Vector2::new(1.0, 0.0));
        let a = fit_affine2(&p, &q).unwrap();
        assert!(a.is_degenerate());
        for (s, d) in p.iter().zip(&q) {
            assert!((a.apply(s) - d).norm() < 1e-9);
        }
        let same = [Vector2::new(1.0, 1.0); 3];
        assert!(fit_affine2(&same, &q).is_err());
        assert!(fit_affine2(&p, &same).is_err());
    }
}
