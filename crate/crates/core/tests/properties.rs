use proptest::prelude::*;
use rand::Rng;
use volwarp_core::metrics::{pck_auc, ssim, ssim_fg, SsimParams};
use volwarp_core::nalgebra::Matrix3;
use volwarp_core::voxelize::{background_mask, capsule_mask, gaussian_heatmaps};
use volwarp_core::warp::{masked_union, masked_warp_3d};
use volwarp_core::{fit_helmert, CoordinateSpace, Dims3, Helmert3, Image, PartMask, Pose, Vec3, Volume};
use volwarp_testkit as tk;

fn seed() -> impl Strategy<Value = u64> {
    any::<u64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampling_is_linear(s in seed(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut rng = tk::rng(s);
        let dims = Dims3::new(5, 4, 3).unwrap();
        let u = tk::random_volume(&mut rng, dims, 2, -10.0, 10.0);
        let v = tk::random_volume(&mut rng, dims, 2, -10.0, 10.0);
        let mix: Vec<f32> = u.data().iter().zip(v.data()).map(|(a, b)| (alpha * *a as f64 + beta * *b as f64) as f32).collect();
        let w = Volume::from_data(dims, 2, mix).unwrap();
        let p = Vec3::new(rng.gen_range(-1.5..5.5), rng.gen_range(-1.5..4.5), rng.gen_range(-1.5..3.5));
        let (su, sv, sw) = (u.sample(&p).unwrap(), v.sample(&p).unwrap(), w.sample(&p).unwrap());
        for c in 0..2 {
            let want = alpha * su[c] as f64 + beta * sv[c] as f64;
            prop_assert!((sw[c] as f64 - want).abs() <= 1e-5 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn interior_samples_stay_within_corners(s in seed()) {
        let mut rng = tk::rng(s);
        let dims = Dims3::new(6, 6, 6).unwrap();
        let v = tk::random_volume(&mut rng, dims, 3, -10.0, 10.0);
        let p = Vec3::new(rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0));
        let got = v.sample(&p).unwrap();
        let (y, x, z) = (p.x.floor() as usize, p.y.floor() as usize, p.z.floor() as usize);
        for (c, &g) in got.iter().enumerate() {
            let corners: Vec<f32> = (0..8).map(|k| v.get(y + (k >> 2), x + ((k >> 1) & 1), z + (k & 1), c)).collect();
            let lo = corners.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = corners.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            prop_assert!(g >= lo && g <= hi);
        }
    }

    #[test]
    fn helmert_is_equivariant(s in seed()) {
        let mut rng = tk::rng(s);
        let n = rng.gen_range(3..=6);
        let src = tk::random_points(&mut rng, n, 10.0);
        let dst: Vec<Vec3> = src
            .iter()
            .map(|p| p + Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)) * 2.0)
            .collect();
        let q = tk::random_helmert(&mut rng, (1.0, 1.0), 10.0);
        let t = fit_helmert(&src, &dst).unwrap();
        let qs: Vec<Vec3> = src.iter().map(|p| q.apply(p)).collect();
        let qd: Vec<Vec3> = dst.iter().map(|p| q.apply(p)).collect();
        let got = fit_helmert(&qs, &qd).unwrap();
        let want = q.compose(&t).compose(&q.invert());
        prop_assert!((got.scale() - want.scale()).abs() <= 1e-5);
        prop_assert!((got.rotation() - want.rotation()).abs().max() <= 1e-5);
        prop_assert!((got.translation() - want.translation()).abs().max() <= 1e-5);
    }

    #[test]
    fn helmert_rotation_is_proper(s in seed()) {
        let mut rng = tk::rng(s);
        let src = tk::random_points(&mut rng, 5, 10.0);
        // Mirror the source: the unconstrained optimum would be a reflection.
        let dst: Vec<Vec3> = src.iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect();
        let t = fit_helmert(&src, &dst).unwrap();
        prop_assert!((t.rotation().determinant() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn helmert_residual_is_locally_minimal(s in seed()) {
        let mut rng = tk::rng(s);
        let n = rng.gen_range(4..=6);
        let src = tk::random_points(&mut rng, n, 10.0);
        let truth = tk::random_helmert(&mut rng, (0.5, 2.0), 20.0);
        let dst: Vec<Vec3> = src
            .iter()
            .map(|p| truth.apply(p) + Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let t = fit_helmert(&src, &dst).unwrap();
        let residual = |h: &Helmert3| src.iter().zip(&dst).map(|(s, d)| (h.apply(s) - d).norm_squared()).sum::<f64>();
        let base = residual(&t);
        let eps = 1e-3;
        let mut variants = Vec::new();
        for sign in [-1.0, 1.0] {
            variants.push(Helmert3::new(t.scale() + sign * eps, *t.rotation(), *t.translation()).unwrap());
            for axis in 0..3 {
                let mut dt = Vec3::zeros();
                dt[axis] = sign * eps;
                variants.push(Helmert3::new(t.scale(), *t.rotation(), t.translation() + dt).unwrap());
                let mut w = Vec3::zeros();
                w[axis] = sign * eps;
                let r = volwarp_core::nalgebra::Rotation3::new(w).into_inner() * t.rotation();
                variants.push(Helmert3::new(t.scale(), r, *t.translation()).unwrap());
            }
        }
        for v in variants {
            prop_assert!(residual(&v) >= base - 1e-9 * (1.0 + base));
        }
    }

    #[test]
    fn helmert_recovers_uniform_scale(s in seed(), alpha in 0.1f64..10.0) {
        let mut rng = tk::rng(s);
        let src = tk::random_points(&mut rng, 5, 10.0);
        let dst: Vec<Vec3> = src.iter().map(|p| p * alpha).collect();
        let t = fit_helmert(&src, &dst).unwrap();
        prop_assert!((t.scale() - alpha).abs() <= 1e-6 * alpha);
        prop_assert!((t.rotation() - Matrix3::identity()).abs().max() <= 1e-9);
    }

    #[test]
    fn capsule_is_symmetric_and_monotone(s in seed()) {
        let mut rng = tk::rng(s);
        let dims = Dims3::new(16, 14, 12).unwrap();
        let p = |rng: &mut rand_chacha::ChaCha8Rng| Vec3::new(rng.gen_range(-2.0..18.0), rng.gen_range(-2.0..16.0), rng.gen_range(-2.0..14.0));
        let (a, b) = (p(&mut rng), p(&mut rng));
        let r1 = rng.gen_range(0.3..4.0);
        let r2 = r1 + rng.gen_range(0.0..3.0);
        let m = capsule_mask(dims, &a, &b, r1).unwrap();
        prop_assert_eq!(&m, &capsule_mask(dims, &b, &a, r1).unwrap());
        let big = capsule_mask(dims, &a, &b, r2).unwrap();
        prop_assert!(m.data().iter().zip(big.data()).all(|(x, y)| x <= y));
    }

    #[test]
    fn capsule_translates_with_integer_shifts(s in seed(), dy in -4i32..4, dx in -4i32..4, dz in -4i32..4) {
        let mut rng = tk::rng(s);
        let dims = Dims3::new(14, 14, 14).unwrap();
        let p = |rng: &mut rand_chacha::ChaCha8Rng| Vec3::new(rng.gen_range(0.0..14.0), rng.gen_range(0.0..14.0), rng.gen_range(0.0..14.0));
        let (a, b) = (p(&mut rng), p(&mut rng));
        let r = rng.gen_range(0.5..3.0);
        let shift = Vec3::new(dy as f64, dx as f64, dz as f64);
        let m = capsule_mask(dims, &a, &b, r).unwrap();
        let moved = capsule_mask(dims, &(a + shift), &(b + shift), r).unwrap();
        for y in 0..14 {
            for x in 0..14 {
                for z in 0..14 {
                    let (ty, tx, tz) = (y as isize + dy as isize, x as isize + dx as isize, z as isize + dz as isize);
                    if dims.contains(ty, tx, tz) {
                        prop_assert_eq!(m.get(y, x, z), moved.get(ty as usize, tx as usize, tz as usize));
                    }
                }
            }
        }
    }

    #[test]
    fn background_partitions_the_plane(s in seed(), dilation in 0usize..4) {
        let mut rng = tk::rng(s);
        let dims = Dims3::new(12, 10, 5).unwrap();
        let masks: Vec<PartMask> = (0..3).map(|_| tk::random_capsule_mask(&mut rng, dims)).collect();
        let bg = background_mask(&masks, dilation).unwrap();
        // Independent dilated foreground: any foreground pixel within the disk.
        for y in 0..12isize {
            for x in 0..10isize {
                let mut fg = false;
                for m in &masks {
                    for yy in 0..12isize {
                        for xx in 0..10isize {
                            let near = (yy - y).pow(2) + (xx - x).pow(2) <= (dilation * dilation) as isize;
                            if near && (0..5).any(|z| m.get(yy as usize, xx as usize, z)) {
                                fg = true;
                            }
                        }
                    }
                }
                let sum = bg.get(y as usize, x as usize, 0) + if fg { 1.0 } else { 0.0 };
                prop_assert_eq!(sum, 1.0);
            }
        }
    }

    #[test]
    fn heatmaps_peak_at_nearest_voxel(s in seed()) {
        let mut rng = tk::rng(s);
        let dims = Dims3::new(12, 12, 8).unwrap();
        let joints: Vec<(String, Vec3)> = (0..3)
            .map(|i| (format!("j{i}"), Vec3::new(rng.gen_range(0.0..11.0), rng.gen_range(0.0..11.0), rng.gen_range(0.0..7.0))))
            .collect();
        let pose = Pose::new(CoordinateSpace::Voxel, joints.clone()).unwrap();
        let h = gaussian_heatmaps(&pose, dims, &Default::default()).unwrap();
        for (c, (_, j)) in joints.iter().enumerate() {
            let vals: Vec<f32> = h.data().iter().skip(c).step_by(3).copied().collect();
            prop_assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
            let best = vals.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let (ny, nx, nz) = (j.x.round() as usize, j.y.round() as usize, j.z.round() as usize);
            prop_assert_eq!(h.get(ny, nx, nz, c), best);
        }
    }

    #[test]
    fn warp_ignores_part_order(s in seed()) {
        let mut rng = tk::rng(s);
        let dims = Dims3::new(7, 6, 4).unwrap();
        let v = tk::random_volume(&mut rng, dims, 2, -1.0, 1.0);
        let masks: Vec<PartMask> = (0..4).map(|_| tk::random_capsule_mask(&mut rng, dims)).collect();
        let ts: Vec<Helmert3> = (0..4).map(|_| tk::random_helmert(&mut rng, (0.7, 1.4), 2.0)).collect();
        let a = masked_warp_3d(&v, &masks, &ts).unwrap();
        let order = [2usize, 0, 3, 1];
        let pm: Vec<PartMask> = order.iter().map(|&i| masks[i].clone()).collect();
        let pt: Vec<Helmert3> = order.iter().map(|&i| ts[i]).collect();
        let b = masked_warp_3d(&v, &pm, &pt).unwrap();
        let bits = |v: &Volume| v.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn warp_of_non_negative_volume_is_bounded(s in seed()) {
        let mut rng = tk::rng(s);
        let dims = Dims3::new(7, 7, 5).unwrap();
        let v = tk::random_volume(&mut rng, dims, 3, 0.0, 5.0);
        let masks: Vec<PartMask> = (0..3).map(|_| tk::random_capsule_mask(&mut rng, dims)).collect();
        let ts: Vec<Helmert3> = (0..3).map(|_| tk::random_helmert(&mut rng, (0.5, 2.0), 3.0)).collect();
        let out = masked_warp_3d(&v, &masks, &ts).unwrap();
        let top = v.data().iter().copied().fold(0.0f32, f32::max);
        prop_assert!(out.data().iter().all(|&x| x >= 0.0 && x <= top));
        let zero = Volume::zeros(dims, 3).unwrap();
        prop_assert_eq!(masked_warp_3d(&zero, &masks, &ts).unwrap(), zero);
    }

    #[test]
    fn integer_round_trip_restores_masked_volume(s in seed(), dy in -2i32..=2, dx in -2i32..=2, dz in -2i32..=2) {
        let mut rng = tk::rng(s);
        let dims = Dims3::new(10, 10, 8).unwrap();
        let v = tk::random_volume(&mut rng, dims, 2, -1.0, 1.0);
        // Keep the part inside the shrunken grid so its shifted copy stays in bounds.
        let centre = Vec3::new(rng.gen_range(3.0..7.0), rng.gen_range(3.0..7.0), rng.gen_range(3.0..5.0));
        let mask = capsule_mask(dims, &centre, &centre, 1.0).unwrap();
        let t = Helmert3::translation_only(Vec3::new(dy as f64, dx as f64, dz as f64));
        let there = masked_warp_3d(&v, std::slice::from_ref(&mask), &[t]).unwrap();
        let moved = capsule_mask(dims, &t.apply(&centre), &t.apply(&centre), 1.0).unwrap();
        let back = masked_warp_3d(&there, &[moved], &[t.invert()]).unwrap();
        prop_assert_eq!(back, masked_union(&v, &[mask]).unwrap());
    }

    #[test]
    fn ssim_is_symmetric(s in seed()) {
        let mut rng = tk::rng(s);
        let a = tk::random_image(&mut rng, 16, 18, 2);
        let b = tk::random_image(&mut rng, 16, 18, 2);
        let p = SsimParams::default();
        prop_assert!((ssim(&a, &b, &p).unwrap() - ssim(&b, &a, &p).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn ssim_fg_with_full_mask_is_ssim(s in seed()) {
        let mut rng = tk::rng(s);
        let a = tk::random_image(&mut rng, 14, 12, 3);
        let b = tk::random_image(&mut rng, 14, 12, 3);
        let p = SsimParams::default();
        let ones = Image::filled(14, 12, 1, 1.0).unwrap();
        prop_assert!((ssim_fg(&a, &b, &ones, &p).unwrap() - ssim(&a, &b, &p).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn pck_is_monotone_and_rigid_invariant(s in seed()) {
        let mut rng = tk::rng(s);
        let joints = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<(String, Vec3)> {
            (0..14).map(|i| (format!("j{i}"), Vec3::new(rng.gen_range(-900.0..900.0), rng.gen_range(-900.0..900.0), rng.gen_range(-900.0..900.0)))).collect()
        };
        let reference = Pose::new(CoordinateSpace::Millimeter, joints(&mut rng)).unwrap();
        let predicted = reference
            .map_positions(|p| p + Vec3::new(rng.gen_range(-90.0..90.0), rng.gen_range(-90.0..90.0), rng.gen_range(-90.0..90.0)))
            .unwrap();
        let (curve, auc) = pck_auc(&predicted, &reference).unwrap();
        prop_assert!(curve.pck.windows(2).all(|w| w[0] <= w[1]));
        let lo = curve.pck.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = curve.pck.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(auc >= lo && auc <= hi);
        let q = tk::random_helmert(&mut rng, (1.0, 1.0), 500.0);
        let (_, moved) = pck_auc(&predicted.map_positions(|p| q.apply(p)).unwrap(), &reference.map_positions(|p| q.apply(p)).unwrap()).unwrap();
        prop_assert!((moved - auc).abs() <= 1e-9);
    }
}

#[test]
fn ssim_fg_on_checkerboard_mask() {
    let mut rng = tk::rng(5);
    let a = tk::random_image(&mut rng, 16, 16, 1);
    let b = tk::random_image(&mut rng, 16, 16, 1);
    let p = SsimParams::default();
    let board: Vec<f32> = (0..256).map(|i| ((i / 16 + i % 16) % 2) as f32).collect();
    let m = Image::from_data(16, 16, 1, board.clone()).unwrap();
    let map = &volwarp_core::metrics::ssim_maps(&a, &b, &p).unwrap()[0];
    let want: f64 = map.iter().zip(&board).filter(|(_, &m)| m == 1.0).map(|(v, _)| v).sum::<f64>() / 128.0;
    assert!((ssim_fg(&a, &b, &m, &p).unwrap() - want).abs() <= 1e-12);
}
