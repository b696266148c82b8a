//! Core kernels against the brute-force reference loops in `volwarp-testkit`.

use rand::Rng;
use volwarp_core::metrics::{ssim, ssim_fg, SsimParams};
use volwarp_core::voxelize::{capsule_mask, gaussian_heatmaps};
use volwarp_core::warp::{masked_warp_2d, masked_warp_3d};
use volwarp_core::{CoordinateSpace, Dims3, HeatmapParams, Image, Pose, Vec3};
use volwarp_testkit as tk;

fn random_dims(rng: &mut impl Rng) -> (Dims3, usize) {
    let d = Dims3::new(rng.gen_range(1..=8), rng.gen_range(1..=8), rng.gen_range(1..=4)).unwrap();
    (d, rng.gen_range(1..=3))
}

#[test]
fn warp_3d_matches_oracle() {
    let mut rng = tk::rng(11);
    for case in 0..150 {
        let (dims, c) = random_dims(&mut rng);
        let v = tk::random_volume(&mut rng, dims, c, -2.0, 3.0);
        let parts = rng.gen_range(1..=3);
        let masks: Vec<_> = (0..parts).map(|_| tk::random_capsule_mask(&mut rng, dims)).collect();
        let ts: Vec<_> = (0..parts).map(|_| tk::random_helmert(&mut rng, (0.6, 1.6), 2.0)).collect();
        let got = masked_warp_3d(&v, &masks, &ts).unwrap();
        let raw_masks: Vec<Vec<f32>> = masks.iter().map(|m| m.data().to_vec()).collect();
        let sims: Vec<_> = ts.iter().map(tk::Similarity::of).collect();
        let want = tk::warp_3d(v.data(), v.shape(), &raw_masks, &sims);
        let err = tk::max_abs_diff(got.data(), &want);
        assert!(err <= 1e-5, "case {case}: max abs error {err}");
    }
}

#[test]
fn warp_2d_matches_oracle() {
    let mut rng = tk::rng(12);
    for case in 0..150 {
        let (dims, c) = random_dims(&mut rng);
        let v = tk::random_volume(&mut rng, dims, c, -2.0, 3.0);
        let parts = rng.gen_range(1..=3);
        let masks: Vec<_> = (0..parts).map(|_| tk::random_capsule_mask(&mut rng, dims)).collect();
        let affs: Vec<_> = (0..parts).map(|_| tk::random_affine(&mut rng)).collect();
        let got = masked_warp_2d(&v, &masks, &affs).unwrap();
        let raw_masks: Vec<Vec<f32>> = masks.iter().map(|m| m.data().to_vec()).collect();
        let planes: Vec<_> = affs.iter().map(tk::PlaneAffine::of).collect();
        let want = tk::warp_2d(v.data(), v.shape(), &raw_masks, &planes);
        let err = tk::max_abs_diff(got.data(), &want);
        assert!(err <= 1e-5, "case {case}: max abs error {err}");
    }
}

#[test]
fn capsules_match_oracle() {
    let mut rng = tk::rng(13);
    let dims = Dims3::new(32, 32, 32).unwrap();
    for case in 0..100 {
        let p = |rng: &mut rand_chacha::ChaCha8Rng| [rng.gen_range(-4.0..36.0), rng.gen_range(-4.0..36.0), rng.gen_range(-4.0..36.0)];
        let (a, b) = (p(&mut rng), p(&mut rng));
        let r = rng.gen_range(0.5..6.0);
        let got = capsule_mask(dims, &Vec3::from(a), &Vec3::from(b), r).unwrap();
        let want = tk::capsule([32, 32, 32], a, b, r);
        let got_set: Vec<bool> = got.data().iter().map(|&v| v == 1.0).collect();
        assert_eq!(got_set, want, "case {case}");
    }
}

#[test]
fn sphere_of_radius_one_and_a_half() {
    let dims = Dims3::new(9, 9, 9).unwrap();
    let c = Vec3::new(4.0, 4.0, 4.0);
    let m = capsule_mask(dims, &c, &c, 1.5).unwrap();
    assert_eq!(m.popcount(), 19);
    assert_eq!(tk::capsule([9, 9, 9], [4.0; 3], [4.0; 3], 1.5).iter().filter(|&&b| b).count(), 19);
}

#[test]
fn x_axis_capsule() {
    let dims = Dims3::new(7, 12, 7).unwrap();
    let m = capsule_mask(dims, &Vec3::new(3.0, 2.0, 3.0), &Vec3::new(3.0, 9.0, 3.0), 1.0).unwrap();
    // Cross-section of radius 1 is a 5-voxel plus; the caps add one voxel each.
    assert_eq!(m.popcount(), 8 * 5 + 2);
    let want = tk::capsule([7, 12, 7], [3.0, 2.0, 3.0], [3.0, 9.0, 3.0], 1.0);
    assert_eq!(m.data().iter().map(|&v| v == 1.0).collect::<Vec<_>>(), want);
}

#[test]
fn ssim_matches_windowed_oracle() {
    let mut rng = tk::rng(14);
    let p = SsimParams::default();
    for case in 0..20 {
        let channels = rng.gen_range(1..=3);
        let a = tk::random_image(&mut rng, 32, 32, channels);
        // Correlated partner: a blend with fresh noise.
        let noise = tk::random_image(&mut rng, 32, 32, a.channels());
        let t: f32 = rng.gen_range(0.0..1.0);
        let b = Image::from_data(
            32,
            32,
            a.channels(),
            a.data().iter().zip(noise.data()).map(|(x, n)| (1.0 - t) * x + t * n).collect(),
        )
        .unwrap();
        let got = ssim(&a, &b, &p).unwrap();
        let want = tk::ssim(&a, &b, None);
        assert!((got - want).abs() <= 1e-6, "case {case}: {got} vs {want}");
    }
}

#[test]
fn ssim_fg_matches_masked_oracle() {
    let mut rng = tk::rng(15);
    let p = SsimParams::default();
    for _ in 0..5 {
        let a = tk::random_image(&mut rng, 24, 20, 3);
        let b = tk::random_image(&mut rng, 24, 20, 3);
        let mask: Vec<f32> = (0..24 * 20).map(|_| if rng.gen_bool(0.4) { 1.0 } else { 0.0 }).collect();
        let m = Image::from_data(24, 20, 1, mask.clone()).unwrap();
        let got = ssim_fg(&a, &b, &m, &p).unwrap();
        let want = tk::ssim(&a, &b, Some(&mask));
        assert!((got - want).abs() <= 1e-6);
    }
}

#[test]
fn heatmaps_match_direct_evaluation() {
    let mut rng = tk::rng(16);
    let dims = Dims3::new(20, 18, 10).unwrap();
    for _ in 0..10 {
        let joints: Vec<(String, Vec3)> = (0..4)
            .map(|i| {
                (
                    format!("j{i}"),
                    Vec3::new(rng.gen_range(-3.0..23.0), rng.gen_range(-3.0..21.0), rng.gen_range(-3.0..13.0)),
                )
            })
            .collect();
        let sigma = rng.gen_range(0.8..3.0);
        let params = HeatmapParams::new(sigma, 3.0).unwrap();
        let pose = Pose::new(CoordinateSpace::Voxel, joints.clone()).unwrap();
        let got = gaussian_heatmaps(&pose, dims, &params).unwrap();
        for (c, (_, j)) in joints.iter().enumerate() {
            let want = tk::heatmap([20, 18, 10], [j.x, j.y, j.z], sigma, 3.0);
            for (i, w) in want.iter().enumerate() {
                let g = got.data()[i * 4 + c] as f64;
                assert!((g - w).abs() <= 1e-6);
            }
        }
    }
}
