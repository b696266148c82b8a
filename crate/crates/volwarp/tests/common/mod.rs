#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::Rng;
use volwarp::json;
use volwarp::raster::write_png;
use volwarp_core::mannequin::canonical_pose;
use volwarp_core::sampler::{EvalEntry, EvalManifest};
use volwarp_core::{CoordinateSpace, Dims3, Helmert3, Image, Pose, Vec3};
use volwarp_testkit as tk;

pub const DIMS: &str = "24,20,8";

pub fn volwarp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_volwarp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs a command and panics with its stderr unless it exits 0.
pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = volwarp(dir, args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Canonical pose of the scenario grid moved by a small rotation about the
/// pelvis plus per-joint jitter, all from fixed seeds.
pub fn target_pose(dims: Dims3) -> Pose {
    let base = canonical_pose(dims);
    let mut rng = tk::rng(77);
    let pelvis = (base.joint("l_hip").unwrap() + base.joint("r_hip").unwrap()) * 0.5;
    let rot = *volwarp_core::nalgebra::Rotation3::new(Vec3::new(0.05, -0.1, 0.2)).matrix();
    let turn = Helmert3::new(1.0, rot, pelvis - rot * pelvis).unwrap();
    base.map_positions(|p| turn.apply(p) + Vec3::new(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7), rng.gen_range(-0.3..0.3)))
        .unwrap()
}

fn mm_pose(seed: u64, noise: f64) -> Pose {
    let mut rng = tk::rng(seed);
    let joints = (0..14)
        .map(|i| {
            let p = Vec3::new(i as f64 * 50.0, (i % 3) as f64 * 120.0, 900.0);
            (format!("j{i}"), p + Vec3::new(rng.gen_range(-noise..=noise), rng.gen_range(-noise..=noise), rng.gen_range(-noise..=noise)))
        })
        .collect();
    Pose::new(CoordinateSpace::Millimeter, joints).unwrap()
}

pub fn manifest() -> EvalManifest {
    let mut entries = Vec::new();
    for (subject, clothing, frames) in [("s1", "c1", 4), ("s1", "c2", 1), ("s2", "c1", 3), ("s3", "c9", 6)] {
        for f in 0..frames {
            entries.push(EvalEntry {
                subject: subject.into(),
                clothing: clothing.into(),
                frame: format!("{f:04}"),
                pose: format!("{subject}/{clothing}/{f:04}.json"),
                image: format!("{subject}/{clothing}/{f:04}.png"),
            });
        }
    }
    EvalManifest { entries, seed: 1234 }
}

/// Writes the fixed inputs of the scenario into `dir`.
pub fn write_inputs(dir: &Path) {
    let dims = Dims3::new(24, 20, 8).unwrap();
    json::write_pose(&dir.join("tgt.json"), &target_pose(dims)).unwrap();
    json::write_pose(&dir.join("ref_mm.json"), &mm_pose(1, 0.0)).unwrap();
    json::write_pose(&dir.join("pred_mm.json"), &mm_pose(1, 60.0)).unwrap();
    fs::write(dir.join("manifest.json"), json::manifest_to_bytes(&manifest()).unwrap()).unwrap();
    let mut rng = tk::rng(5);
    let quantise = |img: Image| {
        let d = img.data().iter().map(|v| (v * 255.0).round() / 255.0).collect();
        Image::from_data(img.height(), img.width(), 3, d).unwrap()
    };
    write_png(&dir.join("a.png"), &quantise(tk::random_image(&mut rng, 24, 20, 3))).unwrap();
    let b = tk::random_image(&mut rng, 24, 20, 3);
    volwarp::Tensor::from_image(&b, volwarp::Kind::Image).write(&dir.join("b.volt")).unwrap();
}

/// Runs every subcommand once with `--threads threads` where it applies and
/// returns all produced files plus captured stdout, keyed by name.
pub fn scenario(dir: &Path, threads: u32) -> BTreeMap<String, Vec<u8>> {
    write_inputs(dir);
    let t = threads.to_string();
    let mut stdout = Vec::new();
    let steps: Vec<Vec<&str>> = vec![
        vec!["mannequin", "--dims", DIMS, "--channels", "12", "--out", "m.volt", "--masks-out", "mm.volt", "--pose-out", "p.json"],
        vec!["mannequin", "--dims", DIMS, "--channels", "10", "--falloff", "--out", "mf.volt"],
        vec!["mask", "--in", "p.json", "--dims", DIMS, "--out", "masks.volt"],
        vec!["mask", "--in", "p.json", "--dims", DIMS, "--radius-scale", "1.5", "--out", "masks_wide.volt"],
        vec!["heatmap", "--in", "tgt.json", "--dims", DIMS, "--out", "h3.volt"],
        vec!["heatmap", "--in", "tgt.json", "--dims", DIMS, "--mode", "2d-pose", "--sigma", "1.5", "--out", "h2.volt"],
        vec!["fit", "--pose-in", "p.json", "--pose-tgt", "tgt.json", "--out", "t3.json"],
        vec!["fit", "--pose-in", "p.json", "--pose-tgt", "tgt.json", "--mode", "2d-warp", "--out", "t2.json"],
        vec!["warp", "--in", "m.volt", "--masks", "masks.volt", "--transforms", "t3.json", "--threads", &t, "--out", "w3.volt"],
        vec!["warp", "--in", "m.volt", "--masks", "masks.volt", "--transforms", "t2.json", "--threads", &t, "--out", "w2.volt"],
        vec!["warp", "--in", "m.volt", "--pose-in", "p.json", "--pose-tgt", "tgt.json", "--threads", &t, "--out", "wp.volt"],
        vec!["project", "--in", "w3.volt", "--out", "proj.volt"],
        vec!["lift", "--in", "proj.volt", "--depth", "8", "--channels", "12", "--out", "lifted.volt"],
        vec!["bgmask", "--in", "masks.volt", "--dilate", "2", "--out", "bg.volt"],
        vec!["composite", "--in", "a.png", "--mask", "bg.volt", "--bg", "b.volt", "--out", "c.png"],
        vec!["composite", "--in", "a.png", "--mask", "bg.volt", "--bg", "b.volt", "--out", "c.volt"],
        vec!["inpaint", "--in", "a.png", "--mask", "bg.volt", "--out", "inp.volt"],
        vec!["ssim", "--in", "a.png", "--ref", "c.volt", "--mask", "bg.volt", "--out", "ssim.json"],
        vec!["pose-auc", "--in", "pred_mm.json", "--ref", "ref_mm.json", "--out", "auc.json"],
        vec!["eval-pairs", "--in", "manifest.json", "--n", "50", "--seed", "7", "--out", "pairs.json"],
        vec!["eval-pairs", "--in", "manifest.json", "--out", "pairs_default.json"],
    ];
    for args in &steps {
        stdout.extend(ok(dir, args).stdout);
    }
    for mode in ["3d", "2d-warp", "2d-pose", "2d-both"] {
        let (o, h, r) = (format!("pl_{mode}.volt"), format!("plh_{mode}.volt"), format!("plr_{mode}.json"));
        ok(
            dir,
            &["pipeline", "--mannequin", DIMS, "--pose-tgt", "tgt.json", "--mode", mode, "--threads", &t, "--out", &o, "--heatmaps", &h, "--report", &r],
        );
    }
    ok(
        dir,
        &["pipeline", "--in", "m.volt", "--pose-in", "p.json", "--pose-tgt", "tgt.json", "--threads", &t, "--out", "pl_in.volt"],
    );
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        files.insert(path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap());
    }
    files.insert("<stdout>".into(), stdout);
    files
}
