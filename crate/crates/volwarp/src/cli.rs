//! `volwarp` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (unreadable or invalid
//! input, failed computation).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use volwarp_core::mannequin::{canonical_pose, make_mannequin, MannequinSpec};
use volwarp_core::metrics::{pck_auc, ssim, ssim_fg, SsimParams};
use volwarp_core::pipeline::{fit_parts, repose_with, warp_with_fits, Mode, ReposeOptions};
use volwarp_core::sampler::{sample_eval_pairs, DEFAULT_PAIR_COUNT};
use volwarp_core::voxelize::{background_mask, gaussian_heatmaps, heatmaps_2d_mode, part_masks, PartMask};
use volwarp_core::warp::{composite, inpaint_background};
use volwarp_core::{default_skeleton, lift, project, Dims3, HeatmapParams, SkeletonConfig};

use crate::error::{io_at, Error};
use crate::exec::Threads;
use crate::json::{self, MetricReport};
use crate::raster::{read_image, write_image};
use crate::volt::{Kind, Tensor};

#[derive(Debug, Parser)]
#[command(name = "volwarp", version, about = "Articulated volumetric feature warping")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

fn parse_dims(s: &str) -> Result<Dims3, String> {
    let parts: Vec<&str> = s.split([',', 'x']).collect();
    let [h, w, d] = parts[..] else {
        return Err("expected H,W,D".into());
    };
    let n = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Dims3::new(n(h)?, n(w)?, n(d)?).map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| format!("expected one of 3d, 2d-warp, 2d-pose, 2d-both; got `{s}`"))
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args)]
pub struct SkeletonArgs {
    /// Skeleton config JSON (default: the built-in 14-joint skeleton).
    #[arg(long)]
    pub skeleton: Option<PathBuf>,
    /// Multiplies every part's capsule radius.
    #[arg(long, value_parser = positive)]
    pub radius_scale: Option<f64>,
}

impl SkeletonArgs {
    fn load(&self) -> crate::Result<SkeletonConfig> {
        let cfg = match &self.skeleton {
            Some(p) => json::read_skeleton(p)?,
            None => default_skeleton(),
        };
        Ok(match self.radius_scale {
            Some(s) => cfg.with_radius_scale(s)?,
            None => cfg,
        })
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterise the part masks of a pose into an H x W x D x 10 mask tensor.
    Mask {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_dims)]
        dims: Dims3,
        #[command(flatten)]
        skeleton: SkeletonArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Joint heatmaps of a pose (2D-replicated for the 2d-pose and 2d-both modes).
    Heatmap {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_dims)]
        dims: Dims3,
        #[arg(long, value_parser = parse_mode, default_value = "3d")]
        mode: Mode,
        #[arg(long, value_parser = positive, default_value_t = 2.0)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one transform per part from an input and a target pose.
    Fit {
        #[arg(long)]
        pose_in: PathBuf,
        #[arg(long)]
        pose_tgt: PathBuf,
        #[arg(long, value_parser = parse_mode, default_value = "3d")]
        mode: Mode,
        #[arg(long)]
        skeleton: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Masked warp of a volume, from masks + transforms or from a pose pair.
    Warp {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, requires = "transforms", conflicts_with_all = ["pose_in", "pose_tgt"])]
        masks: Option<PathBuf>,
        #[arg(long, requires = "masks")]
        transforms: Option<PathBuf>,
        #[arg(long, requires = "pose_tgt")]
        pose_in: Option<PathBuf>,
        #[arg(long, requires = "pose_in")]
        pose_tgt: Option<PathBuf>,
        #[arg(long, value_parser = parse_mode, default_value = "3d")]
        mode: Mode,
        #[command(flatten)]
        skeleton: SkeletonArgs,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        threads: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Alpha-blend a foreground over a background: mask * fg + (1 - mask) * bg.
    Composite {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        bg: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Known-background mask from part masks: complement of the dilated silhouette.
    Bgmask {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        dilate: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill everything outside the known background from its surroundings.
    Inpaint {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a (D*C)-channel image into an H x W x D x C volume.
    Lift {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        channels: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge depth and channels of a volume into one image channel axis.
    Project {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// SSIM of two images, plus foreground SSIM when a mask is given.
    Ssim {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PCK curve over 0..=150 mm and its area for two millimetre poses.
    PoseAuc {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthetic part-indexed mannequin volume.
    Mannequin {
        #[arg(long, value_parser = parse_dims)]
        dims: Dims3,
        #[arg(long, default_value_t = 12)]
        channels: usize,
        #[arg(long)]
        falloff: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        masks_out: Option<PathBuf>,
        #[arg(long)]
        pose_out: Option<PathBuf>,
    },
    /// Seeded (source, target) frame pairs sharing a clothing layout.
    EvalPairs {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PAIR_COUNT)]
        n: usize,
        /// Overrides the manifest's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Masks, fits, warp and target heatmaps in one run.
    Pipeline {
        /// Input volume; omit to repose a mannequin of `--mannequin` dims.
        #[arg(long = "in", required_unless_present = "mannequin", conflicts_with = "mannequin")]
        input: Option<PathBuf>,
        #[arg(long, value_parser = parse_dims)]
        mannequin: Option<Dims3>,
        #[arg(long, default_value_t = 12)]
        channels: usize,
        /// Input pose (default for a mannequin: its canonical pose).
        #[arg(long, required_unless_present = "mannequin")]
        pose_in: Option<PathBuf>,
        #[arg(long)]
        pose_tgt: PathBuf,
        #[arg(long, value_parser = parse_mode, default_value = "3d")]
        mode: Mode,
        #[arg(long, value_parser = positive, default_value_t = 2.0)]
        sigma: f64,
        #[command(flatten)]
        skeleton: SkeletonArgs,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        threads: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        heatmaps: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<volwarp_core::Error> for Failure {
    fn from(e: volwarp_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Outcome {
    fs::write(path, bytes).map_err(io_at(path))?;
    Ok(())
}

fn warn_empty(empty: &[String]) {
    for p in empty {
        eprintln!("warning: mask of part `{p}` is empty");
    }
}

fn execute(cmd: Command) -> Outcome {
    match cmd {
        Command::Mask {
            input,
            dims,
            skeleton,
            out,
        } => {
            let pose = json::read_pose(&input)?;
            let set = part_masks(&pose, &skeleton.load()?, dims)?;
            warn_empty(&set.empty_parts);
            Tensor::from_masks(&set.masks)?.write(&out)?;
        }
        Command::Heatmap {
            input,
            dims,
            mode,
            sigma,
            out,
        } => {
            let pose = json::read_pose(&input)?;
            let params = HeatmapParams::new(sigma, HeatmapParams::default().truncation)?;
            let h = if mode.heatmaps_in_3d() {
                gaussian_heatmaps(&pose, dims, &params)?
            } else {
                heatmaps_2d_mode(&pose, dims, &params)?
            };
            Tensor::from_volume(&h).write(&out)?;
        }
        Command::Fit {
            pose_in,
            pose_tgt,
            mode,
            skeleton,
            out,
        } => {
            let cfg = SkeletonArgs {
                skeleton,
                radius_scale: None,
            }
            .load()?;
            let fits = fit_parts(&cfg, &json::read_pose(&pose_in)?, &json::read_pose(&pose_tgt)?, mode.warps_in_3d())?;
            json::write_fits(&out, &fits)?;
        }
        Command::Warp {
            input,
            masks,
            transforms,
            pose_in,
            pose_tgt,
            mode,
            skeleton,
            threads,
            out,
        } => {
            let volume = Tensor::read(&input)?.into_volume()?;
            let exec = Threads(threads as usize);
            let warped = match (masks, transforms, pose_in, pose_tgt) {
                (Some(m), Some(t), None, None) => {
                    let fits = json::read_fits(&t)?;
                    let names: Vec<String> = fits.iter().map(|f| f.part.clone()).collect();
                    let masks = Tensor::read(&m)?.into_masks(&names)?;
                    warp_with_fits(&volume, &masks, &fits, &exec)?
                }
                (None, None, Some(pi), Some(pt)) => {
                    let cfg = skeleton.load()?;
                    let (input, target) = (json::read_pose(&pi)?, json::read_pose(&pt)?);
                    let set = part_masks(&input, &cfg, volume.dims())?;
                    warn_empty(&set.empty_parts);
                    let fits = fit_parts(&cfg, &input, &target, mode.warps_in_3d())?;
                    warp_with_fits(&volume, &set.masks, &fits, &exec)?
                }
                _ => {
                    return Err(Failure::Usage(
                        "warp needs either --masks with --transforms or --pose-in with --pose-tgt".into(),
                    ))
                }
            };
            Tensor::from_volume(&warped).write(&out)?;
        }
        Command::Composite { input, mask, bg, out } => {
            let img = composite(&read_image(&input)?, &read_image(&mask)?, &read_image(&bg)?)?;
            write_image(&out, &img, Kind::Image)?;
        }
        Command::Bgmask { input, dilate, out } => {
            let t = Tensor::read(&input)?;
            let n = match t.shape[..] {
                [_, _, _, n] => n,
                _ => 1,
            };
            let names: Vec<String> = (0..n).map(|i| format!("part{i}")).collect();
            let masks: Vec<PartMask> = t.into_masks(&names)?;
            let bg = background_mask(&masks, dilate)?;
            write_image(&out, &bg, Kind::Mask)?;
        }
        Command::Inpaint { input, mask, out } => {
            let img = inpaint_background(&read_image(&input)?, &read_image(&mask)?)?;
            write_image(&out, &img, Kind::Image)?;
        }
        Command::Lift {
            input,
            depth,
            channels,
            out,
        } => {
            let v = lift(&Tensor::read(&input)?.into_image()?, depth, channels)?;
            Tensor::from_volume(&v).write(&out)?;
        }
        Command::Project { input, out } => {
            let img = project(&Tensor::read(&input)?.into_volume()?);
            Tensor::from_image(&img, Kind::Image).write(&out)?;
        }
        Command::Ssim {
            input,
            reference,
            mask,
            out,
        } => {
            let (a, b) = (read_image(&input)?, read_image(&reference)?);
            let p = SsimParams::default();
            let mut report = MetricReport {
                ssim: Some(ssim(&a, &b, &p)?),
                ..Default::default()
            };
            if let Some(m) = mask {
                report.ssim_fg = Some(ssim_fg(&a, &b, &read_image(&m)?, &p)?);
            }
            println!("ssim {:?}", report.ssim.unwrap());
            if let Some(v) = report.ssim_fg {
                println!("ssim_fg {v:?}");
            }
            if let Some(o) = out {
                json::write(&o, &report)?;
            }
        }
        Command::PoseAuc { input, reference, out } => {
            let (curve, auc) = pck_auc(&json::read_pose(&input)?, &json::read_pose(&reference)?)?;
            println!("pck_auc {auc:?}");
            if let Some(o) = out {
                json::write(
                    &o,
                    &MetricReport {
                        pck_auc: Some(auc),
                        pck_curve: Some(curve.pck),
                        ..Default::default()
                    },
                )?;
            }
        }
        Command::Mannequin {
            dims,
            channels,
            falloff,
            out,
            masks_out,
            pose_out,
        } => {
            let mut spec = MannequinSpec::canonical(dims, channels);
            spec.falloff = falloff;
            let (v, masks) = make_mannequin(&spec)?;
            Tensor::from_volume(&v).write(&out)?;
            if let Some(p) = masks_out {
                Tensor::from_masks(&masks)?.write(&p)?;
            }
            if let Some(p) = pose_out {
                json::write_pose(&p, &spec.pose)?;
            }
        }
        Command::EvalPairs { input, n, seed, out } => {
            let mut manifest = json::read_manifest(&input)?;
            if let Some(s) = seed {
                manifest.seed = s;
            }
            let pairs = sample_eval_pairs(&manifest, n)?;
            write_bytes(&out, &json::pairs_to_bytes(manifest.seed, &pairs)?)?;
        }
        Command::Pipeline {
            input,
            mannequin,
            channels,
            pose_in,
            pose_tgt,
            mode,
            sigma,
            skeleton,
            threads,
            out,
            heatmaps,
            report,
        } => {
            let cfg = skeleton.load()?;
            let (volume, input_pose) = match (input, mannequin) {
                (Some(path), None) => {
                    let pi = pose_in.ok_or_else(|| Failure::Usage("--pose-in is required with --in".into()))?;
                    (Tensor::read(&path)?.into_volume()?, json::read_pose(&pi)?)
                }
                (None, Some(dims)) => {
                    let pose = match pose_in {
                        Some(p) => json::read_pose(&p)?,
                        None => canonical_pose(dims),
                    };
                    let spec = MannequinSpec {
                        dims,
                        channels,
                        pose: pose.clone(),
                        skeleton: cfg.clone(),
                        falloff: false,
                    };
                    (make_mannequin(&spec)?.0, pose)
                }
                _ => return Err(Failure::Usage("give exactly one of --in and --mannequin".into())),
            };
            let target = json::read_pose(&pose_tgt)?;
            let opts = ReposeOptions {
                mode,
                heatmap: HeatmapParams::new(sigma, HeatmapParams::default().truncation)?,
            };
            let start = Instant::now();
            let r = repose_with(&volume, &input_pose, &target, &cfg, &opts, &Threads(threads as usize))?;
            eprintln!("pipeline ({}) took {:.1} ms", mode.as_str(), start.elapsed().as_secs_f64() * 1e3);
            warn_empty(&r.empty_parts);
            Tensor::from_volume(&r.warped).write(&out)?;
            if let Some(p) = heatmaps {
                Tensor::from_volume(&r.heatmaps).write(&p)?;
            }
            if let Some(p) = report {
                write_bytes(&p, &json::pipeline_report(mode.as_str(), volume.shape(), &r.fits, &r.empty_parts)?)?;
            }
        }
    }
    Ok(())
}
