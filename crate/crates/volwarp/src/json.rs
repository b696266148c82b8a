//! JSON files: poses, skeleton configs, per-part transforms, evaluation
//! manifests and pair lists, metric and pipeline reports.
//!
//! Every float is written with 17 significant digits, which round-trips an
//! `f64` exactly; objects keep their key order on both read and write.

use std::fmt;
use std::fs;
use std::io;
use std::marker::PhantomData;
use std::path::Path;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use volwarp_core::nalgebra::{Matrix2, Matrix3, Vector2};
use volwarp_core::pipeline::{PartFit, PartTransform};
use volwarp_core::sampler::{EvalEntry, EvalManifest};
use volwarp_core::skeleton::{Anchor, PartDefinition, RadiusRule};
use volwarp_core::{Affine2, CoordinateSpace, Helmert3, Pose, SkeletonConfig, Vec3};

use crate::error::{io_at, Error, Result};

/// Compact formatter that writes floats as `d.dddddddddddddddde±x`.
/// Non-finite values never reach it: the serializer emits `null` for them.
struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_bytes(value)?).map_err(io_at(path))
}

pub fn read<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(io_at(path))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// JSON object as an ordered list of entries; duplicate keys are an error.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedMap<V>(pub Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for OrderedMap<V> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V_<V>(PhantomData<V>);
        impl<'de, V: Deserialize<'de>> Visitor<'de> for V_<V> {
            type Value = OrderedMap<V>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out: Vec<(String, V)> = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, V>()? {
                    if out.iter().any(|(o, _)| *o == k) {
                        return Err(de::Error::custom(format!("duplicate key `{k}`")));
                    }
                    out.push((k, v));
                }
                Ok(OrderedMap(out))
            }
        }
        d.deserialize_map(V_(PhantomData))
    }
}

impl<V: Serialize> Serialize for OrderedMap<V> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(k, v)?;
        }
        m.end()
    }
}

// ---- poses ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseFile {
    space: String,
    joints: OrderedMap<[f64; 3]>,
}

pub fn pose_from_str(s: &str) -> Result<Pose> {
    let f: PoseFile = serde_json::from_str(s)?;
    let space = CoordinateSpace::parse(&f.space)
        .ok_or_else(|| Error::Format(format!("unknown coordinate space `{}`", f.space)))?;
    let joints = f.joints.0.into_iter().map(|(k, v)| (k, Vec3::from(v))).collect();
    Ok(Pose::new(space, joints)?)
}

pub fn pose_to_bytes(p: &Pose) -> Result<Vec<u8>> {
    let f = PoseFile {
        space: p.space().as_str().to_string(),
        joints: OrderedMap(p.joints().iter().map(|(k, v)| (k.clone(), [v.x, v.y, v.z])).collect()),
    };
    to_bytes(&f)
}

pub fn read_pose(path: &Path) -> Result<Pose> {
    pose_from_str(&fs::read_to_string(path).map_err(io_at(path))?)
}

pub fn write_pose(path: &Path, p: &Pose) -> Result<()> {
    fs::write(path, pose_to_bytes(p)?).map_err(io_at(path))
}

// ---- skeleton ----

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AnchorFile {
    Joint(String),
    Midpoint { midpoint: [String; 2] },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RadiusFile {
    Fixed(f64),
    Fraction { fraction: f64, min: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartFile {
    name: String,
    joints: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchor: Option<AnchorFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<RadiusFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SkeletonFile {
    joints: Vec<String>,
    parts: Vec<PartFile>,
}

/// Reads a skeleton config. `"shoulder_midpoint"` is accepted as an anchor
/// name for the mean of `l_shoulder` and `r_shoulder`; a missing radius
/// means the default rule.
pub fn skeleton_from_str(s: &str) -> Result<SkeletonConfig> {
    let f: SkeletonFile = serde_json::from_str(s)?;
    let parts = f
        .parts
        .into_iter()
        .map(|p| PartDefinition {
            name: p.name,
            joints: p.joints,
            anchor: p.anchor.map(|a| match a {
                AnchorFile::Joint(n) if n == "shoulder_midpoint" => {
                    Anchor::Midpoint("l_shoulder".into(), "r_shoulder".into())
                }
                AnchorFile::Joint(n) => Anchor::Joint(n),
                AnchorFile::Midpoint { midpoint: [a, b] } => Anchor::Midpoint(a, b),
            }),
            radius: match p.radius {
                None => RadiusRule::DEFAULT,
                Some(RadiusFile::Fixed(r)) => RadiusRule::Fixed(r),
                Some(RadiusFile::Fraction { fraction, min }) => RadiusRule::BoneFraction { fraction, min },
            },
        })
        .collect();
    Ok(SkeletonConfig::new(f.joints, parts)?)
}

pub fn skeleton_to_bytes(cfg: &SkeletonConfig) -> Result<Vec<u8>> {
    let f = SkeletonFile {
        joints: cfg.joint_names().to_vec(),
        parts: cfg
            .parts()
            .iter()
            .map(|p| PartFile {
                name: p.name.clone(),
                joints: p.joints.clone(),
                anchor: p.anchor.clone().map(|a| match a {
                    Anchor::Joint(n) => AnchorFile::Joint(n),
                    Anchor::Midpoint(a, b) => AnchorFile::Midpoint { midpoint: [a, b] },
                }),
                radius: Some(match p.radius {
                    RadiusRule::Fixed(r) => RadiusFile::Fixed(r),
                    RadiusRule::BoneFraction { fraction, min } => RadiusFile::Fraction { fraction, min },
                }),
            })
            .collect(),
    };
    to_bytes(&f)
}

pub fn read_skeleton(path: &Path) -> Result<SkeletonConfig> {
    skeleton_from_str(&fs::read_to_string(path).map_err(io_at(path))?)
}

// ---- transforms ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HelmertFile {
    scale: f64,
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    degenerate: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AffineFile {
    linear: [[f64; 2]; 2],
    translation: [f64; 2],
    degenerate: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TransformFile {
    Helmert(HelmertFile),
    Affine(AffineFile),
}

impl From<&PartTransform> for TransformFile {
    fn from(t: &PartTransform) -> Self {
        match t {
            PartTransform::Helmert(h) => {
                let r = h.rotation();
                let t = h.translation();
                TransformFile::Helmert(HelmertFile {
                    scale: h.scale(),
                    rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
                    translation: [t.x, t.y, t.z],
                    degenerate: h.is_degenerate(),
                })
            }
            PartTransform::Affine(a) => {
                let l = a.linear();
                let t = a.translation();
                TransformFile::Affine(AffineFile {
                    linear: [[l[(0, 0)], l[(0, 1)]], [l[(1, 0)], l[(1, 1)]]],
                    translation: [t.x, t.y],
                    degenerate: a.is_degenerate(),
                })
            }
        }
    }
}

impl TransformFile {
    fn into_transform(self) -> Result<PartTransform> {
        Ok(match self {
            TransformFile::Helmert(h) => {
                let r = h.rotation;
                let rot = Matrix3::new(
                    r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
                );
                PartTransform::Helmert(
                    Helmert3::new(h.scale, rot, Vec3::from(h.translation))?.with_degenerate(h.degenerate),
                )
            }
            TransformFile::Affine(a) => {
                let l = a.linear;
                let lin = Matrix2::new(l[0][0], l[0][1], l[1][0], l[1][1]);
                PartTransform::Affine(Affine2::new(lin, Vector2::from(a.translation))?.with_degenerate(a.degenerate))
            }
        })
    }
}

/// Transforms keyed by part name, in part order.
pub fn fits_to_bytes(fits: &[PartFit]) -> Result<Vec<u8>> {
    let map = OrderedMap(fits.iter().map(|f| (f.part.clone(), TransformFile::from(&f.transform))).collect());
    to_bytes(&map)
}

pub fn fits_from_str(s: &str) -> Result<Vec<PartFit>> {
    let map: OrderedMap<TransformFile> = serde_json::from_str(s)?;
    map.0
        .into_iter()
        .map(|(part, t)| {
            Ok(PartFit {
                part,
                transform: t.into_transform()?,
            })
        })
        .collect()
}

pub fn read_fits(path: &Path) -> Result<Vec<PartFit>> {
    fits_from_str(&fs::read_to_string(path).map_err(io_at(path))?)
}

pub fn write_fits(path: &Path, fits: &[PartFit]) -> Result<()> {
    fs::write(path, fits_to_bytes(fits)?).map_err(io_at(path))
}

#[derive(Serialize)]
struct PartReport {
    part: String,
    degenerate: bool,
    transform: TransformFile,
}

#[derive(Serialize)]
struct PipelineReport<'a> {
    mode: &'a str,
    shape: [usize; 4],
    parts: Vec<PartReport>,
    empty_parts: &'a [String],
}

/// Per-part transforms and degeneracy flags of one reposing run.
pub fn pipeline_report(mode: &str, shape: [usize; 4], fits: &[PartFit], empty_parts: &[String]) -> Result<Vec<u8>> {
    to_bytes(&PipelineReport {
        mode,
        shape,
        parts: fits
            .iter()
            .map(|f| PartReport {
                part: f.part.clone(),
                degenerate: f.transform.is_degenerate(),
                transform: TransformFile::from(&f.transform),
            })
            .collect(),
        empty_parts,
    })
}

// ---- evaluation manifest ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryFile {
    pub subject: String,
    pub clothing: String,
    pub frame: String,
    pub pose: String,
    pub image: String,
}

impl From<&EvalEntry> for EntryFile {
    fn from(e: &EvalEntry) -> Self {
        Self {
            subject: e.subject.clone(),
            clothing: e.clothing.clone(),
            frame: e.frame.clone(),
            pose: e.pose.clone(),
            image: e.image.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    seed: u64,
    entries: Vec<EntryFile>,
}

pub fn manifest_from_str(s: &str) -> Result<EvalManifest> {
    let f: ManifestFile = serde_json::from_str(s)?;
    let m = EvalManifest {
        seed: f.seed,
        entries: f
            .entries
            .into_iter()
            .map(|e| EvalEntry {
                subject: e.subject,
                clothing: e.clothing,
                frame: e.frame,
                pose: e.pose,
                image: e.image,
            })
            .collect(),
    };
    m.validate()?;
    Ok(m)
}

pub fn manifest_to_bytes(m: &EvalManifest) -> Result<Vec<u8>> {
    to_bytes(&ManifestFile {
        seed: m.seed,
        entries: m.entries.iter().map(EntryFile::from).collect(),
    })
}

pub fn read_manifest(path: &Path) -> Result<EvalManifest> {
    manifest_from_str(&fs::read_to_string(path).map_err(io_at(path))?)
}

#[derive(Serialize)]
struct PairFile {
    source: EntryFile,
    target: EntryFile,
}

#[derive(Serialize)]
struct PairsFile {
    seed: u64,
    n: usize,
    pairs: Vec<PairFile>,
}

pub fn pairs_to_bytes(seed: u64, pairs: &[(&EvalEntry, &EvalEntry)]) -> Result<Vec<u8>> {
    to_bytes(&PairsFile {
        seed,
        n: pairs.len(),
        pairs: pairs
            .iter()
            .map(|(a, b)| PairFile {
                source: EntryFile::from(*a),
                target: EntryFile::from(*b),
            })
            .collect(),
    })
}

// ---- metrics ----

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct MetricReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssim_fg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pck_auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pck_curve: Option<Vec<f64>>,
}
