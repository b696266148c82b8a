//! Joint naming, poses, body-part definitions and correspondence extraction.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::Vec3;

/// Coordinate frame a pose is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoordinateSpace {
    /// Volume index space: `(row, column, depth)` in voxels.
    Voxel,
    /// Metric space, used for pose-accuracy metrics.
    Millimeter,
}

impl CoordinateSpace {
    pub fn as_str(&self) -> &'static str {
        match self {
            CoordinateSpace::Voxel => "voxel",
            CoordinateSpace::Millimeter => "millimeter",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "voxel" => Some(CoordinateSpace::Voxel),
            "millimeter" => Some(CoordinateSpace::Millimeter),
            _ => None,
        }
    }
}

/// Named 3D joint positions. Joint names are unique and every position is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    space: CoordinateSpace,
    joints: Vec<(String, Vec3)>,
}

impl Pose {
    pub fn new(space: CoordinateSpace, joints: Vec<(String, Vec3)>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::Empty("pose has no joints"));
        }
        for (i, (name, p)) in joints.iter().enumerate() {
            if joints[..i].iter().any(|(other, _)| other == name) {
                return Err(Error::DuplicateJoint(name.clone()));
            }
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::NonFinite("joint position"));
            }
        }
        Ok(Self { space, joints })
    }

    pub fn space(&self) -> CoordinateSpace {
        self.space
    }

    pub fn joints(&self) -> &[(String, Vec3)] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<Vec3> {
        self.joints.iter().find(|(n, _)| n == name).map(|(_, p)| *p)
    }

    pub fn joint(&self, name: &str) -> Result<Vec3> {
        self.get(name).ok_or_else(|| Error::MissingJoint(name.to_owned()))
    }

    /// Applies `f` to every joint position, keeping names and order.
    pub fn map_positions(&self, mut f: impl FnMut(&Vec3) -> Vec3) -> Result<Self> {
        let joints = self.joints.iter().map(|(n, p)| (n.clone(), f(p))).collect();
        Pose::new(self.space, joints)
    }
}

/// Extra point that pins the rotation of a two-joint part about its own axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Anchor {
    Joint(String),
    /// Arithmetic mean of two joints, e.g. the shoulder midpoint.
    Midpoint(String, String),
}

impl Anchor {
    pub fn resolve(&self, pose: &Pose) -> Result<Vec3> {
        match self {
            Anchor::Joint(name) => pose.joint(name),
            Anchor::Midpoint(a, b) => Ok((pose.joint(a)? + pose.joint(b)?) * 0.5),
        }
    }

    fn joint_names(&self) -> Vec<&str> {
        match self {
            Anchor::Joint(a) => vec![a.as_str()],
            Anchor::Midpoint(a, b) => vec![a.as_str(), b.as_str()],
        }
    }
}

/// Capsule radius for a part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusRule {
    /// Constant radius in voxels.
    Fixed(f64),
    /// `max(min, fraction * bone length)`.
    BoneFraction { fraction: f64, min: f64 },
}

impl RadiusRule {
    pub const DEFAULT: RadiusRule = RadiusRule::BoneFraction {
        fraction: 0.25,
        min: 2.0,
    };

    pub fn radius(&self, bone_length: f64) -> f64 {
        match *self {
            RadiusRule::Fixed(r) => r,
            RadiusRule::BoneFraction { fraction, min } => libm::fmax(min, fraction * bone_length),
        }
    }

    pub fn scaled(&self, s: f64) -> RadiusRule {
        match *self {
            RadiusRule::Fixed(r) => RadiusRule::Fixed(r * s),
            RadiusRule::BoneFraction { fraction, min } => RadiusRule::BoneFraction {
                fraction: fraction * s,
                min: min * s,
            },
        }
    }

    fn validate(&self) -> bool {
        match *self {
            RadiusRule::Fixed(r) => r.is_finite() && r > 0.0,
            RadiusRule::BoneFraction { fraction, min } => {
                fraction.is_finite() && min.is_finite() && fraction >= 0.0 && min >= 0.0 && fraction + min > 0.0
            }
        }
    }
}

/// One rigidly moving body part.
///
/// Limbs and the head have two defining joints and an anchor; the torso has
/// four (`[l_shoulder, r_shoulder, l_hip, r_hip]` order) and no anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct PartDefinition {
    pub name: String,
    pub joints: Vec<String>,
    pub anchor: Option<Anchor>,
    pub radius: RadiusRule,
}

impl PartDefinition {
    /// Segments whose capsules make up this part, in joint-name form.
    ///
    /// A four-joint part is the union of the two side segments (0-2, 1-3)
    /// and the two cross segments (0-1, 2-3).
    pub fn segments(&self) -> Vec<(&str, &str)> {
        let j = &self.joints;
        match j.len() {
            2 => vec![(j[0].as_str(), j[1].as_str())],
            _ => vec![
                (j[0].as_str(), j[2].as_str()),
                (j[1].as_str(), j[3].as_str()),
                (j[0].as_str(), j[1].as_str()),
                (j[2].as_str(), j[3].as_str()),
            ],
        }
    }

    /// Bone length driving the radius rule: the segment length for a
    /// two-joint part, the mean side length for a four-joint part.
    pub fn bone_length(&self, pose: &Pose) -> Result<f64> {
        let j = &self.joints;
        if j.len() == 2 {
            Ok((pose.joint(&j[0])? - pose.joint(&j[1])?).norm())
        } else {
            let left = (pose.joint(&j[0])? - pose.joint(&j[2])?).norm();
            let right = (pose.joint(&j[1])? - pose.joint(&j[3])?).norm();
            Ok(0.5 * (left + right))
        }
    }

    pub fn radius_for(&self, pose: &Pose) -> Result<f64> {
        Ok(self.radius.radius(self.bone_length(pose)?))
    }

    fn referenced_joints(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.joints.iter().map(String::as_str).collect();
        if let Some(a) = &self.anchor {
            names.extend(a.joint_names());
        }
        names
    }
}

/// Joint set plus exactly ten part definitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonConfig {
    joint_names: Vec<String>,
    parts: Vec<PartDefinition>,
}

pub const PART_COUNT: usize = 10;

impl SkeletonConfig {
    pub fn new(joint_names: Vec<String>, parts: Vec<PartDefinition>) -> Result<Self> {
        if parts.len() != PART_COUNT {
            return Err(Error::Skeleton(format!(
                "expected {PART_COUNT} parts, got {}",
                parts.len()
            )));
        }
        for (i, name) in joint_names.iter().enumerate() {
            if joint_names[..i].contains(name) {
                return Err(Error::DuplicateJoint(name.clone()));
            }
        }
        for (i, part) in parts.iter().enumerate() {
            if parts[..i].iter().any(|p| p.name == part.name) {
                return Err(Error::Skeleton(format!("duplicate part `{}`", part.name)));
            }
            match (part.joints.len(), &part.anchor) {
                (2, Some(_)) | (4, None) => {}
                (2, None) => {
                    return Err(Error::Skeleton(format!(
                        "two-joint part `{}` needs an anchor",
                        part.name
                    )))
                }
                (4, Some(_)) => {
                    return Err(Error::Skeleton(format!(
                        "four-joint part `{}` must not have an anchor",
                        part.name
                    )))
                }
                (n, _) => {
                    return Err(Error::Skeleton(format!(
                        "part `{}` has {n} joints, expected 2 or 4",
                        part.name
                    )))
                }
            }
            if !part.radius.validate() {
                return Err(Error::Skeleton(format!("part `{}` has an invalid radius", part.name)));
            }
            for j in part.referenced_joints() {
                if !joint_names.iter().any(|n| n == j) {
                    return Err(Error::MissingJoint(j.to_string()));
                }
            }
        }
        Ok(Self { joint_names, parts })
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn parts(&self) -> &[PartDefinition] {
        &self.parts
    }

    pub fn part(&self, name: &str) -> Option<&PartDefinition> {
        self.parts.iter().find(|p| p.name == name)
    }

    /// Same skeleton with every radius rule multiplied by `s`.
    pub fn with_radius_scale(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Parameter(format!("radius scale must be positive, got {s}")));
        }
        let parts = self
            .parts
            .iter()
            .map(|p| PartDefinition {
                radius: p.radius.scaled(s),
                ..p.clone()
            })
            .collect();
        Ok(Self {
            joint_names: self.joint_names.clone(),
            parts,
        })
    }
}

pub const DEFAULT_JOINTS: [&str; 14] = [
    "head_top",
    "neck",
    "l_shoulder",
    "r_shoulder",
    "l_elbow",
    "r_elbow",
    "l_wrist",
    "r_wrist",
    "l_hip",
    "r_hip",
    "l_knee",
    "r_knee",
    "l_ankle",
    "r_ankle",
];

/// The 14-joint, ten-part skeleton.
///
/// Distal limb segments anchor at the proximal end of their chain (lower arm
/// at the shoulder, lower leg at the hip); proximal segments anchor at the
/// distal end (upper arm at the wrist, upper leg at the ankle); the head
/// anchors at the shoulder midpoint.
pub fn default_skeleton() -> SkeletonConfig {
    fn limb(name: &str, a: &str, b: &str, anchor: &str) -> PartDefinition {
        PartDefinition {
            name: name.to_string(),
            joints: vec![a.to_string(), b.to_string()],
            anchor: Some(Anchor::Joint(anchor.to_string())),
            radius: RadiusRule::DEFAULT,
        }
    }
    let parts = vec![
        PartDefinition {
            name: "head".to_string(),
            joints: vec!["neck".to_string(), "head_top".to_string()],
            anchor: Some(Anchor::Midpoint("l_shoulder".to_string(), "r_shoulder".to_string())),
            radius: RadiusRule::DEFAULT,
        },
        PartDefinition {
            name: "torso".to_string(),
            joints: ["l_shoulder", "r_shoulder", "l_hip", "r_hip"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            anchor: None,
            radius: RadiusRule::DEFAULT,
        },
        limb("l_upper_arm", "l_shoulder", "l_elbow", "l_wrist"),
        limb("r_upper_arm", "r_shoulder", "r_elbow", "r_wrist"),
        limb("l_lower_arm", "l_elbow", "l_wrist", "l_shoulder"),
        limb("r_lower_arm", "r_elbow", "r_wrist", "r_shoulder"),
        limb("l_upper_leg", "l_hip", "l_knee", "l_ankle"),
        limb("r_upper_leg", "r_hip", "r_knee", "r_ankle"),
        limb("l_lower_leg", "l_knee", "l_ankle", "l_hip"),
        limb("r_lower_leg", "r_knee", "r_ankle", "r_hip"),
    ];
    SkeletonConfig::new(DEFAULT_JOINTS.iter().map(|s| s.to_string()).collect(), parts)
        .expect("default skeleton is valid")
}

/// Point pairs used to fit one part's transform: defining joints first, then
/// the anchor for two-joint parts. Source points come from `input`, targets
/// from `target`.
pub fn correspondences(part: &PartDefinition, input: &Pose, target: &Pose) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    if input.space() != target.space() {
        return Err(Error::Space("matching"));
    }
    let mut src = Vec::with_capacity(part.joints.len() + 1);
    let mut dst = Vec::with_capacity(part.joints.len() + 1);
    for name in &part.joints {
        src.push(input.joint(name)?);
        dst.push(target.joint(name)?);
    }
    if part.joints.len() == 2 {
        if let Some(anchor) = &part.anchor {
            src.push(anchor.resolve(input)?);
            dst.push(anchor.resolve(target)?);
        }
    }
    Ok((src, dst))
}
