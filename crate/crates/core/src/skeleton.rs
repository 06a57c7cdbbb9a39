//! 17-joint body convention (the first 17 joints of the OpenPose BODY_25 layout).
//!
//! Joints 15 and 16 are the eyes and are used as the pupil pair for scale
//! normalization; joint 8 is the mid-hip and serves as the pelvis.

use serde::{Deserialize, Serialize};

pub const NUM_JOINTS: usize = 17;

pub const NOSE: usize = 0;
pub const NECK: usize = 1;
pub const RIGHT_SHOULDER: usize = 2;
pub const RIGHT_ELBOW: usize = 3;
pub const RIGHT_WRIST: usize = 4;
pub const LEFT_SHOULDER: usize = 5;
pub const LEFT_ELBOW: usize = 6;
pub const LEFT_WRIST: usize = 7;
pub const PELVIS: usize = 8;
pub const RIGHT_HIP: usize = 9;
pub const RIGHT_KNEE: usize = 10;
pub const RIGHT_ANKLE: usize = 11;
pub const LEFT_HIP: usize = 12;
pub const LEFT_KNEE: usize = 13;
pub const LEFT_ANKLE: usize = 14;
pub const RIGHT_PUPIL: usize = 15;
pub const LEFT_PUPIL: usize = 16;

pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "nose",
    "neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "pelvis",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_eye",
    "left_eye",
];

/// Word looked up in the embedding table for each joint's part set.
/// Left and right sides share a word.
pub const PART_WORDS: [&str; NUM_JOINTS] = [
    "head", "neck", "shoulder", "elbow", "hand", "shoulder", "elbow", "hand", "pelvis", "hip", "knee", "foot", "hip",
    "knee", "foot", "eye", "eye",
];

/// Image-space joint, serialized as `[u, v, vis]` with `vis > 0` meaning visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Joint2D {
    pub u: f64,
    pub v: f64,
    pub visible: bool,
}

impl Joint2D {
    pub fn visible(u: f64, v: f64) -> Self {
        Self { u, v, visible: true }
    }

    pub fn hidden() -> Self {
        Self {
            u: 0.0,
            v: 0.0,
            visible: false,
        }
    }
}

impl From<[f64; 3]> for Joint2D {
    fn from(a: [f64; 3]) -> Self {
        Self {
            u: a[0],
            v: a[1],
            visible: a[2] > 0.0,
        }
    }
}

impl From<Joint2D> for [f64; 3] {
    fn from(j: Joint2D) -> Self {
        [j.u, j.v, if j.visible { 1.0 } else { 0.0 }]
    }
}

/// 17 body joints in image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pose2D {
    pub joints: Vec<Joint2D>,
}

impl Pose2D {
    pub fn new(joints: Vec<Joint2D>) -> crate::Result<Self> {
        if joints.len() != NUM_JOINTS {
            return Err(crate::Error::dim("pose joints", NUM_JOINTS, joints.len()));
        }
        Ok(Self { joints })
    }

    pub fn from_points(points: &[(f64, f64)]) -> crate::Result<Self> {
        Self::new(points.iter().map(|&(u, v)| Joint2D::visible(u, v)).collect())
    }

    pub fn visible_count(&self) -> usize {
        self.joints.iter().filter(|j| j.visible).count()
    }
}
