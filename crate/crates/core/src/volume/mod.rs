//! Normalized 3D human-object configuration volume.
//!
//! A volume holds 916 body points followed by 312 points on the object
//! sphere surface, expressed in a body-centric frame: pelvis at the origin,
//! gravity along -z, the shoulder line along +x and unit pupil distance.

mod io;
mod pca;
mod semantics;

pub use io::{read_ply_points, read_volume, write_volume, PlyPoints, VolumeFormat};
pub use pca::{pca_reduce, Pca};
pub use semantics::{pair_semantics, pair_semantics_with, EmbeddingTable, ReducedEmbeddings};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, SphereEstimate};
use crate::skeleton;

pub const BODY_POINTS: usize = 916;
pub const SPHERE_POINTS: usize = 312;
pub const VOLUME_POINTS: usize = BODY_POINTS + SPHERE_POINTS;
/// 17 part sets plus the object set.
pub const NUM_SETS: usize = skeleton::NUM_JOINTS + 1;

/// Camera-frame gravity used when a detection carries none (y points down).
pub const DEFAULT_GRAVITY: [f64; 3] = [0.0, 1.0, 0.0];

/// Set membership of a volume point: 1..=17 for body parts, 18 for the object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PartLabel(u8);

impl PartLabel {
    pub const OBJECT: PartLabel = PartLabel(NUM_SETS as u8);

    pub fn body(joint: usize) -> Self {
        assert!(joint < skeleton::NUM_JOINTS, "joint index {joint} out of range");
        PartLabel(joint as u8 + 1)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// Zero-based set index in `0..18`.
    pub fn set_index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn joint(self) -> Option<usize> {
        (self != Self::OBJECT).then(|| self.set_index())
    }

    pub fn is_object(self) -> bool {
        self == Self::OBJECT
    }
}

impl TryFrom<u8> for PartLabel {
    type Error = Error;

    fn try_from(id: u8) -> Result<Self> {
        if (1..=NUM_SETS as u8).contains(&id) {
            Ok(PartLabel(id))
        } else {
            Err(Error::InvalidArgument(format!(
                "part label {id} outside 1..={NUM_SETS}"
            )))
        }
    }
}

impl From<PartLabel> for u8 {
    fn from(l: PartLabel) -> u8 {
        l.0
    }
}

/// Recovered body in the camera frame: mesh vertices plus the 17 joints.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPoints {
    pub vertices: Vec<Point3>,
    pub joints3d: Vec<Point3>,
}

impl BodyPoints {
    pub fn new(vertices: Vec<Point3>, joints3d: Vec<Point3>) -> Result<Self> {
        if vertices.len() < BODY_POINTS {
            return Err(Error::TooFewPoints {
                needed: BODY_POINTS,
                got: vertices.len(),
            });
        }
        if joints3d.len() != skeleton::NUM_JOINTS {
            return Err(Error::dim("joints3d", skeleton::NUM_JOINTS, joints3d.len()));
        }
        if !joints3d
            .iter()
            .chain(&vertices)
            .all(|p| p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::NonFinite("body points".into()));
        }
        Ok(Self { vertices, joints3d })
    }
}

/// Indices of `n` points chosen by farthest-point sampling. The seed picks the
/// starting vertex; later picks maximize the distance to the chosen set, with
/// ties going to the lowest index.
pub fn farthest_point_indices(points: &[Point3], n: usize, seed: u64) -> Result<Vec<usize>> {
    if points.len() < n {
        return Err(Error::TooFewPoints {
            needed: n,
            got: points.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(n);
    let mut min_d2 = vec![f64::INFINITY; points.len()];
    let mut next = rng.gen_range(0..points.len());
    for _ in 0..n {
        chosen.push(next);
        let p = points[next];
        min_d2[next] = f64::NEG_INFINITY;
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, q) in points.iter().enumerate() {
            let d = &mut min_d2[i];
            if *d != f64::NEG_INFINITY {
                *d = d.min((q - p).norm_squared());
            }
            if *d > best.0 {
                best = (*d, i);
            }
        }
        next = best.1;
    }
    Ok(chosen)
}

pub fn downsample_body(body: &BodyPoints, n: usize, seed: u64) -> Result<Vec<Point3>> {
    Ok(farthest_point_indices(&body.vertices, n, seed)?
        .into_iter()
        .map(|i| body.vertices[i])
        .collect())
}

/// Uniform samples on the sphere surface (normalized Gaussian directions).
pub fn sample_sphere_surface(est: &SphereEstimate, n: usize, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let d = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let norm = d.norm();
        if norm < 1e-12 {
            continue;
        }
        out.push(est.center + est.radius * (d / norm));
    }
    out
}

/// Similarity transform into the normalized volume frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub pelvis: Point3,
    pub rotation: Matrix3<f64>,
    pub scale: f64,
}

impl Normalization {
    /// Gravity maps to -z exactly; the shoulder line (right to left) is
    /// rotated about z onto +x. When the shoulders are not perpendicular to
    /// gravity only their horizontal component can be aligned.
    pub fn from_joints(joints: &[Point3], gravity: &Vector3<f64>) -> Result<Self> {
        if joints.len() != skeleton::NUM_JOINTS {
            return Err(Error::dim("joints3d", skeleton::NUM_JOINTS, joints.len()));
        }
        let g_norm = gravity.norm();
        if !(g_norm > 1e-12) || !g_norm.is_finite() {
            return Err(Error::DegenerateFrame("gravity vector is zero".into()));
        }
        let z_axis = -gravity / g_norm;

        let shoulder = joints[skeleton::LEFT_SHOULDER] - joints[skeleton::RIGHT_SHOULDER];
        let s_norm = shoulder.norm();
        if !(s_norm > 1e-12) {
            return Err(Error::DegenerateFrame("shoulder joints coincide".into()));
        }
        let horizontal = shoulder - shoulder.dot(&z_axis) * z_axis;
        let h_norm = horizontal.norm();
        if h_norm <= 1e-9 * s_norm {
            return Err(Error::DegenerateFrame("shoulder line is parallel to gravity".into()));
        }
        let x_axis = horizontal / h_norm;
        let y_axis = z_axis.cross(&x_axis);
        let rotation = Matrix3::from_rows(&[x_axis.transpose(), y_axis.transpose(), z_axis.transpose()]);

        let pupil = (joints[skeleton::LEFT_PUPIL] - joints[skeleton::RIGHT_PUPIL]).norm();
        if !(pupil > 1e-12) {
            return Err(Error::DegenerateFrame("pupil joints coincide".into()));
        }
        Ok(Self {
            pelvis: joints[skeleton::PELVIS],
            rotation,
            scale: 1.0 / pupil,
        })
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation * (p - self.pelvis) * self.scale
    }

    pub fn apply_all(&self, pts: &[Point3]) -> Vec<Point3> {
        pts.iter().map(|p| self.apply(p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedVolume {
    pub body: Vec<Point3>,
    pub sphere: Vec<Point3>,
    pub joints: Vec<Point3>,
    pub transform: Normalization,
}

pub fn align_and_normalize(
    body: &[Point3],
    sphere: &[Point3],
    joints3d: &[Point3],
    gravity: &Vector3<f64>,
) -> Result<AlignedVolume> {
    let t = Normalization::from_joints(joints3d, gravity)?;
    Ok(AlignedVolume {
        body: t.apply_all(body),
        sphere: t.apply_all(sphere),
        joints: t.apply_all(joints3d),
        transform: t,
    })
}

/// Label the first `num_body` points by their nearest joint (lowest index on
/// ties) and the rest as object points.
pub fn assign_part_sets(points: &[Point3], num_body: usize, joints: &[Point3]) -> Vec<PartLabel> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i >= num_body {
                return PartLabel::OBJECT;
            }
            let mut best = (f64::INFINITY, 0);
            for (j, q) in joints.iter().enumerate() {
                let d = (p - q).norm_squared();
                if d < best.0 {
                    best = (d, j);
                }
            }
            PartLabel::body(best.1)
        })
        .collect()
}

/// Point indices grouped by set, ordered by set index.
pub fn partition(labels: &[PartLabel]) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); NUM_SETS];
    for (i, l) in labels.iter().enumerate() {
        sets[l.set_index()].push(i);
    }
    sets
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationVolume {
    pub object_category: String,
    pub points: Vec<Point3>,
    pub labels: Vec<PartLabel>,
    pub joints: Vec<Point3>,
    /// One embedding per set (17 parts, then the object), once paired.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantics: Option<Vec<Vec<f64>>>,
}

impl ConfigurationVolume {
    pub fn sets(&self) -> Vec<Vec<usize>> {
        partition(&self.labels)
    }

    pub fn body_points(&self) -> &[Point3] {
        &self.points[..BODY_POINTS.min(self.points.len())]
    }

    pub fn sphere_points(&self) -> &[Point3] {
        &self.points[BODY_POINTS.min(self.points.len())..]
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != VOLUME_POINTS {
            return Err(Error::dim("volume points", VOLUME_POINTS, self.points.len()));
        }
        if self.labels.len() != self.points.len() {
            return Err(Error::dim("volume labels", self.points.len(), self.labels.len()));
        }
        let objects = self.labels.iter().filter(|l| l.is_object()).count();
        if objects != SPHERE_POINTS {
            return Err(Error::dim("object points", SPHERE_POINTS, objects));
        }
        if let Some(sem) = &self.semantics {
            if sem.len() != NUM_SETS {
                return Err(Error::dim("set semantics", NUM_SETS, sem.len()));
            }
        }
        Ok(())
    }
}

/// Seeds for the body and sphere samplers derived from one volume seed.
fn split_seed(seed: u64) -> (u64, u64) {
    (seed, seed ^ 0x9e37_79b9_7f4a_7c15)
}

/// Down-sample the body, sample the sphere, normalize and label.
pub fn build_volume(
    body: &BodyPoints,
    sphere: &SphereEstimate,
    object_category: &str,
    gravity: &Vector3<f64>,
    seed: u64,
) -> Result<ConfigurationVolume> {
    if !(sphere.radius > 0.0) {
        return Err(Error::InvalidArgument(format!("sphere radius {}", sphere.radius)));
    }
    let (body_seed, sphere_seed) = split_seed(seed);
    let body916 = downsample_body(body, BODY_POINTS, body_seed)?;
    let t = Normalization::from_joints(&body.joints3d, gravity)?;
    // Sample in the normalized frame so the volume does not depend on the
    // camera orientation.
    let sphere_n = SphereEstimate {
        center: t.apply(&sphere.center),
        radius: sphere.radius * t.scale,
        clamped: sphere.clamped,
    };
    let joints = t.apply_all(&body.joints3d);

    let mut points = t.apply_all(&body916);
    points.extend(sample_sphere_surface(&sphere_n, SPHERE_POINTS, sphere_seed));
    let labels = assign_part_sets(&points, BODY_POINTS, &joints);
    Ok(ConfigurationVolume {
        object_category: crate::priors::normalize_name(object_category),
        points,
        labels,
        joints,
        semantics: None,
    })
}
