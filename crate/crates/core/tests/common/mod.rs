#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use hoi3d::geometry::Point3;
use hoi3d::skeleton::*;
use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Upright figure in body units: x to the figure's left, z up, pelvis at 0.
pub fn upright_joints() -> Vec<Point3> {
    let mut j = vec![Point3::zeros(); NUM_JOINTS];
    let mut set = |i: usize, x: f64, y: f64, z: f64| j[i] = Point3::new(x, y, z);
    set(NOSE, 0.0, 0.1, 5.2);
    set(NECK, 0.0, 0.0, 4.6);
    set(RIGHT_SHOULDER, -2.0, 0.0, 4.5);
    set(LEFT_SHOULDER, 2.0, 0.0, 4.5);
    set(RIGHT_ELBOW, -2.4, 0.0, 2.6);
    set(LEFT_ELBOW, 2.4, 0.0, 2.6);
    set(RIGHT_WRIST, -2.5, 0.5, 1.0);
    set(LEFT_WRIST, 2.5, 0.5, 1.0);
    set(PELVIS, 0.0, 0.0, 0.0);
    set(RIGHT_HIP, -1.0, 0.0, -0.2);
    set(LEFT_HIP, 1.0, 0.0, -0.2);
    set(RIGHT_KNEE, -1.1, 0.2, -4.0);
    set(LEFT_KNEE, 1.1, 0.2, -4.0);
    set(RIGHT_ANKLE, -1.1, 0.0, -8.0);
    set(LEFT_ANKLE, 1.1, 0.0, -8.0);
    set(RIGHT_PUPIL, -0.5, 0.3, 5.6);
    set(LEFT_PUPIL, 0.5, 0.3, 5.6);
    j
}

const BONES: [(usize, usize); 14] = [
    (NOSE, NECK),
    (NECK, RIGHT_SHOULDER),
    (NECK, LEFT_SHOULDER),
    (RIGHT_SHOULDER, RIGHT_ELBOW),
    (RIGHT_ELBOW, RIGHT_WRIST),
    (LEFT_SHOULDER, LEFT_ELBOW),
    (LEFT_ELBOW, LEFT_WRIST),
    (NECK, PELVIS),
    (PELVIS, RIGHT_HIP),
    (PELVIS, LEFT_HIP),
    (RIGHT_HIP, RIGHT_KNEE),
    (RIGHT_KNEE, RIGHT_ANKLE),
    (LEFT_HIP, LEFT_KNEE),
    (LEFT_KNEE, LEFT_ANKLE),
];

/// A body in the camera frame (y down, z forward): joints plus `per_bone`
/// jittered surface points along every bone.
pub struct SyntheticBody {
    pub joints: Vec<Point3>,
    pub vertices: Vec<Point3>,
}

impl SyntheticBody {
    pub fn new(seed: u64, per_bone: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let yaw = rng.gen_range(-0.8..0.8);
        let scale = rng.gen_range(0.10..0.13);
        let offset = Vector3::new(
            rng.gen_range(-0.6..0.6),
            rng.gen_range(-0.2..0.2),
            rng.gen_range(4.0..8.0),
        );
        let turn = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
        let to_camera = |p: &Point3| {
            let q = turn * p * scale;
            Point3::new(q.x, -q.z, q.y) + offset
        };
        let body = upright_joints();
        let mut vertices = Vec::with_capacity(BONES.len() * per_bone);
        for &(a, b) in &BONES {
            for _ in 0..per_bone {
                let t: f64 = rng.gen();
                let p = body[a] + (body[b] - body[a]) * t;
                let jitter = Vector3::new(
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(-0.4..0.4),
                );
                vertices.push(to_camera(&(p + jitter)));
            }
        }
        Self {
            joints: body.iter().map(to_camera).collect(),
            vertices,
        }
    }

    pub fn z_range(&self) -> (f64, f64) {
        self.vertices
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.z), hi.max(p.z))
            })
    }
}

pub fn write_xyz(path: &Path, pts: &[Point3]) {
    let mut s = String::new();
    for p in pts {
        writeln!(s, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    std::fs::write(path, s).unwrap();
}

/// Pinhole projection with the principal point at `(cx, cy)`.
pub fn project(f: f64, cx: f64, cy: f64, p: &Point3) -> (f64, f64) {
    (f * p.x / p.z + cx, f * p.y / p.z + cy)
}
