//! Pinhole camera, tangent-plane sphere placement and depth regularization.
//!
//! Camera frame: x right, y down, z forward, optical center at the origin.
//! Every back-projected image line spans a plane through the origin, so the
//! sphere center solve is a homogeneous 3x3 linear system in the radius.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::{ObjectPrior, PriorTable};
use crate::skeleton;

pub type Point3 = Vector3<f64>;

pub const DEFAULT_FOCAL: f64 = 5000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub focal: f64,
    pub principal_point: (f64, f64),
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            focal: DEFAULT_FOCAL,
            principal_point: (0.0, 0.0),
        }
    }
}

impl Camera {
    pub fn new(focal: f64, principal_point: (f64, f64)) -> Result<Self> {
        if !(focal.is_finite() && focal > 0.0) {
            return Err(Error::InvalidArgument(format!("focal must be positive, got {focal}")));
        }
        Ok(Self { focal, principal_point })
    }

    /// Default focal length with the principal point at the image center.
    pub fn for_image(width: f64, height: f64) -> Self {
        Self {
            focal: DEFAULT_FOCAL,
            principal_point: (width / 2.0, height / 2.0),
        }
    }

    pub fn project(&self, p: &Point3) -> Result<(f64, f64)> {
        if !(p.z > 0.0) {
            return Err(Error::NonPositiveDepth(p.z));
        }
        let (cx, cy) = self.principal_point;
        Ok((self.focal * p.x / p.z + cx, self.focal * p.y / p.z + cy))
    }
}

pub fn project_point(cam: &Camera, p: &Point3) -> Result<(f64, f64)> {
    cam.project(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Box2D {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl Box2D {
    pub fn new(u_min: f64, v_min: f64, u_max: f64, v_max: f64) -> Result<Self> {
        let b = Self {
            u_min,
            v_min,
            u_max,
            v_max,
        };
        if ![u_min, v_min, u_max, v_max].iter().all(|x| x.is_finite()) {
            return Err(Error::DegenerateBox(format!("non-finite coordinates {b:?}")));
        }
        if !(u_min < u_max && v_min < v_max) {
            return Err(Error::DegenerateBox(format!(
                "[{u_min}, {v_min}, {u_max}, {v_max}] has no area"
            )));
        }
        Ok(b)
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.u_min + self.u_max) / 2.0, (self.v_min + self.v_max) / 2.0)
    }

    pub fn union(&self, other: &Box2D) -> Box2D {
        Box2D {
            u_min: self.u_min.min(other.u_min),
            v_min: self.v_min.min(other.v_min),
            u_max: self.u_max.max(other.u_max),
            v_max: self.v_max.max(other.v_max),
        }
    }

    pub fn translated(&self, du: f64, dv: f64) -> Box2D {
        Box2D {
            u_min: self.u_min + du,
            v_min: self.v_min + dv,
            u_max: self.u_max + du,
            v_max: self.v_max + dv,
        }
    }
}

impl TryFrom<[f64; 4]> for Box2D {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Box2D::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Box2D> for [f64; 4] {
    fn from(b: Box2D) -> Self {
        [b.u_min, b.v_min, b.u_max, b.v_max]
    }
}

/// Depth extremes and scale of a recovered body, all in the camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BodySummary {
    pub joints3d: Vec<Point3>,
    pub z_min: f64,
    pub z_max: f64,
    pub shoulder_width: f64,
}

impl BodySummary {
    /// Depth extremes over the mesh vertices, shoulder width from the joints.
    pub fn from_body(joints3d: &[Point3], vertices: &[Point3]) -> Result<Self> {
        if joints3d.len() != skeleton::NUM_JOINTS {
            return Err(Error::dim("joints3d", skeleton::NUM_JOINTS, joints3d.len()));
        }
        if vertices.is_empty() {
            return Err(Error::TooFewPoints { needed: 1, got: 0 });
        }
        let (z_min, z_max) = vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.z), hi.max(p.z))
        });
        let shoulder_width = (joints3d[skeleton::LEFT_SHOULDER] - joints3d[skeleton::RIGHT_SHOULDER]).norm();
        Self::new(joints3d.to_vec(), z_min, z_max, shoulder_width)
    }

    pub fn new(joints3d: Vec<Point3>, z_min: f64, z_max: f64, shoulder_width: f64) -> Result<Self> {
        if !(z_min <= z_max) {
            return Err(Error::InvalidArgument(format!("z_min {z_min} > z_max {z_max}")));
        }
        if !(shoulder_width > 0.0 && shoulder_width.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "shoulder width must be positive, got {shoulder_width}"
            )));
        }
        Ok(Self {
            joints3d,
            z_min,
            z_max,
            shoulder_width,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clamped {
    None,
    ToMin,
    ToMax,
}

impl Clamped {
    pub fn as_str(&self) -> &'static str {
        match self {
            Clamped::None => "none",
            Clamped::ToMin => "to_min",
            Clamped::ToMax => "to_max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereEstimate {
    pub center: Point3,
    pub radius: f64,
    pub clamped: Clamped,
}

/// Place a sphere of radius `r` so that it is tangent to the planes
/// back-projected from the box top and bottom edges and its center lies on the
/// plane back-projected from the vertical line through the box's mid-column.
pub fn solve_sphere_center(cam: &Camera, bbox: &Box2D, r: f64) -> Result<Point3> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if !(bbox.v_min < bbox.v_max) {
        return Err(Error::DegenerateBox(format!(
            "v_min {} >= v_max {}",
            bbox.v_min, bbox.v_max
        )));
    }
    let f = cam.focal;
    let (cx, cy) = cam.principal_point;
    let u_mid = (bbox.u_min + bbox.u_max) / 2.0;

    let n_mid = Vector3::new(f, 0.0, -(u_mid - cx));
    let n_top = Vector3::new(0.0, f, -(bbox.v_min - cy));
    let n_bot = Vector3::new(0.0, f, -(bbox.v_max - cy));

    let system = Matrix3::from_rows(&[n_mid.transpose(), n_top.transpose(), n_bot.transpose()]);
    let lu = system.lu();
    if !lu.is_invertible() {
        return Err(Error::SingularSystem(format!("box {bbox:?}")));
    }

    // Tangency fixes |n.O| / |n| = r for both edge planes; the signs pick
    // which side of each plane the sphere sits on. Accept the first choice
    // that keeps the sphere in front of the camera and between both planes,
    // which is exactly "silhouette spans the box".
    for (s_top, s_bot) in [(1.0, -1.0), (-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0)] {
        let rhs = Vector3::new(0.0, s_top * r * n_top.norm(), s_bot * r * n_bot.norm());
        let Some(center) = lu.solve(&rhs) else {
            continue;
        };
        if center.z > 0.0 && n_top.dot(&center) >= 0.0 && n_bot.dot(&center) <= 0.0 {
            return Ok(center);
        }
    }
    Err(Error::NonPositiveDepth(f64::NAN))
}

pub fn estimate_radius(prior: &ObjectPrior, body: &BodySummary, human_box: &Box2D, object_box: &Box2D) -> Result<f64> {
    if !(body.shoulder_width > 0.0) {
        return Err(Error::InvalidArgument("shoulder width must be positive".into()));
    }
    let base = prior.ratio * body.shoulder_width;
    if !prior.box_ratio_mode {
        return Ok(base);
    }
    let (dh, d_o) = (human_box.diagonal(), object_box.diagonal());
    if !(dh > 0.0 && d_o > 0.0) {
        return Err(Error::DegenerateBox("zero diagonal in box-ratio mode".into()));
    }
    Ok(base * d_o / dh)
}

/// Depth interval `[gamma_min * z_min, gamma_max * z_max]` for a prior and body.
pub fn depth_interval(prior: &ObjectPrior, body: &BodySummary) -> Result<(f64, f64)> {
    let lo = prior.gamma_min * body.z_min;
    let hi = prior.gamma_max * body.z_max;
    if lo > hi {
        return Err(Error::EmptyDepthInterval { lo, hi });
    }
    Ok((lo, hi))
}

/// Move the sphere depth to the nearer interval bound when it falls outside.
/// Inside the interval the estimate is returned untouched, so the operation is
/// idempotent.
pub fn regularize_depth(est: &SphereEstimate, prior: &ObjectPrior, body: &BodySummary) -> Result<SphereEstimate> {
    if !(body.z_min <= body.z_max) {
        return Err(Error::InvalidArgument(format!(
            "z_min {} > z_max {}",
            body.z_min, body.z_max
        )));
    }
    let (lo, hi) = depth_interval(prior, body)?;
    let z = est.center.z;
    let mut out = *est;
    if z < lo {
        out.center.z = lo;
        out.clamped = Clamped::ToMin;
    } else if z > hi {
        out.center.z = hi;
        out.clamped = Clamped::ToMax;
    }
    Ok(out)
}

pub fn estimate_sphere(
    cam: &Camera,
    human_box: &Box2D,
    object_box: &Box2D,
    category: &str,
    priors: &PriorTable,
    body: &BodySummary,
) -> Result<SphereEstimate> {
    let prior = priors.lookup(category)?;
    let radius = estimate_radius(prior, body, human_box, object_box)?;
    let center = solve_sphere_center(cam, object_box, radius)?;
    let est = SphereEstimate {
        center,
        radius,
        clamped: Clamped::None,
    };
    regularize_depth(&est, prior, body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Dense near-uniform sphere sampling, independent of the volume sampler.
    fn fibonacci_sphere(center: &Point3, r: f64, n: usize) -> Vec<Point3> {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let rad = (1.0 - y * y).sqrt();
                let th = golden * i as f64;
                center + r * Vector3::new(rad * th.cos(), y, rad * th.sin())
            })
            .collect()
    }

    fn silhouette_extent(cam: &Camera, center: &Point3, r: f64) -> (f64, f64, f64, f64) {
        let mut ext = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in fibonacci_sphere(center, r, 20_000) {
            let (u, v) = cam.project(&p).unwrap();
            ext = (ext.0.min(u), ext.1.min(v), ext.2.max(u), ext.3.max(v));
        }
        ext
    }

    fn body(z_min: f64, z_max: f64, shoulder: f64) -> BodySummary {
        BodySummary::new(vec![Point3::zeros(); 17], z_min, z_max, shoulder).unwrap()
    }

    fn prior(ratio: f64, g: (f64, f64), box_mode: bool) -> ObjectPrior {
        ObjectPrior {
            category: "thing".into(),
            ratio,
            gamma_min: g.0,
            gamma_max: g.1,
            box_ratio_mode: box_mode,
        }
    }

    #[test]
    fn projection_examples() {
        let cam = Camera::new(5000.0, (0.0, 0.0)).unwrap();
        assert_eq!(cam.project(&Point3::new(0.0, 0.0, 10.0)).unwrap(), (0.0, 0.0));
        assert_eq!(cam.project(&Point3::new(1.0, 0.0, 5000.0)).unwrap(), (1.0, 0.0));
        let cam = Camera::new(5000.0, (320.0, 240.0)).unwrap();
        let (u, v) = cam.project(&Point3::new(0.1, -0.2, 2.0)).unwrap();
        assert_relative_eq!(u, 570.0, epsilon = 1e-9);
        assert_relative_eq!(v, -260.0, epsilon = 1e-9);
        assert!(matches!(
            cam.project(&Point3::new(0.0, 0.0, 0.0)),
            Err(Error::NonPositiveDepth(_))
        ));
        assert!(Camera::new(0.0, (0.0, 0.0)).is_err());
    }

    #[test]
    fn symmetric_box_centers_on_axis() {
        let cam = Camera::default();
        let b = Box2D::new(-50.0, -100.0, 50.0, 100.0).unwrap();
        let c = solve_sphere_center(&cam, &b, 0.5).unwrap();
        assert_eq!(c.x, 0.0);
        assert!(c.y.abs() < 1e-12);
        assert!(c.z > 0.0);
        // the unit analysis: half-height 100px at f=5000 subtends r/z ~ 0.02
        assert_relative_eq!(
            c.z,
            0.5 * (1.0f64 + (5000.0f64 / 100.0).powi(2)).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn silhouette_spans_box() {
        let cam = Camera::default();
        let b = Box2D::new(-50.0, -100.0, 50.0, 100.0).unwrap();
        let c = solve_sphere_center(&cam, &b, 0.5).unwrap();
        let (_, vmin, _, vmax) = silhouette_extent(&cam, &c, 0.5);
        assert!((vmin + 100.0).abs() < 0.5, "{vmin}");
        assert!((vmax - 100.0).abs() < 0.5, "{vmax}");

        let cam = Camera::new(5000.0, (320.0, 240.0)).unwrap();
        let b = Box2D::new(400.0, 100.0, 470.0, 180.0).unwrap();
        let c = solve_sphere_center(&cam, &b, 0.2).unwrap();
        let (umin, vmin, umax, vmax) = silhouette_extent(&cam, &c, 0.2);
        assert!((vmin - 100.0).abs() < 0.5 && (vmax - 180.0).abs() < 0.5);
        assert!(((umin + umax) / 2.0 - 435.0).abs() < 0.5);
    }

    #[test]
    fn center_is_linear_in_radius() {
        let cam = Camera::new(5000.0, (320.0, 240.0)).unwrap();
        let b = Box2D::new(100.0, 50.0, 220.0, 300.0).unwrap();
        let c1 = solve_sphere_center(&cam, &b, 0.3).unwrap();
        let c2 = solve_sphere_center(&cam, &b, 0.6).unwrap();
        assert_relative_eq!(c2.z, 2.0 * c1.z, max_relative = 1e-9);
        assert_relative_eq!(c2, 2.0 * c1, max_relative = 1e-9);
    }

    #[test]
    fn solve_rejects_bad_input() {
        let cam = Camera::default();
        let flat = Box2D {
            u_min: 0.0,
            v_min: 5.0,
            u_max: 10.0,
            v_max: 5.0,
        };
        assert!(matches!(
            solve_sphere_center(&cam, &flat, 1.0),
            Err(Error::DegenerateBox(_))
        ));
        let b = Box2D::new(0.0, 0.0, 10.0, 10.0).unwrap();
        assert!(solve_sphere_center(&cam, &b, 0.0).is_err());
        assert!(Box2D::new(5.0, 0.0, 5.0, 1.0).is_err());
    }

    #[test]
    fn radius_examples() {
        let b = body(1.0, 2.0, 0.4);
        let h = Box2D::new(0.0, 0.0, 30.0, 40.0).unwrap();
        let o = Box2D::new(0.0, 0.0, 3.0, 4.0).unwrap();
        assert_relative_eq!(
            estimate_radius(&prior(0.205, (1.0, 1.0), false), &b, &h, &o).unwrap(),
            0.082,
            epsilon = 1e-15
        );
        let unit = body(1.0, 2.0, 1.0);
        assert_eq!(
            estimate_radius(&prior(1.0, (1.0, 1.0), false), &unit, &h, &o).unwrap(),
            1.0
        );
        assert_eq!(
            estimate_radius(&prior(1.0, (1.0, 1.0), true), &unit, &h, &h).unwrap(),
            1.0
        );
        assert_relative_eq!(
            estimate_radius(&prior(1.0, (1.0, 1.0), true), &unit, &h, &o).unwrap(),
            0.1,
            epsilon = 1e-15
        );
    }

    #[test]
    fn depth_clamping() {
        let p = prior(1.0, (1.0, 1.0), false);
        let b = body(1.0, 3.0, 0.4);
        let est = |z| SphereEstimate {
            center: Point3::new(0.1, -0.2, z),
            radius: 0.5,
            clamped: Clamped::None,
        };
        assert_eq!(regularize_depth(&est(2.0), &p, &b).unwrap(), est(2.0));
        let hi = regularize_depth(&est(5.0), &p, &b).unwrap();
        assert_eq!((hi.center.z, hi.clamped), (3.0, Clamped::ToMax));
        assert_eq!((hi.center.x, hi.center.y), (0.1, -0.2));
        let lo = regularize_depth(&est(0.2), &p, &b).unwrap();
        assert_eq!((lo.center.z, lo.clamped), (1.0, Clamped::ToMin));
        assert_eq!(regularize_depth(&lo, &p, &b).unwrap(), lo);
        assert_eq!(regularize_depth(&hi, &p, &b).unwrap(), hi);

        let inverted = prior(1.0, (1.3, 0.7), false);
        let tight = body(2.0, 2.1, 0.4);
        assert!(matches!(
            regularize_depth(&est(2.0), &inverted, &tight),
            Err(Error::EmptyDepthInterval { .. })
        ));
    }

    #[test]
    fn pipeline_inside_interval_is_unclamped() {
        let cam = Camera::default();
        let table = PriorTable::bundled();
        // apple has gamma [1, 1]; choose a body whose depth span covers the solve
        let b = body(1.0, 30.0, 0.4);
        let h = Box2D::new(-200.0, -400.0, 200.0, 400.0).unwrap();
        let o = Box2D::new(-50.0, -100.0, 50.0, 100.0).unwrap();
        let est = estimate_sphere(&cam, &h, &o, "apple", &table, &b).unwrap();
        assert_eq!(est.clamped, Clamped::None);
        assert_relative_eq!(est.radius, 0.082, epsilon = 1e-15);
    }

    #[test]
    fn huge_object_clamps_to_max() {
        let cam = Camera::default();
        let table = PriorTable::bundled();
        let h = Box2D::new(-200.0, -400.0, 200.0, 400.0).unwrap();
        let o = Box2D::new(-20.0, -20.0, 20.0, 20.0).unwrap();
        for z in [2.0, 5.0, 10.0, 40.0] {
            let b = body(z - 0.3, z + 0.3, 0.4);
            let est = estimate_sphere(&cam, &h, &o, "train", &table, &b).unwrap();
            assert_eq!(est.clamped, Clamped::ToMax);
            assert_eq!(est.center.z, 1.0 * (z + 0.3));
        }
        assert!(matches!(
            estimate_sphere(&cam, &h, &o, "unicorn", &table, &body(1.0, 2.0, 0.4)),
            Err(Error::UnknownCategory(_))
        ));
    }

    #[test]
    fn body_summary_from_vertices() {
        let mut joints = vec![Point3::zeros(); 17];
        joints[skeleton::LEFT_SHOULDER] = Point3::new(0.2, 0.0, 3.0);
        joints[skeleton::RIGHT_SHOULDER] = Point3::new(-0.2, 0.0, 3.0);
        let verts = vec![Point3::new(0.0, 0.0, 2.5), Point3::new(0.0, 0.0, 3.4)];
        let s = BodySummary::from_body(&joints, &verts).unwrap();
        assert_eq!((s.z_min, s.z_max), (2.5, 3.4));
        assert_relative_eq!(s.shoulder_width, 0.4, epsilon = 1e-15);
    }

    #[test]
    fn box_json_is_array() {
        let b: Box2D = serde_json::from_str("[1, 2, 3, 4]").unwrap();
        assert_eq!(b.height(), 2.0);
        assert!(serde_json::from_str::<Box2D>("[3, 2, 1, 4]").is_err());
    }
}
