//! C ABI over the `hoi3d` library.
//!
//! Every fallible function returns a [`Hoi3dStatus`]; on failure the message
//! is available from [`hoi3d_last_error`] on the same thread. Objects that
//! own memory are exposed as opaque handles and must be released with their
//! `_free` function. Array arguments are row-major `double` buffers whose
//! lengths are given explicitly.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use hoi3d::ambiguity::{monster_filter, procrustes_align};
use hoi3d::attention::{joint_attention, kl_divergence, AttentionMap};
use hoi3d::geometry::{estimate_sphere, BodySummary, Box2D, Camera, Clamped, Point3, SphereEstimate};
use hoi3d::losses::{bce_multilabel, fuse_scores, semantic_consistency, triplet_loss, SemanticMode};
use hoi3d::priors::{load_priors, PriorTable};
use hoi3d::skeleton::{Joint2D, Pose2D, NUM_JOINTS};
use hoi3d::volume::{build_volume, write_volume, BodyPoints, ConfigurationVolume, VolumeFormat, DEFAULT_GRAVITY};
use hoi3d::Error;
use nalgebra::Vector3;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hoi3dStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownCategory = 3,
    Io = 4,
    Parse = 5,
    Geometry = 6,
    DimensionMismatch = 7,
    Numeric = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hoi3dClamped {
    None = 0,
    ToMin = 1,
    ToMax = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hoi3dFormat {
    Ply = 0,
    Json = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hoi3dSemanticMode {
    PerClassAbs = 0,
    Squared = 1,
    VectorL2 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hoi3dBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hoi3dCamera {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hoi3dObjectPrior {
    pub ratio: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub box_ratio_mode: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hoi3dSphere {
    pub center: [f64; 3],
    pub radius: f64,
    pub clamped: Hoi3dClamped,
}

/// Opaque prior table.
pub struct Hoi3dPriorTable {
    inner: PriorTable,
}

/// Opaque configuration volume.
pub struct Hoi3dVolume {
    inner: ConfigurationVolume,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> Hoi3dStatus {
    match e {
        Error::Io { .. } => Hoi3dStatus::Io,
        Error::Parse { .. } | Error::Json(_) | Error::InvalidPrior { .. } | Error::Config(_) => Hoi3dStatus::Parse,
        Error::UnknownCategory(_) | Error::MissingEmbedding(_) => Hoi3dStatus::UnknownCategory,
        Error::NonPositiveDepth(_)
        | Error::DegenerateBox(_)
        | Error::SingularSystem(_)
        | Error::EmptyDepthInterval { .. }
        | Error::DegenerateFrame(_)
        | Error::TooFewJoints(_) => Hoi3dStatus::Geometry,
        Error::DimensionMismatch { .. } | Error::TooFewPoints { .. } => Hoi3dStatus::DimensionMismatch,
        Error::InfiniteKl { .. } | Error::NonFinite(_) => Hoi3dStatus::Numeric,
        _ => Hoi3dStatus::InvalidArgument,
    }
}

/// Run `f`, translating errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> Hoi3dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            Hoi3dStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            Hoi3dStatus::Panic
        }
    }
}

struct Fail(Hoi3dStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(Hoi3dStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn input<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn output<'a>(p: *mut f64, n: usize, name: &str) -> Result<&'a mut [f64], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts_mut(p, n))
}

/// Copy into an optional output buffer; null means "not requested".
unsafe fn maybe_write(p: *mut f64, src: &[f64]) {
    if !p.is_null() {
        ptr::copy_nonoverlapping(src.as_ptr(), p, src.len());
    }
}

unsafe fn cstr<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(Hoi3dStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, v: T, name: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(v);
    Ok(())
}

fn to_box(b: &Hoi3dBox) -> Result<Box2D, Fail> {
    Ok(Box2D::new(b.u_min, b.v_min, b.u_max, b.v_max)?)
}

fn points(flat: &[f64]) -> Vec<Point3> {
    flat.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn hoi3d_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hoi3d_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The 80-category table compiled into the library.
#[no_mangle]
pub unsafe extern "C" fn hoi3d_priors_bundled(out: *mut *mut Hoi3dPriorTable) -> Hoi3dStatus {
    guard(|| {
        let h = Box::into_raw(Box::new(Hoi3dPriorTable {
            inner: PriorTable::bundled(),
        }));
        write_out(out, h, "out").inspect_err(|_| drop(Box::from_raw(h)))
    })
}

/// Load and validate a prior table CSV.
#[no_mangle]
pub unsafe extern "C" fn hoi3d_priors_load(path: *const c_char, out: *mut *mut Hoi3dPriorTable) -> Hoi3dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let table = load_priors(Path::new(cstr(path, "path")?))?;
        out.write(Box::into_raw(Box::new(Hoi3dPriorTable { inner: table })));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hoi3d_priors_free(table: *mut Hoi3dPriorTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Number of categories, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn hoi3d_priors_len(table: *const Hoi3dPriorTable) -> usize {
    table.as_ref().map_or(0, |t| t.inner.len())
}

#[no_mangle]
pub unsafe extern "C" fn hoi3d_priors_lookup(
    table: *const Hoi3dPriorTable,
    category: *const c_char,
    out: *mut Hoi3dObjectPrior,
) -> Hoi3dStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        let p = t.inner.lookup(cstr(category, "category")?)?;
        write_out(
            out,
            Hoi3dObjectPrior {
                ratio: p.ratio,
                gamma_min: p.gamma_min,
                gamma_max: p.gamma_max,
                box_ratio_mode: p.box_ratio_mode,
            },
            "out",
        )
    })
}

/// Sphere center and radius for an object box.
///
/// `joints3d` holds 17 camera-frame joints (51 doubles); `z_min`/`z_max` are
/// the depth extremes of the recovered body.
#[no_mangle]
pub unsafe extern "C" fn hoi3d_estimate_sphere(
    table: *const Hoi3dPriorTable,
    camera: Hoi3dCamera,
    human_box: Hoi3dBox,
    object_box: Hoi3dBox,
    category: *const c_char,
    joints3d: *const f64,
    z_min: f64,
    z_max: f64,
    out: *mut Hoi3dSphere,
) -> Hoi3dStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        let joints = points(input(joints3d, 3 * NUM_JOINTS, "joints3d")?);
        let sw = (joints[hoi3d::skeleton::LEFT_SHOULDER] - joints[hoi3d::skeleton::RIGHT_SHOULDER]).norm();
        let body = BodySummary::new(joints, z_min, z_max, sw)?;
        let cam = Camera::new(camera.focal, (camera.cx, camera.cy))?;
        let est = estimate_sphere(
            &cam,
            &to_box(&human_box)?,
            &to_box(&object_box)?,
            cstr(category, "category")?,
            &t.inner,
            &body,
        )?;
        write_out(
            out,
            Hoi3dSphere {
                center: [est.center.x, est.center.y, est.center.z],
                radius: est.radius,
                clamped: match est.clamped {
                    Clamped::None => Hoi3dClamped::None,
                    Clamped::ToMin => Hoi3dClamped::ToMin,
                    Clamped::ToMax => Hoi3dClamped::ToMax,
                },
            },
            "out",
        )
    })
}

/// Build a configuration volume from body vertices (`3 * n_vertices`
/// doubles), 17 joints (51 doubles) and a sphere. `gravity` may be null for
/// the default camera-frame direction.
#[no_mangle]
pub unsafe extern "C" fn hoi3d_volume_build(
    vertices: *const f64,
    n_vertices: usize,
    joints3d: *const f64,
    sphere: *const Hoi3dSphere,
    category: *const c_char,
    gravity: *const f64,
    seed: u64,
    out: *mut *mut Hoi3dVolume,
) -> Hoi3dStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = sphere.as_ref().ok_or_else(|| null("sphere"))?;
        let body = BodyPoints::new(
            points(input(vertices, 3 * n_vertices, "vertices")?),
            points(input(joints3d, 3 * NUM_JOINTS, "joints3d")?),
        )?;
        let est = SphereEstimate {
            center: Point3::new(s.center[0], s.center[1], s.center[2]),
            radius: s.radius,
            clamped: Clamped::None,
        };
        let g = if gravity.is_null() {
            DEFAULT_GRAVITY
        } else {
            let g = input(gravity, 3, "gravity")?;
            [g[0], g[1], g[2]]
        };
        let vol = build_volume(&body, &est, cstr(category, "category")?, &Vector3::from(g), seed)?;
        out.write(Box::into_raw(Box::new(Hoi3dVolume { inner: vol })));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hoi3d_volume_free(volume: *mut Hoi3dVolume) {
    if !volume.is_null() {
        drop(Box::from_raw(volume));
    }
}

/// Number of points, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn hoi3d_volume_len(volume: *const Hoi3dVolume) -> usize {
    volume.as_ref().map_or(0, |v| v.inner.points.len())
}

/// Copy the points as `x y z` triples; `capacity` counts doubles.
#[no_mangle]
pub unsafe extern "C" fn hoi3d_volume_points(
    volume: *const Hoi3dVolume,
    out: *mut f64,
    capacity: usize,
) -> Hoi3dStatus {
    guard(|| {
        let v = volume.as_ref().ok_or_else(|| null("volume"))?;
        let need = 3 * v.inner.points.len();
        if capacity < need {
            return Err(Fail(
                Hoi3dStatus::DimensionMismatch,
                format!("need {need} doubles, got {capacity}"),
            ));
        }
        let dst = output(out, need, "out")?;
        for (c, p) in dst.chunks_exact_mut(3).zip(&v.inner.points) {
            c.copy_from_slice(&[p.x, p.y, p.z]);
        }
        Ok(())
    })
}

/// Copy the per-point part ids (1..=17 body, 18 object).
#[no_mangle]
pub unsafe extern "C" fn hoi3d_volume_labels(volume: *const Hoi3dVolume, out: *mut u8, capacity: usize) -> Hoi3dStatus {
    guard(|| {
        let v = volume.as_ref().ok_or_else(|| null("volume"))?;
        let n = v.inner.labels.len();
        if capacity < n {
            return Err(Fail(
                Hoi3dStatus::DimensionMismatch,
                format!("need {n} labels, got {capacity}"),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let dst = slice::from_raw_parts_mut(out, n);
        for (d, l) in dst.iter_mut().zip(&v.inner.labels) {
            *d = l.id();
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hoi3d_volume_write(
    volume: *const Hoi3dVolume,
    path: *const c_char,
    format: Hoi3dFormat,
) -> Hoi3dStatus {
    guard(|| {
        let v = volume.as_ref().ok_or_else(|| null("volume"))?;
        let f = match format {
            Hoi3dFormat::Ply => VolumeFormat::Ply,
            Hoi3dFormat::Json => VolumeFormat::Json,
        };
        write_volume(&v.inner, Path::new(cstr(path, "path")?), f)?;
        Ok(())
    })
}

/// Joint attention from a `height x width` attention map and `n_joints`
/// `(x, y)` cell coordinates; writes `n_joints` weights.
#[no_mangle]
pub unsafe extern "C" fn hoi3d_joint_attention(
    att: *const f64,
    height: usize,
    width: usize,
    joints_xy: *const f64,
    n_joints: usize,
    out: *mut f64,
) -> Hoi3dStatus {
    guard(|| {
        let map = AttentionMap::new(height, width, input(att, height * width, "att")?.to_vec())?;
        let xy: Vec<(f64, f64)> = input(joints_xy, 2 * n_joints, "joints_xy")?
            .chunks_exact(2)
            .map(|c| (c[0], c[1]))
            .collect();
        let a = joint_attention(&map, &xy)?;
        output(out, n_joints, "out")?.copy_from_slice(&a);
        Ok(())
    })
}

/// `sum p ln(p / q)`. `smoothing <= 0` disables smoothing. Gradient buffers
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn hoi3d_kl_divergence(
    p: *const f64,
    q: *const f64,
    n: usize,
    smoothing: f64,
    loss: *mut f64,
    grad_p: *mut f64,
    grad_q: *mut f64,
) -> Hoi3dStatus {
    guard(|| {
        let eps = (smoothing > 0.0).then_some(smoothing);
        let r = kl_divergence(input(p, n, "p")?, input(q, n, "q")?, eps)?;
        write_out(loss, r.loss, "loss")?;
        maybe_write(grad_p, &r.grad_a2d);
        maybe_write(grad_q, &r.grad_a3d);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hoi3d_triplet_loss(
    anchor: *const f64,
    positive: *const f64,
    negative: *const f64,
    dim: usize,
    margin: f64,
    loss: *mut f64,
    grad_anchor: *mut f64,
    grad_positive: *mut f64,
    grad_negative: *mut f64,
) -> Hoi3dStatus {
    guard(|| {
        let r = triplet_loss(
            input(anchor, dim, "anchor")?,
            input(positive, dim, "positive")?,
            input(negative, dim, "negative")?,
            margin,
        )?;
        write_out(loss, r.loss, "loss")?;
        maybe_write(grad_anchor, &r.grad_anchor);
        maybe_write(grad_positive, &r.grad_positive);
        maybe_write(grad_negative, &r.grad_negative);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hoi3d_semantic_consistency(
    s2d: *const f64,
    s3d: *const f64,
    m: usize,
    mode: Hoi3dSemanticMode,
    loss: *mut f64,
    grad_s2d: *mut f64,
    grad_s3d: *mut f64,
) -> Hoi3dStatus {
    guard(|| {
        let mode = match mode {
            Hoi3dSemanticMode::PerClassAbs => SemanticMode::PerClassAbs,
            Hoi3dSemanticMode::Squared => SemanticMode::Squared,
            Hoi3dSemanticMode::VectorL2 => SemanticMode::VectorL2,
        };
        let r = semantic_consistency(input(s2d, m, "s2d")?, input(s3d, m, "s3d")?, mode)?;
        write_out(loss, r.loss, "loss")?;
        maybe_write(grad_s2d, &r.grad_first);
        maybe_write(grad_s3d, &r.grad_second);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hoi3d_bce_multilabel(
    scores: *const f64,
    targets: *const f64,
    m: usize,
    loss: *mut f64,
    grad: *mut f64,
) -> Hoi3dStatus {
    guard(|| {
        let r = bce_multilabel(input(scores, m, "scores")?, input(targets, m, "targets")?)?;
        write_out(loss, r.loss, "loss")?;
        maybe_write(grad, &r.grad_scores);
        Ok(())
    })
}

/// Fused 2D, 3D and final scores; each output holds `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn hoi3d_fuse_scores(
    s2d_h: *const f64,
    s2d_o: *const f64,
    s2d_sp: *const f64,
    s3d_h: *const f64,
    s3d_sp: *const f64,
    s_joint: *const f64,
    m: usize,
    out_s2d: *mut f64,
    out_s3d: *mut f64,
    out_total: *mut f64,
) -> Hoi3dStatus {
    guard(|| {
        let f = fuse_scores(
            input(s2d_h, m, "s2d_h")?,
            input(s2d_o, m, "s2d_o")?,
            input(s2d_sp, m, "s2d_sp")?,
            input(s3d_h, m, "s3d_h")?,
            input(s3d_sp, m, "s3d_sp")?,
            input(s_joint, m, "s_joint")?,
        )?;
        output(out_s2d, m, "out_s2d")?.copy_from_slice(&f.s2d);
        output(out_s3d, m, "out_s3d")?.copy_from_slice(&f.s3d);
        output(out_total, m, "out_total")?.copy_from_slice(&f.total);
        Ok(())
    })
}

/// Flags (0/1) for the `ceil(fraction * n)` rows of the `n x d` matrix
/// farthest from its mean row.
#[no_mangle]
pub unsafe extern "C" fn hoi3d_monster_filter(
    embeddings: *const f64,
    n: usize,
    d: usize,
    fraction: f64,
    out_flags: *mut u8,
) -> Hoi3dStatus {
    guard(|| {
        if d == 0 {
            return Err(Fail(Hoi3dStatus::InvalidArgument, "embedding dimension is zero".into()));
        }
        let rows: Vec<Vec<f64>> = input(embeddings, n * d, "embeddings")?
            .chunks_exact(d)
            .map(<[f64]>::to_vec)
            .collect();
        let flags = monster_filter(&rows, fraction)?;
        if out_flags.is_null() {
            return Err(null("out_flags"));
        }
        let dst = slice::from_raw_parts_mut(out_flags, n);
        for (o, f) in dst.iter_mut().zip(flags) {
            *o = u8::from(f);
        }
        Ok(())
    })
}

/// Similarity alignment of two 17-joint poses given as `(u, v, visible)`
/// triples (51 doubles each). Writes the RMS residual and, if `aligned` is
/// non-null, the aligned source pose in the same layout.
#[no_mangle]
pub unsafe extern "C" fn hoi3d_procrustes_align(
    src: *const f64,
    dst: *const f64,
    residual: *mut f64,
    aligned: *mut f64,
) -> Hoi3dStatus {
    guard(|| {
        let pose = |flat: &[f64]| -> Result<Pose2D, Fail> {
            Ok(Pose2D::new(
                flat.chunks_exact(3)
                    .map(|c| Joint2D::from([c[0], c[1], c[2]]))
                    .collect(),
            )?)
        };
        let a = procrustes_align(&pose(input(src, 51, "src")?)?, &pose(input(dst, 51, "dst")?)?)?;
        write_out(residual, a.residual, "residual")?;
        if !aligned.is_null() {
            let flat: Vec<f64> = a.aligned.joints.iter().flat_map(|j| <[f64; 3]>::from(*j)).collect();
            maybe_write(aligned, &flat);
        }
        Ok(())
    })
}
