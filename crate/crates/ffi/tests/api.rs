use std::ffi::{CStr, CString};
use std::ptr;

use hoi3d_ffi::*;

fn last_error() -> String {
    let p = hoi3d_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// 17 camera-frame joints of an upright figure about 3 units from the camera.
fn joints() -> Vec<f64> {
    let upright: [[f64; 3]; 17] = [
        [0.0, 0.1, 5.2],
        [0.0, 0.0, 4.6],
        [-2.0, 0.0, 4.5],
        [-2.4, 0.0, 2.6],
        [-2.5, 0.5, 1.0],
        [2.0, 0.0, 4.5],
        [2.4, 0.0, 2.6],
        [2.5, 0.5, 1.0],
        [0.0, 0.0, 0.0],
        [-1.0, 0.0, -0.2],
        [-1.1, 0.2, -4.0],
        [-1.1, 0.0, -8.0],
        [1.0, 0.0, -0.2],
        [1.1, 0.2, -4.0],
        [1.1, 0.0, -8.0],
        [-0.5, 0.3, 5.6],
        [0.5, 0.3, 5.6],
    ];
    upright
        .iter()
        .flat_map(|[x, y, z]| [0.05 * x, -0.05 * z, 3.0 + 0.05 * y])
        .collect()
}

/// Points scattered deterministically around each joint.
fn vertices() -> Vec<f64> {
    let j = joints();
    let mut out = Vec::new();
    for k in 0..60 {
        let t = k as f64;
        let off = [0.03 * (t * 1.3).sin(), 0.03 * (t * 0.7).cos(), 0.03 * (t * 2.1).sin()];
        for c in j.chunks_exact(3) {
            out.extend([c[0] + off[0], c[1] + off[1], c[2] + off[2]]);
        }
    }
    out
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(hoi3d_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn bundled_priors_lookup() {
    let mut table = ptr::null_mut();
    unsafe {
        assert_eq!(hoi3d_priors_bundled(&mut table), Hoi3dStatus::Ok);
        assert_eq!(hoi3d_priors_len(table), 80);
        let mut prior = Hoi3dObjectPrior {
            ratio: 0.0,
            gamma_min: 0.0,
            gamma_max: 0.0,
            box_ratio_mode: false,
        };
        let name = CString::new("cup").unwrap();
        assert_eq!(hoi3d_priors_lookup(table, name.as_ptr(), &mut prior), Hoi3dStatus::Ok);
        assert!(prior.ratio > 0.0 && prior.gamma_min <= prior.gamma_max);

        let bad = CString::new("spaceship").unwrap();
        assert_eq!(
            hoi3d_priors_lookup(table, bad.as_ptr(), &mut prior),
            Hoi3dStatus::UnknownCategory
        );
        assert!(last_error().contains("spaceship"));
        hoi3d_priors_free(table);
        assert_eq!(hoi3d_priors_len(ptr::null()), 0);
        hoi3d_priors_free(ptr::null_mut());
    }
}

#[test]
fn load_missing_file_is_io_error() {
    let mut table = ptr::null_mut();
    let path = CString::new("/nonexistent/priors.csv").unwrap();
    let s = unsafe { hoi3d_priors_load(path.as_ptr(), &mut table) };
    assert_eq!(s, Hoi3dStatus::Io);
    assert!(table.is_null());
}

#[test]
fn null_pointers_are_reported() {
    let s = unsafe { hoi3d_priors_bundled(ptr::null_mut()) };
    assert_eq!(s, Hoi3dStatus::NullPointer);
    assert!(last_error().contains("out"));
    let mut loss = 0.0;
    let s = unsafe { hoi3d_bce_multilabel(ptr::null(), ptr::null(), 3, &mut loss, ptr::null_mut()) };
    assert_eq!(s, Hoi3dStatus::NullPointer);
}

#[test]
fn sphere_then_volume_roundtrip() {
    let j = joints();
    let v = vertices();
    let zs: Vec<f64> = v.chunks_exact(3).map(|c| c[2]).collect();
    let z_min = zs.iter().cloned().fold(f64::INFINITY, f64::min);
    let z_max = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cam = Hoi3dCamera {
        focal: 5000.0,
        cx: 320.0,
        cy: 240.0,
    };
    let human = Hoi3dBox {
        u_min: 100.0,
        v_min: 20.0,
        u_max: 540.0,
        v_max: 460.0,
    };
    let object = Hoi3dBox {
        u_min: 380.0,
        v_min: 200.0,
        u_max: 430.0,
        v_max: 250.0,
    };
    let cat = CString::new("cup").unwrap();
    let mut table = ptr::null_mut();
    let mut sphere = Hoi3dSphere {
        center: [0.0; 3],
        radius: 0.0,
        clamped: Hoi3dClamped::None,
    };
    unsafe {
        assert_eq!(hoi3d_priors_bundled(&mut table), Hoi3dStatus::Ok);
        let s = hoi3d_estimate_sphere(
            table,
            cam,
            human,
            object,
            cat.as_ptr(),
            j.as_ptr(),
            z_min,
            z_max,
            &mut sphere,
        );
        assert_eq!(s, Hoi3dStatus::Ok, "{}", last_error());
        hoi3d_priors_free(table);
    }
    assert!(sphere.radius > 0.0 && sphere.center[2] > 0.0);

    let mut vol = ptr::null_mut();
    unsafe {
        let s = hoi3d_volume_build(
            v.as_ptr(),
            v.len() / 3,
            j.as_ptr(),
            &sphere,
            cat.as_ptr(),
            ptr::null(),
            7,
            &mut vol,
        );
        assert_eq!(s, Hoi3dStatus::Ok, "{}", last_error());
        let n = hoi3d_volume_len(vol);
        assert_eq!(n, 1228);

        let mut pts = vec![0.0; 3 * n];
        assert_eq!(hoi3d_volume_points(vol, pts.as_mut_ptr(), pts.len()), Hoi3dStatus::Ok);
        assert!(pts.iter().all(|x| x.is_finite()));
        assert_eq!(
            hoi3d_volume_points(vol, pts.as_mut_ptr(), 10),
            Hoi3dStatus::DimensionMismatch
        );

        let mut labels = vec![0u8; n];
        assert_eq!(hoi3d_volume_labels(vol, labels.as_mut_ptr(), n), Hoi3dStatus::Ok);
        assert!(labels[..916].iter().all(|&l| (1..=17).contains(&l)));
        assert!(labels[916..].iter().all(|&l| l == 18));

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("v.ply").to_str().unwrap()).unwrap();
        assert_eq!(
            hoi3d_volume_write(vol, path.as_ptr(), Hoi3dFormat::Ply),
            Hoi3dStatus::Ok
        );
        let text = std::fs::read_to_string(dir.path().join("v.ply")).unwrap();
        assert!(text.starts_with("ply"));
        hoi3d_volume_free(vol);
    }
}

#[test]
fn too_few_vertices_is_dimension_error() {
    let j = joints();
    let sphere = Hoi3dSphere {
        center: [0.0, 0.0, 3.0],
        radius: 0.1,
        clamped: Hoi3dClamped::None,
    };
    let cat = CString::new("cup").unwrap();
    let mut vol = ptr::null_mut();
    let s = unsafe {
        hoi3d_volume_build(
            j.as_ptr(),
            17,
            j.as_ptr(),
            &sphere,
            cat.as_ptr(),
            ptr::null(),
            0,
            &mut vol,
        )
    };
    assert_eq!(s, Hoi3dStatus::DimensionMismatch);
    assert!(vol.is_null());
}

#[test]
fn kl_and_grads() {
    let p = [0.25, 0.25, 0.5];
    let q = [0.5, 0.25, 0.25];
    let (mut loss, mut gp, mut gq) = (0.0, [0.0; 3], [0.0; 3]);
    let s = unsafe {
        hoi3d_kl_divergence(
            p.as_ptr(),
            q.as_ptr(),
            3,
            0.0,
            &mut loss,
            gp.as_mut_ptr(),
            gq.as_mut_ptr(),
        )
    };
    assert_eq!(s, Hoi3dStatus::Ok);
    let want: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum();
    assert!((loss - want).abs() < 1e-15);
    for i in 0..3 {
        assert!((gq[i] + p[i] / q[i]).abs() < 1e-12);
    }

    let zero_q = [1.0, 0.0, 0.0];
    let s = unsafe {
        hoi3d_kl_divergence(
            p.as_ptr(),
            zero_q.as_ptr(),
            3,
            0.0,
            &mut loss,
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(s, Hoi3dStatus::Numeric);
}

#[test]
fn triplet_semantic_bce_fuse() {
    let (a, pos, neg) = ([0.0, 0.0], [1.0, 0.0], [0.0, 0.8]);
    let mut loss = 0.0;
    let mut ga = [0.0; 2];
    unsafe {
        let s = hoi3d_triplet_loss(
            a.as_ptr(),
            pos.as_ptr(),
            neg.as_ptr(),
            2,
            0.5,
            &mut loss,
            ga.as_mut_ptr(),
            ptr::null_mut(),
            ptr::null_mut(),
        );
        assert_eq!(s, Hoi3dStatus::Ok);
    }
    assert!((loss - 0.7).abs() < 1e-12);

    let s2 = [0.9, 0.1];
    let s3 = [0.6, 0.4];
    unsafe {
        let s = hoi3d_semantic_consistency(
            s2.as_ptr(),
            s3.as_ptr(),
            2,
            Hoi3dSemanticMode::PerClassAbs,
            &mut loss,
            ptr::null_mut(),
            ptr::null_mut(),
        );
        assert_eq!(s, Hoi3dStatus::Ok);
    }
    assert!((loss - 0.6).abs() < 1e-12);

    let t = [1.0, 0.0];
    unsafe {
        assert_eq!(
            hoi3d_bce_multilabel(s2.as_ptr(), t.as_ptr(), 2, &mut loss, ptr::null_mut()),
            Hoi3dStatus::Ok
        );
    }
    assert!((loss + 0.9f64.ln()).abs() < 1e-12);

    let ones = [1.0, 0.5];
    let (mut o2, mut o3, mut ot) = ([0.0; 2], [0.0; 2], [0.0; 2]);
    unsafe {
        let s = hoi3d_fuse_scores(
            s2.as_ptr(),
            ones.as_ptr(),
            ones.as_ptr(),
            s3.as_ptr(),
            ones.as_ptr(),
            ones.as_ptr(),
            2,
            o2.as_mut_ptr(),
            o3.as_mut_ptr(),
            ot.as_mut_ptr(),
        );
        assert_eq!(s, Hoi3dStatus::Ok);
    }
    assert!((o2[1] - (0.1 + 0.5) * 0.5).abs() < 1e-15);
    assert!((o3[0] - (0.6 + 1.0)).abs() < 1e-15);
    assert!((ot[0] - ((0.9 + 1.0) * 1.0 + 1.6 + 1.0)).abs() < 1e-15);
}

#[test]
fn joint_attention_bilinear() {
    let att = [0.1, 0.2, 0.3, 0.4];
    let xy = [0.5, 0.5, 0.0, 0.0];
    let mut out = [0.0; 2];
    let s = unsafe { hoi3d_joint_attention(att.as_ptr(), 2, 2, xy.as_ptr(), 2, out.as_mut_ptr()) };
    assert_eq!(s, Hoi3dStatus::Ok, "{}", last_error());
    assert!(out.iter().all(|x| x.is_finite() && *x >= 0.0));
}

#[test]
fn monster_flags() {
    let emb = [0.0, 0.0, 0.1, 0.0, 0.0, 0.1, 5.0, 5.0];
    let mut flags = [9u8; 4];
    let s = unsafe { hoi3d_monster_filter(emb.as_ptr(), 4, 2, 0.25, flags.as_mut_ptr()) };
    assert_eq!(s, Hoi3dStatus::Ok);
    assert_eq!(flags, [0, 0, 0, 1]);
    let s = unsafe { hoi3d_monster_filter(emb.as_ptr(), 4, 0, 0.25, flags.as_mut_ptr()) };
    assert_eq!(s, Hoi3dStatus::InvalidArgument);
}

#[test]
fn procrustes_recovers_similarity() {
    let src: Vec<f64> = (0..17)
        .flat_map(|i| {
            let t = i as f64;
            [t.cos() * (1.0 + 0.1 * t), t.sin() * 2.0 + 0.05 * t * t, 1.0]
        })
        .collect();
    let (s, th, tx, ty) = (1.7, 0.6f64, 3.0, -2.0);
    let dst: Vec<f64> = src
        .chunks_exact(3)
        .flat_map(|c| {
            [
                s * (th.cos() * c[0] - th.sin() * c[1]) + tx,
                s * (th.sin() * c[0] + th.cos() * c[1]) + ty,
                1.0,
            ]
        })
        .collect();
    let mut residual = f64::NAN;
    let mut aligned = vec![0.0; 51];
    let st = unsafe { hoi3d_procrustes_align(src.as_ptr(), dst.as_ptr(), &mut residual, aligned.as_mut_ptr()) };
    assert_eq!(st, Hoi3dStatus::Ok, "{}", last_error());
    assert!(residual < 1e-9);
    for (a, b) in aligned.iter().zip(&dst) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn success_clears_last_error() {
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(hoi3d_priors_bundled(ptr::null_mut()), Hoi3dStatus::NullPointer);
        assert!(!hoi3d_last_error().is_null());
        assert_eq!(hoi3d_priors_bundled(&mut t), Hoi3dStatus::Ok);
        assert!(hoi3d_last_error().is_null());
        hoi3d_priors_free(t);
    }
}
