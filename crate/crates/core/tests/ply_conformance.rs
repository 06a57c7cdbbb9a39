//! Volumes written as PLY must parse with an independent reader.

mod common;

use common::SyntheticBody;
use hoi3d::geometry::{Clamped, SphereEstimate};
use hoi3d::volume::{build_volume, read_volume, write_volume, BodyPoints, VolumeFormat};
use nalgebra::Vector3;
use ply_rs::parser::Parser;
use ply_rs::ply::{DefaultElement, Property};

#[test]
fn ply_output_parses_with_ply_rs() {
    let body = SyntheticBody::new(4, 80);
    let sphere = SphereEstimate {
        center: body.joints[hoi3d::skeleton::RIGHT_WRIST] + Vector3::new(0.0, 0.0, -0.1),
        radius: 0.1,
        clamped: Clamped::None,
    };
    let points = BodyPoints::new(body.vertices.clone(), body.joints.clone()).unwrap();
    let vol = build_volume(&points, &sphere, "Sports Ball", &Vector3::new(0.0, 1.0, 0.0), 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.ply");
    write_volume(&vol, &path, VolumeFormat::Ply).unwrap();

    let mut f = std::fs::File::open(&path).unwrap();
    let ply = Parser::<DefaultElement>::new().read_ply(&mut f).unwrap();
    let verts = &ply.payload["vertex"];
    assert_eq!(verts.len(), 1228);
    for (v, (p, l)) in verts.iter().zip(vol.points.iter().zip(&vol.labels)) {
        let coord = |k: &str| match v[k] {
            Property::Float(x) => x as f64,
            Property::Double(x) => x,
            ref other => panic!("{k}: {other:?}"),
        };
        assert_eq!((coord("x"), coord("y"), coord("z")), (p.x, p.y, p.z));
        let label = match v["part"] {
            Property::UChar(x) => x as u32,
            Property::Int(x) => x as u32,
            Property::UInt(x) => x,
            Property::Short(x) => x as u32,
            Property::UShort(x) => x as u32,
            Property::Char(x) => x as u32,
            ref other => panic!("part: {other:?}"),
        };
        assert_eq!(label, l.id() as u32);
    }

    let back = read_volume(&path, VolumeFormat::Ply).unwrap();
    assert_eq!(back.labels, vol.labels);
    assert_eq!(back.object_category, "sports_ball");
}
