use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ConfigurationVolume, PartLabel};
use crate::error::{Error, Result};
use crate::geometry::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeFormat {
    Ply,
    Json,
}

impl FromStr for VolumeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ply" => Ok(Self::Ply),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidArgument(format!("unknown volume format `{other}`"))),
        }
    }
}

impl VolumeFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            Self::Ply => "ply",
            Self::Json => "json",
        }
    }

    pub fn encode(&self, volume: &ConfigurationVolume) -> Result<String> {
        match self {
            Self::Ply => Ok(to_ply(volume)),
            Self::Json => Ok(serde_json::to_string_pretty(volume)? + "\n"),
        }
    }
}

/// ASCII PLY 1.0 with `x y z` as doubles and an integer `part` per vertex.
/// Floats use the shortest representation that parses back to the same bits.
pub fn to_ply(volume: &ConfigurationVolume) -> String {
    let mut s = String::with_capacity(volume.points.len() * 64);
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "comment object_category {}", volume.object_category);
    let _ = writeln!(s, "element vertex {}", volume.points.len());
    s.push_str("property double x\nproperty double y\nproperty double z\nproperty int part\nend_header\n");
    for (p, l) in volume.points.iter().zip(&volume.labels) {
        let _ = writeln!(s, "{} {} {} {}", p.x, p.y, p.z, l.id());
    }
    s
}

pub fn write_volume(volume: &ConfigurationVolume, path: impl AsRef<Path>, format: VolumeFormat) -> Result<()> {
    let path = path.as_ref();
    volume.validate()?;
    let text = format.encode(volume)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_volume(path: impl AsRef<Path>, format: VolumeFormat) -> Result<ConfigurationVolume> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        VolumeFormat::Json => Ok(serde_json::from_reader(BufReader::new(file))?),
        VolumeFormat::Ply => {
            let ply = PlyPoints::from_reader(file)?;
            let labels = ply.parts.ok_or_else(|| Error::Parse {
                row: 0,
                message: "PLY has no `part` property".into(),
            })?;
            let object_category = ply
                .comments
                .iter()
                .find_map(|c| c.strip_prefix("object_category ").map(str::to_string))
                .unwrap_or_default();
            Ok(ConfigurationVolume {
                object_category,
                points: ply.points,
                labels,
                joints: Vec::new(),
                semantics: None,
            })
        }
    }
}

/// Vertex positions (and optional part labels) from an ASCII PLY file.
#[derive(Debug, Clone, PartialEq)]
pub struct PlyPoints {
    pub points: Vec<Point3>,
    pub parts: Option<Vec<PartLabel>>,
    pub comments: Vec<String>,
}

struct Element {
    name: String,
    count: usize,
    props: Vec<String>,
    has_list: bool,
}

impl PlyPoints {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines().enumerate();
        let mut next_line = || -> Result<Option<(usize, String)>> {
            match lines.next() {
                None => Ok(None),
                Some((i, l)) => l.map(|l| Some((i + 1, l))).map_err(|e| Error::Parse {
                    row: i + 1,
                    message: e.to_string(),
                }),
            }
        };
        let perr = |row: usize, message: String| Error::Parse { row, message };

        match next_line()? {
            Some((_, l)) if l.trim() == "ply" => {}
            _ => return Err(perr(1, "missing `ply` magic".into())),
        }
        let mut elements: Vec<Element> = Vec::new();
        let mut comments = Vec::new();
        loop {
            let Some((row, line)) = next_line()? else {
                return Err(perr(0, "unterminated PLY header".into()));
            };
            let mut f = line.split_whitespace();
            match f.next() {
                Some("format") => {
                    if f.next() != Some("ascii") {
                        return Err(perr(row, "only ascii PLY is supported".into()));
                    }
                }
                Some("comment") | Some("obj_info") => {
                    comments.push(f.collect::<Vec<_>>().join(" "));
                }
                Some("element") => {
                    let name = f.next().ok_or_else(|| perr(row, "element without name".into()))?;
                    let count = f
                        .next()
                        .and_then(|c| c.parse().ok())
                        .ok_or_else(|| perr(row, "element without count".into()))?;
                    elements.push(Element {
                        name: name.to_string(),
                        count,
                        props: Vec::new(),
                        has_list: false,
                    });
                }
                Some("property") => {
                    let el = elements
                        .last_mut()
                        .ok_or_else(|| perr(row, "property before element".into()))?;
                    let rest: Vec<&str> = f.collect();
                    if rest.first() == Some(&"list") {
                        el.has_list = true;
                    }
                    let name = rest.last().ok_or_else(|| perr(row, "property without name".into()))?;
                    el.props.push(name.to_string());
                }
                Some("end_header") => break,
                Some(_) | None => {}
            }
        }

        let mut points = Vec::new();
        let mut parts = None;
        for el in &elements {
            if el.name != "vertex" {
                for _ in 0..el.count {
                    next_line()?.ok_or_else(|| perr(0, format!("truncated `{}` element", el.name)))?;
                }
                continue;
            }
            if el.has_list {
                return Err(perr(0, "list properties on vertices are not supported".into()));
            }
            let col = |n: &str| el.props.iter().position(|p| p == n);
            let (Some(ix), Some(iy), Some(iz)) = (col("x"), col("y"), col("z")) else {
                return Err(perr(0, "vertex element lacks x/y/z".into()));
            };
            let ipart = col("part");
            let mut labels = Vec::with_capacity(el.count);
            for _ in 0..el.count {
                let (row, line) = next_line()?.ok_or_else(|| perr(0, "truncated vertex list".into()))?;
                let vals: Vec<&str> = line.split_whitespace().collect();
                if vals.len() != el.props.len() {
                    return Err(perr(
                        row,
                        format!("expected {} values, got {}", el.props.len(), vals.len()),
                    ));
                }
                let num =
                    |i: usize| -> Result<f64> { vals[i].parse().map_err(|e| perr(row, format!("`{}`: {e}", vals[i]))) };
                points.push(Point3::new(num(ix)?, num(iy)?, num(iz)?));
                if let Some(ip) = ipart {
                    let id: u8 = vals[ip]
                        .parse()
                        .map_err(|e| perr(row, format!("part `{}`: {e}", vals[ip])))?;
                    labels.push(PartLabel::try_from(id).map_err(|e| perr(row, e.to_string()))?);
                }
            }
            if ipart.is_some() {
                parts = Some(labels);
            }
        }
        Ok(Self {
            points,
            parts,
            comments,
        })
    }
}

/// Vertex positions from a `.ply` file or from whitespace-separated `x y z` lines.
pub fn read_ply_points(path: impl AsRef<Path>) -> Result<Vec<Point3>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")) {
        return Ok(PlyPoints::from_reader(file)?.points);
    }
    let mut pts = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v = t
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                row: i + 1,
                message: e.to_string(),
            })?;
        if v.len() != 3 {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("expected 3 coordinates, got {}", v.len()),
            });
        }
        pts.push(Point3::new(v[0], v[1], v[2]));
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{BODY_POINTS, SPHERE_POINTS, VOLUME_POINTS};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume() -> ConfigurationVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points = (0..VOLUME_POINTS)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-3.0..3.0),
                    rng.gen::<f64>() * 1e-7,
                    rng.gen_range(-1e6..1e6),
                )
            })
            .collect();
        let labels = (0..VOLUME_POINTS)
            .map(|i| {
                if i < BODY_POINTS {
                    PartLabel::body(i % 17)
                } else {
                    PartLabel::OBJECT
                }
            })
            .collect();
        ConfigurationVolume {
            object_category: "cup".into(),
            points,
            labels,
            joints: vec![Point3::new(0.1, 0.2, 0.3); 17],
            semantics: Some(vec![vec![0.5, -1.0 / 3.0]; 18]),
        }
    }

    #[test]
    fn ply_and_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let v = random_volume();
        let ply = dir.path().join("v.ply");
        write_volume(&v, &ply, VolumeFormat::Ply).unwrap();
        let back = read_volume(&ply, VolumeFormat::Ply).unwrap();
        assert_eq!(back.points, v.points);
        assert_eq!(back.labels, v.labels);
        assert_eq!(back.object_category, "cup");

        let json = dir.path().join("v.json");
        write_volume(&v, &json, VolumeFormat::Json).unwrap();
        assert_eq!(read_volume(&json, VolumeFormat::Json).unwrap(), v);
    }

    #[test]
    fn ply_header_counts() {
        let text = to_ply(&random_volume());
        assert!(text.contains("element vertex 1228\n"));
        assert_eq!(
            text.lines().skip_while(|l| *l != "end_header").count() - 1,
            VOLUME_POINTS
        );
        let objects = text.lines().filter(|l| l.ends_with(" 18")).count();
        assert_eq!(objects, SPHERE_POINTS);
    }

    #[test]
    fn reads_mesh_with_faces() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n\
                    property float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\n\
                    end_header\n0 0 0 255\n1 0 0 255\n0 1 0 255\n3 0 1 2\n";
        let ply = PlyPoints::from_reader(text.as_bytes()).unwrap();
        assert_eq!(ply.points.len(), 3);
        assert!(ply.parts.is_none());
        let bin = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(PlyPoints::from_reader(bin.as_bytes()).is_err());
    }

    #[test]
    fn write_rejects_invalid_volume() {
        let mut v = random_volume();
        v.points.pop();
        let dir = tempfile::tempdir().unwrap();
        assert!(write_volume(&v, dir.path().join("x.ply"), VolumeFormat::Ply).is_err());
    }
}
