//! Rasterized inputs of the 2D spatial block: a two-channel box map and a
//! 17-channel pose heatmap, both 64x64, in the reference frame of the pair's
//! union box.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::Box2D;
use crate::skeleton::{Pose2D, NUM_JOINTS};

pub const MAP_SIZE: usize = 64;
pub const DEFAULT_SIGMA: f64 = 1.5;

/// Maps image pixels into the cell grid of a reference box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridFrame {
    pub frame: Box2D,
    pub cols: usize,
    pub rows: usize,
}

impl GridFrame {
    pub fn new(frame: Box2D, cols: usize, rows: usize) -> Result<Self> {
        if !(frame.width() > 0.0 && frame.height() > 0.0) || !frame.width().is_finite() {
            return Err(Error::DegenerateBox(format!("reference frame {frame:?} has no area")));
        }
        if cols == 0 || rows == 0 {
            return Err(Error::InvalidArgument("grid must have at least one cell".into()));
        }
        Ok(Self { frame, cols, rows })
    }

    /// Union box of the pair on a 64x64 grid.
    pub fn union(human: &Box2D, object: &Box2D) -> Result<Self> {
        Self::new(human.union(object), MAP_SIZE, MAP_SIZE)
    }

    /// Pixel to grid edge coordinates: cell `j` spans `[j, j + 1)`.
    fn edge(&self, u: f64, v: f64) -> (f64, f64) {
        (
            (u - self.frame.u_min) * self.cols as f64 / self.frame.width(),
            (v - self.frame.v_min) * self.rows as f64 / self.frame.height(),
        )
    }

    /// Pixel to continuous cell coordinates `(x = column, y = row)`, with cell
    /// centers at integers.
    pub fn to_cell(&self, u: f64, v: f64) -> (f64, f64) {
        let (x, y) = self.edge(u, v);
        (x - 0.5, y - 0.5)
    }

    /// Cell that contains the pixel; rounds half up at cell borders.
    pub fn cell_index(&self, u: f64, v: f64) -> (i64, i64) {
        let (x, y) = self.edge(u, v);
        (x.floor() as i64, y.floor() as i64)
    }
}

/// Channel-major `channels x rows x cols` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn zeros(channels: usize, rows: usize, cols: usize) -> Self {
        Self {
            channels,
            rows,
            cols,
            data: vec![0.0; channels * rows * cols],
        }
    }

    pub fn get(&self, ch: usize, row: usize, col: usize) -> f64 {
        self.data[(ch * self.rows + row) * self.cols + col]
    }

    fn set(&mut self, ch: usize, row: usize, col: usize, v: f64) {
        self.data[(ch * self.rows + row) * self.cols + col] = v;
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.data[ch * n..(ch + 1) * n]
    }

    /// One line per `(channel, row)`: `channel,row,v0,...,v{cols-1}`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for ch in 0..self.channels {
            for r in 0..self.rows {
                let _ = write!(s, "{ch},{r}");
                for c in 0..self.cols {
                    let _ = write!(s, ",{}", self.get(ch, r, c));
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Human box in channel 0, object box in channel 1.
pub type SpatialMap = Raster;
/// One Gaussian bump per joint.
pub type PoseMap = Raster;

/// Cells whose centers fall inside a box (borders inclusive) get 1.
pub fn make_spatial_map_in(grid: &GridFrame, human: &Box2D, object: &Box2D) -> SpatialMap {
    let mut map = Raster::zeros(2, grid.rows, grid.cols);
    for (ch, b) in [human, object].into_iter().enumerate() {
        let (x0, y0) = grid.edge(b.u_min, b.v_min);
        let (x1, y1) = grid.edge(b.u_max, b.v_max);
        for r in 0..grid.rows {
            let yc = r as f64 + 0.5;
            if yc < y0 || yc > y1 {
                continue;
            }
            for c in 0..grid.cols {
                let xc = c as f64 + 0.5;
                if xc >= x0 && xc <= x1 {
                    map.set(ch, r, c, 1.0);
                }
            }
        }
    }
    map
}

pub fn make_spatial_map(human: &Box2D, object: &Box2D) -> Result<SpatialMap> {
    Ok(make_spatial_map_in(&GridFrame::union(human, object)?, human, object))
}

/// Unnormalized Gaussian (peak 1) centered on each visible joint's cell.
/// Invisible joints leave their channel at zero.
pub fn make_pose_map(pose: &Pose2D, frame: &Box2D, sigma: f64) -> Result<PoseMap> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if pose.joints.len() != NUM_JOINTS {
        return Err(Error::dim("pose joints", NUM_JOINTS, pose.joints.len()));
    }
    let grid = GridFrame::new(*frame, MAP_SIZE, MAP_SIZE)?;
    let mut map = Raster::zeros(NUM_JOINTS, MAP_SIZE, MAP_SIZE);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for (ch, j) in pose.joints.iter().enumerate() {
        if !j.visible {
            continue;
        }
        let (jc, jr) = grid.cell_index(j.u, j.v);
        for r in 0..MAP_SIZE {
            let dr = (r as i64 - jr) as f64;
            for c in 0..MAP_SIZE {
                let dc = (c as i64 - jc) as f64;
                map.set(ch, r, c, (-(dr * dr + dc * dc) * inv).exp());
            }
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::Joint2D;

    fn bx(a: f64, b: f64, c: f64, d: f64) -> Box2D {
        Box2D::new(a, b, c, d).unwrap()
    }

    #[test]
    fn human_box_equal_to_union_fills_channel() {
        let h = bx(10.0, 20.0, 110.0, 220.0);
        let o = bx(30.0, 40.0, 60.0, 90.0);
        let m = make_spatial_map(&h, &o).unwrap();
        assert!(m.channel(0).iter().all(|&v| v == 1.0));
        assert!(m.data.iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(m.channel(1).iter().any(|&v| v == 1.0));
    }

    #[test]
    fn split_boxes_mirror() {
        let h = bx(0.0, 0.0, 50.0, 80.0);
        let o = bx(50.0, 0.0, 100.0, 80.0);
        let m = make_spatial_map(&h, &o).unwrap();
        for r in 0..64 {
            for c in 0..64 {
                assert_eq!(m.get(0, r, c), m.get(1, r, 63 - c));
            }
        }
    }

    #[test]
    fn nested_object_inside_human() {
        let h = bx(0.0, 0.0, 97.0, 131.0);
        let o = bx(13.3, 40.1, 51.7, 99.9);
        let m = make_spatial_map(&h, &o).unwrap();
        // direct oracle: test every cell center against the object box in pixels
        for r in 0..64 {
            for c in 0..64 {
                let u = (c as f64 + 0.5) * 97.0 / 64.0;
                let v = (r as f64 + 0.5) * 131.0 / 64.0;
                let inside = u >= 13.3 && u <= 51.7 && v >= 40.1 && v <= 99.9;
                assert_eq!(m.get(1, r, c) == 1.0, inside, "cell {r},{c}");
                assert!(m.get(1, r, c) <= m.get(0, r, c));
            }
        }
    }

    #[test]
    fn translation_invariance() {
        let h = bx(10.0, 20.0, 110.0, 220.0);
        let o = bx(90.0, 150.0, 170.0, 260.0);
        let mut pose = Pose2D::new(vec![Joint2D::hidden(); 17]).unwrap();
        pose.joints[3] = Joint2D::visible(50.0, 70.0);
        pose.joints[9] = Joint2D::visible(120.0, 200.0);
        let a = make_spatial_map(&h, &o).unwrap();
        let b = make_spatial_map(&h.translated(37.0, -12.0), &o.translated(37.0, -12.0)).unwrap();
        assert_eq!(a, b);
        let mut moved = pose.clone();
        for j in &mut moved.joints {
            j.u += 37.0;
            j.v -= 12.0;
        }
        let u = h.union(&o);
        assert_eq!(
            make_pose_map(&pose, &u, 1.5).unwrap(),
            make_pose_map(&moved, &u.translated(37.0, -12.0), 1.5).unwrap()
        );
    }

    #[test]
    fn joint_at_center_peaks_at_32() {
        let frame = bx(0.0, 0.0, 128.0, 64.0);
        let mut pose = Pose2D::new(vec![Joint2D::hidden(); 17]).unwrap();
        pose.joints[0] = Joint2D::visible(64.0, 32.0);
        let m = make_pose_map(&pose, &frame, DEFAULT_SIGMA).unwrap();
        let ch = m.channel(0);
        let (imax, &vmax) = ch.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!((imax / 64, imax % 64), (32, 32));
        assert_eq!(vmax, 1.0);
        assert!(m.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(m.channel(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invisible_and_coincident_joints() {
        let frame = bx(0.0, 0.0, 100.0, 100.0);
        let hidden = Pose2D::new(vec![Joint2D::hidden(); 17]).unwrap();
        assert!(make_pose_map(&hidden, &frame, 1.5)
            .unwrap()
            .data
            .iter()
            .all(|&v| v == 0.0));
        let mut pose = hidden.clone();
        pose.joints[4] = Joint2D::visible(20.0, 70.0);
        pose.joints[7] = Joint2D::visible(20.0, 70.0);
        let m = make_pose_map(&pose, &frame, 2.0).unwrap();
        assert_eq!(m.channel(4), m.channel(7));
        assert!(make_pose_map(&pose, &frame, 0.0).is_err());
    }

    #[test]
    fn csv_dump_shape() {
        let m = make_spatial_map(&bx(0.0, 0.0, 10.0, 10.0), &bx(2.0, 2.0, 5.0, 5.0)).unwrap();
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 128);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 66);
    }
}
