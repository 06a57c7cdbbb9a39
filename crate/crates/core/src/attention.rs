//! Body-part attention from the 2D and 3D streams and the KL consistency
//! between them.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps2d::GridFrame;
use crate::skeleton::{Pose2D, NUM_JOINTS};
use crate::volume::{PartLabel, VOLUME_POINTS};

pub const SPATIAL_FEATURE_DIM: usize = 384;
pub const HUMAN_FEATURE_DIM: usize = 1024;
pub const HEAD_HIDDEN: usize = 512;

/// Row-major `height x width x channels` feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid2D {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureGrid2D {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::dim("feature grid", height * width * channels, data.len()));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("feature grid".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn at(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Global average pooling over all positions.
    pub fn mean_feature(&self) -> Vec<f64> {
        let n = (self.height * self.width) as f64;
        let mut g = vec![0.0; self.channels];
        for cell in self.data.chunks_exact(self.channels.max(1)) {
            for (a, b) in g.iter_mut().zip(cell) {
                *a += b;
            }
        }
        g.iter_mut().for_each(|x| *x /= n);
        g
    }
}

/// Row-major `height x width` attention weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl AttentionMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::dim("attention map", height * width, data.len()));
        }
        Ok(Self { height, width, data })
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// 17 non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PartAttention(Vec<f64>);

impl PartAttention {
    pub const SUM_TOLERANCE: f64 = 1e-6;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != NUM_JOINTS {
            return Err(Error::dim("part attention", NUM_JOINTS, values.len()));
        }
        if !values.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::InvalidArgument("part attention must be non-negative".into()));
        }
        let s: f64 = values.iter().sum();
        if (s - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!("part attention sums to {s}")));
        }
        Ok(Self(values))
    }

    pub fn uniform() -> Self {
        Self(vec![1.0 / NUM_JOINTS as f64; NUM_JOINTS])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for PartAttention {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PartAttention> for Vec<f64> {
    fn from(p: PartAttention) -> Self {
        p.0
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Softmax over all positions of the inner product between each position's
/// feature and the pooled global feature.
pub fn attention_map_2d(f: &FeatureGrid2D) -> Result<AttentionMap> {
    if f.height * f.width == 0 {
        return Err(Error::InvalidArgument("empty feature grid".into()));
    }
    let g = f.mean_feature();
    let logits: Vec<f64> = f
        .data
        .chunks_exact(f.channels.max(1))
        .map(|cell| cell.iter().zip(&g).map(|(a, b)| a * b).sum())
        .collect();
    let logits = if f.channels == 0 {
        vec![0.0; f.height * f.width]
    } else {
        logits
    };
    AttentionMap::new(f.height, f.width, softmax(&logits))
}

/// Distance-weighted average of the attention map around each joint,
/// normalized across joints. Joint positions are `(column, row)` in cell
/// units and may be fractional.
pub fn joint_attention(att: &AttentionMap, joints: &[(f64, f64)]) -> Result<Vec<f64>> {
    if att.data.iter().any(|a| *a < 0.0 || !a.is_finite()) {
        return Err(Error::InvalidArgument("attention map must be non-negative".into()));
    }
    let raw: Vec<f64> = joints
        .iter()
        .map(|&(jx, jy)| {
            let mut num = 0.0;
            let mut den = 0.0;
            for r in 0..att.height {
                let dy = r as f64 - jy;
                for c in 0..att.width {
                    let dx = c as f64 - jx;
                    let w = 1.0 / (1.0 + dx.hypot(dy));
                    num += att.at(r, c) * w;
                    den += w;
                }
            }
            num / den
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("attention map has no mass".into()));
    }
    Ok(raw.into_iter().map(|a| a / total).collect())
}

pub fn joint_attention_2d(att: &AttentionMap, joints: &[(f64, f64)]) -> Result<PartAttention> {
    if joints.len() != NUM_JOINTS {
        return Err(Error::dim("joint cells", NUM_JOINTS, joints.len()));
    }
    PartAttention::new(joint_attention(att, joints)?)
}

/// Pose joints scaled from image pixels into the attention map's cells,
/// using the same reference frame as the 2D maps.
pub fn joint_cells(pose: &Pose2D, frame: &crate::geometry::Box2D, att: &AttentionMap) -> Result<Vec<(f64, f64)>> {
    let grid = GridFrame::new(*frame, att.width, att.height)?;
    Ok(pose.joints.iter().map(|j| grid.to_cell(j.u, j.v)).collect())
}

/// Per-point spatial features plus the human feature of the 3D stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature3D {
    /// One row per volume point.
    pub per_point: DMatrix<f64>,
    pub human: DVector<f64>,
}

impl Feature3D {
    pub fn new(per_point: DMatrix<f64>, human: DVector<f64>) -> Result<Self> {
        if per_point.nrows() != VOLUME_POINTS {
            return Err(Error::dim("per-point feature rows", VOLUME_POINTS, per_point.nrows()));
        }
        if !per_point.iter().chain(human.iter()).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("3D features".into()));
        }
        Ok(Self { per_point, human })
    }

    pub fn input_dim(&self) -> usize {
        self.per_point.ncols() + self.human.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != inputs * outputs {
            return Err(Error::dim("dense weights", inputs * outputs, weights.len()));
        }
        if bias.len() != outputs {
            return Err(Error::dim("dense bias", outputs, bias.len()));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    fn seeded(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-bound..bound)).collect();
        let bias = (0..outputs).map(|_| rng.gen_range(-bound..bound)).collect();
        Self {
            inputs,
            outputs,
            weights,
            bias,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Two ReLU hidden layers followed by a linear map to 17 logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionHeadParams {
    pub layers: Vec<Dense>,
}

impl AttentionHeadParams {
    pub fn seeded(input_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            layers: vec![
                Dense::seeded(input_dim, HEAD_HIDDEN, &mut rng),
                Dense::seeded(HEAD_HIDDEN, HEAD_HIDDEN, &mut rng),
                Dense::seeded(HEAD_HIDDEN, NUM_JOINTS, &mut rng),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != 3 {
            return Err(Error::dim("head layers", 3, self.layers.len()));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::dim(
                    format!("head layer {} inputs", i + 1),
                    pair[0].outputs,
                    pair[1].inputs,
                ));
            }
        }
        for l in &self.layers {
            Dense::new(l.inputs, l.outputs, l.weights.clone(), l.bias.clone())?;
        }
        let last = self.layers[2].outputs;
        if last != NUM_JOINTS {
            return Err(Error::dim("head outputs", NUM_JOINTS, last));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(&h);
            if i < last {
                h.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        h
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

/// Tile the human feature over every point, concatenate with the per-point
/// features, average over points and run the head.
pub fn part_attention_3d(f: &Feature3D, head: &AttentionHeadParams) -> Result<PartAttention> {
    head.validate()?;
    if head.input_dim() != f.input_dim() {
        return Err(Error::dim("attention head input", f.input_dim(), head.input_dim()));
    }
    // the mean of a tiled vector is the vector itself
    let mut pooled: Vec<f64> = f.per_point.row_mean().iter().copied().collect();
    pooled.extend(f.human.iter());
    let probs = softmax(&head.logits(&pooled));
    PartAttention::new(probs)
}

/// Per-point attention: body points take their part's weight, object points 1.
pub fn assemble_att3d(part: &PartAttention, labels: &[PartLabel]) -> Vec<f64> {
    labels
        .iter()
        .map(|l| l.joint().map_or(1.0, |j| part.values()[j]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlResult {
    pub loss: f64,
    pub grad_a2d: Vec<f64>,
    pub grad_a3d: Vec<f64>,
}

/// `sum_i p_i ln(p_i / q_i)` with analytic gradients in both arguments.
///
/// Without smoothing, `0 ln(0 / q) = 0` and such entries get zero gradient;
/// `q_i = 0` with `p_i > 0` is an error. With `Some(eps)` both vectors are
/// replaced by `(x + eps) / (sum x + n eps)` first and gradients are taken
/// through that map.
pub fn kl_divergence(p: &[f64], q: &[f64], smoothing: Option<f64>) -> Result<KlResult> {
    if p.len() != q.len() {
        return Err(Error::dim("KL arguments", p.len(), q.len()));
    }
    if p.is_empty() {
        return Err(Error::InvalidArgument("KL of empty distributions".into()));
    }
    if !p.iter().chain(q).all(|x| x.is_finite() && *x >= 0.0) {
        return Err(Error::InvalidArgument(
            "KL arguments must be finite and non-negative".into(),
        ));
    }
    match smoothing {
        None => kl_raw(p, q),
        Some(eps) => {
            let n = p.len() as f64;
            let smooth = |x: &[f64]| -> (Vec<f64>, f64) {
                let s = x.iter().sum::<f64>() + n * eps;
                (x.iter().map(|v| (v + eps) / s).collect(), s)
            };
            let (ps, sp) = smooth(p);
            let (qs, sq) = smooth(q);
            let inner = kl_raw(&ps, &qs)?;
            // d x'_i / d x_j = delta_ij / s - x'_i / s
            let back = |g: &[f64], xs: &[f64], s: f64| -> Vec<f64> {
                let dot: f64 = g.iter().zip(xs).map(|(a, b)| a * b).sum();
                g.iter().map(|gi| (gi - dot) / s).collect()
            };
            Ok(KlResult {
                loss: inner.loss,
                grad_a2d: back(&inner.grad_a2d, &ps, sp),
                grad_a3d: back(&inner.grad_a3d, &qs, sq),
            })
        }
    }
}

fn kl_raw(p: &[f64], q: &[f64]) -> Result<KlResult> {
    let mut loss = 0.0;
    let mut gp = vec![0.0; p.len()];
    let mut gq = vec![0.0; p.len()];
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::InfiniteKl { index: i, a2d: pi });
        }
        let log = (pi / qi).ln();
        loss += pi * log;
        gp[i] = log + 1.0;
        gq[i] = -pi / qi;
    }
    Ok(KlResult {
        loss,
        grad_a2d: gp,
        grad_a3d: gq,
    })
}

pub fn kl_attention_consistency(a2d: &PartAttention, a3d: &PartAttention, smoothing: Option<f64>) -> Result<KlResult> {
    kl_divergence(a2d.values(), a3d.values(), smoothing)
}

/// Scale each grid position's feature vector by its attention weight.
pub fn reweight_2d(f: &FeatureGrid2D, att: &AttentionMap) -> Result<FeatureGrid2D> {
    if (f.height, f.width) != (att.height, att.width) {
        return Err(Error::dim(
            "attention positions",
            f.height * f.width,
            att.height * att.width,
        ));
    }
    let mut out = f.clone();
    for (cell, a) in out.data.chunks_exact_mut(f.channels.max(1)).zip(&att.data) {
        cell.iter_mut().for_each(|x| *x *= a);
    }
    Ok(out)
}

/// Scale each point's feature row by its attention weight.
pub fn reweight_3d(per_point: &DMatrix<f64>, att: &[f64]) -> Result<DMatrix<f64>> {
    if per_point.nrows() != att.len() {
        return Err(Error::dim("point attention", per_point.nrows(), att.len()));
    }
    let mut out = per_point.clone();
    for (mut row, a) in out.row_iter_mut().zip(att) {
        row *= *a;
    }
    Ok(out)
}
