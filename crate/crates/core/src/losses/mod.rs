//! Closed-form losses with analytic gradients, score fusion and the weighted
//! total. Kinks (hinge, absolute value) take a zero subgradient.

mod batch;

pub use batch::{batch_losses, BatchInputs, BatchOptions, BatchReport, FeatureBatch, StreamScores};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MARGIN: f64 = 0.5;
pub const LOG_CLIP: f64 = 1e-12;

fn check_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::dim(what, a, b));
    }
    Ok(())
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletResult {
    pub loss: f64,
    /// `d(a, p) - d(a, n) + margin`, before the hinge.
    pub margin_gap: f64,
    pub grad_anchor: Vec<f64>,
    pub grad_positive: Vec<f64>,
    pub grad_negative: Vec<f64>,
}

/// `max(0, d(a, p) - d(a, n) + margin)` with Euclidean `d`.
pub fn triplet_loss(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> Result<TripletResult> {
    check_len("triplet positive", anchor.len(), positive.len())?;
    check_len("triplet negative", anchor.len(), negative.len())?;
    let d_ap = euclidean(anchor, positive);
    let d_an = euclidean(anchor, negative);
    let gap = d_ap - d_an + margin;
    let n = anchor.len();
    let mut out = TripletResult {
        loss: gap.max(0.0),
        margin_gap: gap,
        grad_anchor: vec![0.0; n],
        grad_positive: vec![0.0; n],
        grad_negative: vec![0.0; n],
    };
    if gap > 0.0 {
        for i in 0..n {
            let up = if d_ap > 0.0 {
                (anchor[i] - positive[i]) / d_ap
            } else {
                0.0
            };
            let un = if d_an > 0.0 {
                (anchor[i] - negative[i]) / d_an
            } else {
                0.0
            };
            out.grad_anchor[i] = up - un;
            out.grad_positive[i] = -up;
            out.grad_negative[i] = un;
        }
    }
    Ok(out)
}

/// A spatial feature with the HOI labels of its sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialFeature {
    pub vector: Vec<f64>,
    pub hoi_labels: BTreeSet<u32>,
}

impl SpatialFeature {
    pub fn new(vector: Vec<f64>, hoi_labels: impl IntoIterator<Item = u32>) -> Self {
        Self {
            vector,
            hoi_labels: hoi_labels.into_iter().collect(),
        }
    }

    pub fn shares_label(&self, other: &SpatialFeature) -> bool {
        !self.hoi_labels.is_disjoint(&other.hoi_labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinedTriplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    NoPositive,
    NoNegative,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MiningResult {
    pub triplets: Vec<MinedTriplet>,
    pub skipped: Vec<(usize, SkipReason)>,
}

/// For every 2D anchor pick the farthest 3D candidate sharing an HOI label
/// and the nearest 3D candidate whose labels are disjoint from the anchor's.
/// Ties go to the lower candidate index.
pub fn mine_semi_hard(anchors: &[SpatialFeature], candidates: &[SpatialFeature]) -> Result<MiningResult> {
    let mut out = MiningResult::default();
    for (ai, a) in anchors.iter().enumerate() {
        let mut pos: Option<(f64, usize)> = None;
        let mut neg: Option<(f64, usize)> = None;
        for (ci, c) in candidates.iter().enumerate() {
            check_len("candidate feature", a.vector.len(), c.vector.len())?;
            let d = euclidean(&a.vector, &c.vector);
            if a.shares_label(c) {
                if pos.is_none_or(|(best, _)| d > best) {
                    pos = Some((d, ci));
                }
            } else if neg.is_none_or(|(best, _)| d < best) {
                neg = Some((d, ci));
            }
        }
        match (pos, neg) {
            (Some((_, p)), Some((_, n))) => out.triplets.push(MinedTriplet {
                anchor: ai,
                positive: p,
                negative: n,
            }),
            (None, _) => out.skipped.push((ai, SkipReason::NoPositive)),
            (_, None) => out.skipped.push((ai, SkipReason::NoNegative)),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticMode {
    /// `sum_i |s2d_i - s3d_i|`
    #[default]
    PerClassAbs,
    /// `sum_i (s2d_i - s3d_i)^2`
    Squared,
    /// `||s2d - s3d||_2` over the whole vector.
    VectorL2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLoss {
    pub loss: f64,
    pub grad_first: Vec<f64>,
    pub grad_second: Vec<f64>,
}

pub fn semantic_consistency(s2d: &[f64], s3d: &[f64], mode: SemanticMode) -> Result<PairLoss> {
    check_len("semantic scores", s2d.len(), s3d.len())?;
    let delta: Vec<f64> = s2d.iter().zip(s3d).map(|(a, b)| a - b).collect();
    let (loss, grad): (f64, Vec<f64>) = match mode {
        SemanticMode::PerClassAbs => (
            delta.iter().map(|d| d.abs()).sum(),
            delta.iter().map(|&d| if d == 0.0 { 0.0 } else { d.signum() }).collect(),
        ),
        SemanticMode::Squared => (
            delta.iter().map(|d| d * d).sum(),
            delta.iter().map(|d| 2.0 * d).collect(),
        ),
        SemanticMode::VectorL2 => {
            let n = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            let g = if n > 0.0 {
                delta.iter().map(|d| d / n).collect()
            } else {
                vec![0.0; delta.len()]
            };
            (n, g)
        }
    };
    let neg = grad.iter().map(|g| -g).collect();
    Ok(PairLoss {
        loss,
        grad_first: grad,
        grad_second: neg,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BceResult {
    pub loss: f64,
    pub grad_scores: Vec<f64>,
}

/// Mean binary cross-entropy over classes; scores are clipped into
/// `[1e-12, 1 - 1e-12]` and clipped entries get zero gradient.
pub fn bce_multilabel(scores: &[f64], targets: &[f64]) -> Result<BceResult> {
    check_len("bce targets", scores.len(), targets.len())?;
    if scores.is_empty() {
        return Err(Error::InvalidArgument("empty score vector".into()));
    }
    let m = scores.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(scores.len());
    for (&s, &t) in scores.iter().zip(targets) {
        let c = s.clamp(LOG_CLIP, 1.0 - LOG_CLIP);
        loss -= t * c.ln() + (1.0 - t) * (1.0 - c).ln();
        grad.push(if c == s {
            (-t / c + (1.0 - t) / (1.0 - c)) / m
        } else {
            0.0
        });
    }
    Ok(BceResult {
        loss: loss / m,
        grad_scores: grad,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedScores {
    pub s2d: Vec<f64>,
    pub s3d: Vec<f64>,
    pub total: Vec<f64>,
}

/// `S2D = (s2d_h + s2d_o) * s2d_sp`, `S3D = s3d_h + s3d_sp`,
/// `S = S2D + S3D + s_joint`, all elementwise.
pub fn fuse_scores(
    s2d_h: &[f64],
    s2d_o: &[f64],
    s2d_sp: &[f64],
    s3d_h: &[f64],
    s3d_sp: &[f64],
    s_joint: &[f64],
) -> Result<FusedScores> {
    let m = s2d_h.len();
    for (name, v) in [
        ("s2d_o", s2d_o),
        ("s2d_sp", s2d_sp),
        ("s3d_h", s3d_h),
        ("s3d_sp", s3d_sp),
        ("s_joint", s_joint),
    ] {
        check_len(name, m, v.len())?;
    }
    let s2d: Vec<f64> = (0..m).map(|i| (s2d_h[i] + s2d_o[i]) * s2d_sp[i]).collect();
    let s3d: Vec<f64> = (0..m).map(|i| s3d_h[i] + s3d_sp[i]).collect();
    let total = (0..m).map(|i| s2d[i] + s3d[i] + s_joint[i]).collect();
    Ok(FusedScores { s2d, s3d, total })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub tri: f64,
    pub att: f64,
    pub sem: f64,
    pub cls: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            tri: 0.001,
            att: 0.01,
            sem: 0.01,
            cls: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (n, w) in [
            ("tri", self.tri),
            ("att", self.att),
            ("sem", self.sem),
            ("cls", self.cls),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "loss weight {n} = {w} must be non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// A loss value with its gradients keyed by input name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Component {
    pub value: f64,
    pub gradients: BTreeMap<String, Vec<f64>>,
}

impl Component {
    pub fn new(value: f64) -> Self {
        Self {
            value,
            gradients: BTreeMap::new(),
        }
    }

    pub fn with_grad(mut self, name: &str, grad: Vec<f64>) -> Self {
        self.gradients.insert(name.to_string(), grad);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossInputs {
    pub tri: Component,
    pub att: Component,
    pub sem: Component,
    pub cls_2d: Component,
    pub cls_3d: Component,
    pub cls_joint: Component,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_tri: f64,
    pub l_att: f64,
    pub l_sem: f64,
    pub l_cls_2d: f64,
    pub l_cls_3d: f64,
    pub l_cls_joint: f64,
    pub total: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub gradients: BTreeMap<String, Vec<f64>>,
}

/// Weighted sum of the components. Gradients of inputs that appear in
/// several components are accumulated in a fixed component order.
pub fn total_loss(parts: &LossInputs, w: &LossWeights) -> Result<LossBreakdown> {
    w.validate()?;
    let named = [
        ("l_tri", &parts.tri, w.tri),
        ("l_att", &parts.att, w.att),
        ("l_sem", &parts.sem, w.sem),
        ("l_cls_2d", &parts.cls_2d, w.cls),
        ("l_cls_3d", &parts.cls_3d, w.cls),
        ("l_cls_joint", &parts.cls_joint, w.cls),
    ];
    let mut gradients: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (name, c, weight) in named {
        if !c.value.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        for (key, g) in &c.gradients {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("{name} gradient for {key}")));
            }
            let acc = gradients.entry(key.clone()).or_insert_with(|| vec![0.0; g.len()]);
            check_len(&format!("gradient {key}"), acc.len(), g.len())?;
            acc.iter_mut().zip(g).for_each(|(a, b)| *a += weight * b);
        }
    }
    let cls = parts.cls_2d.value + parts.cls_3d.value + parts.cls_joint.value;
    Ok(LossBreakdown {
        l_tri: parts.tri.value,
        l_att: parts.att.value,
        l_sem: parts.sem.value,
        l_cls_2d: parts.cls_2d.value,
        l_cls_3d: parts.cls_3d.value,
        l_cls_joint: parts.cls_joint.value,
        total: w.tri * parts.tri.value + w.att * parts.att.value + w.sem * parts.sem.value + w.cls * cls,
        gradients,
    })
}
