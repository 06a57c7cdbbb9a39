//! Per-batch evaluation of every loss component from dumped tensors.

use serde::{Deserialize, Serialize};

use super::{
    bce_multilabel, fuse_scores, mine_semi_hard, semantic_consistency, total_loss, triplet_loss, Component,
    LossBreakdown, LossInputs, LossWeights, MinedTriplet, SemanticMode, SkipReason, SpatialFeature, DEFAULT_MARGIN,
};
use crate::attention::kl_divergence;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Spatial features and part attentions for one batch of `B` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBatch {
    pub batch_id: String,
    /// `B x d` 2D spatial features (triplet anchors).
    pub f2d_sp: Tensor,
    /// `B x d` 3D spatial features (triplet candidates).
    pub f3d_sp: Tensor,
    /// HOI ids per sample.
    pub hoi_labels: Vec<Vec<u32>>,
    /// `B x 17` 2D part attention.
    pub a2d: Tensor,
    /// `B x 17` 3D part attention.
    pub a3d: Tensor,
}

/// Per-stream HOI scores for one batch, each `B x m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamScores {
    pub batch_id: String,
    pub s2d_h: Tensor,
    pub s2d_o: Tensor,
    pub s2d_sp: Tensor,
    pub s3d_h: Tensor,
    pub s3d_sp: Tensor,
    pub s_joint: Tensor,
    pub targets: Tensor,
}

impl StreamScores {
    fn named(&self) -> [(&'static str, &Tensor); 7] {
        [
            ("s2d_h", &self.s2d_h),
            ("s2d_o", &self.s2d_o),
            ("s2d_sp", &self.s2d_sp),
            ("s3d_h", &self.s3d_h),
            ("s3d_sp", &self.s3d_sp),
            ("s_joint", &self.s_joint),
            ("targets", &self.targets),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchInputs {
    pub features: FeatureBatch,
    pub scores: StreamScores,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOptions {
    pub weights: LossWeights,
    pub margin: f64,
    pub semantic_mode: SemanticMode,
    pub kl_smoothing: Option<f64>,
    /// Use these triplets instead of mining; the loss is then smooth in the
    /// features away from hinge kinks.
    pub fixed_triplets: Option<Vec<MinedTriplet>>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            margin: DEFAULT_MARGIN,
            semantic_mode: SemanticMode::default(),
            kl_smoothing: None,
            fixed_triplets: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub batch_id: String,
    #[serde(flatten)]
    pub breakdown: LossBreakdown,
    pub triplets: Vec<MinedTriplet>,
    pub skipped: Vec<(usize, SkipReason)>,
    /// Smallest `|d(a,p) - d(a,n) + margin|` over the used triplets.
    pub min_hinge_gap: Option<f64>,
    /// Smallest `|S2D_i - S3D_i|` over all samples and classes.
    pub min_semantic_gap: Option<f64>,
}

fn expect_rows(name: &str, t: &Tensor, rows: usize) -> Result<usize> {
    let (r, c) = t.dims2(name)?;
    if r != rows {
        return Err(Error::dim(format!("tensor {name} rows"), rows, r));
    }
    Ok(c)
}

fn expect_shape(name: &str, t: &Tensor, rows: usize, cols: usize) -> Result<()> {
    let c = expect_rows(name, t, rows)?;
    if c != cols {
        return Err(Error::dim(format!("tensor {name} columns"), cols, c));
    }
    Ok(())
}

/// Triplet, attention, semantic and classification losses averaged over the
/// batch, combined by the weighted total, with gradients for every tensor.
pub fn batch_losses(inputs: &BatchInputs, opts: &BatchOptions) -> Result<BatchReport> {
    let f = &inputs.features;
    let s = &inputs.scores;
    if f.batch_id != s.batch_id {
        return Err(Error::InvalidArgument(format!(
            "feature batch `{}` paired with score batch `{}`",
            f.batch_id, s.batch_id
        )));
    }
    let (b, d) = f.f2d_sp.dims2("f2d_sp")?;
    if b == 0 {
        return Err(Error::InvalidArgument(format!("batch `{}` is empty", f.batch_id)));
    }
    expect_shape("f3d_sp", &f.f3d_sp, b, d)?;
    if f.hoi_labels.len() != b {
        return Err(Error::dim("hoi_labels rows", b, f.hoi_labels.len()));
    }
    let k = expect_rows("a2d", &f.a2d, b)?;
    expect_shape("a3d", &f.a3d, b, k)?;
    let m = expect_rows("s2d_h", &s.s2d_h, b)?;
    for (name, t) in s.named() {
        expect_shape(name, t, b, m)?;
    }
    let bf = b as f64;

    // triplet alignment
    let anchors: Vec<SpatialFeature> = (0..b)
        .map(|i| SpatialFeature::new(f.f2d_sp.row(i).to_vec(), f.hoi_labels[i].iter().copied()))
        .collect();
    let candidates: Vec<SpatialFeature> = (0..b)
        .map(|i| SpatialFeature::new(f.f3d_sp.row(i).to_vec(), f.hoi_labels[i].iter().copied()))
        .collect();
    let (triplets, skipped) = match &opts.fixed_triplets {
        Some(t) => {
            if let Some(bad) = t.iter().find(|t| t.anchor.max(t.positive).max(t.negative) >= b) {
                return Err(Error::InvalidArgument(format!(
                    "triplet {bad:?} out of range for batch of {b}"
                )));
            }
            (t.clone(), Vec::new())
        }
        None => {
            let r = mine_semi_hard(&anchors, &candidates)?;
            (r.triplets, r.skipped)
        }
    };
    let mut g_f2d = f.f2d_sp.zeros_like();
    let mut g_f3d = f.f3d_sp.zeros_like();
    let mut l_tri = 0.0;
    let mut min_hinge_gap: Option<f64> = None;
    if !triplets.is_empty() {
        let nt = triplets.len() as f64;
        for t in &triplets {
            let r = triplet_loss(
                f.f2d_sp.row(t.anchor),
                f.f3d_sp.row(t.positive),
                f.f3d_sp.row(t.negative),
                opts.margin,
            )?;
            l_tri += r.loss / nt;
            min_hinge_gap = Some(min_hinge_gap.map_or(r.margin_gap.abs(), |g| g.min(r.margin_gap.abs())));
            add_scaled(g_f2d.row_mut(t.anchor), &r.grad_anchor, 1.0 / nt);
            add_scaled(g_f3d.row_mut(t.positive), &r.grad_positive, 1.0 / nt);
            add_scaled(g_f3d.row_mut(t.negative), &r.grad_negative, 1.0 / nt);
        }
    }

    // attention consistency
    let mut g_a2d = f.a2d.zeros_like();
    let mut g_a3d = f.a3d.zeros_like();
    let mut l_att = 0.0;
    for i in 0..b {
        let r = kl_divergence(f.a2d.row(i), f.a3d.row(i), opts.kl_smoothing)?;
        l_att += r.loss / bf;
        add_scaled(g_a2d.row_mut(i), &r.grad_a2d, 1.0 / bf);
        add_scaled(g_a3d.row_mut(i), &r.grad_a3d, 1.0 / bf);
    }

    // semantic consistency on the fused stream scores, and classification
    let mut grads: Vec<Tensor> = [&s.s2d_h, &s.s2d_o, &s.s2d_sp, &s.s3d_h, &s.s3d_sp, &s.s_joint]
        .iter()
        .map(|t| t.zeros_like())
        .collect();
    let mut sem_grads = grads.clone();
    let mut l_sem = 0.0;
    let mut min_semantic_gap: Option<f64> = None;
    let mut cls = [0.0; 3];
    for i in 0..b {
        let (h, o, sp) = (s.s2d_h.row(i), s.s2d_o.row(i), s.s2d_sp.row(i));
        let (h3, sp3, joint) = (s.s3d_h.row(i), s.s3d_sp.row(i), s.s_joint.row(i));
        let fused = fuse_scores(h, o, sp, h3, sp3, joint)?;
        let r = semantic_consistency(&fused.s2d, &fused.s3d, opts.semantic_mode)?;
        l_sem += r.loss / bf;
        for (a, c) in fused.s2d.iter().zip(&fused.s3d) {
            let gap = (a - c).abs();
            min_semantic_gap = Some(min_semantic_gap.map_or(gap, |g| g.min(gap)));
        }
        for j in 0..m {
            let g2 = r.grad_first[j] / bf;
            let g3 = r.grad_second[j] / bf;
            sem_grads[0].row_mut(i)[j] += g2 * sp[j];
            sem_grads[1].row_mut(i)[j] += g2 * sp[j];
            sem_grads[2].row_mut(i)[j] += g2 * (h[j] + o[j]);
            sem_grads[3].row_mut(i)[j] += g3;
            sem_grads[4].row_mut(i)[j] += g3;
        }
        let t = s.targets.row(i);
        // stream groups: 2D, 3D, joint
        for (slot, scores, group) in [
            (0usize, h, 0usize),
            (1, o, 0),
            (2, sp, 0),
            (3, h3, 1),
            (4, sp3, 1),
            (5, joint, 2),
        ] {
            let r = bce_multilabel(scores, t)?;
            cls[group] += r.loss / bf;
            add_scaled(grads[slot].row_mut(i), &r.grad_scores, 1.0 / bf);
        }
    }

    let names = ["s2d_h", "s2d_o", "s2d_sp", "s3d_h", "s3d_sp", "s_joint"];
    let mut sem = Component::new(l_sem);
    for (name, g) in names.iter().zip(sem_grads) {
        sem = sem.with_grad(name, g.data);
    }
    let grads: Vec<Vec<f64>> = grads.into_iter().map(|t| t.data).collect();
    let parts = LossInputs {
        tri: Component::new(l_tri)
            .with_grad("f2d_sp", g_f2d.data)
            .with_grad("f3d_sp", g_f3d.data),
        att: Component::new(l_att)
            .with_grad("a2d", g_a2d.data)
            .with_grad("a3d", g_a3d.data),
        sem,
        cls_2d: Component::new(cls[0])
            .with_grad("s2d_h", grads[0].clone())
            .with_grad("s2d_o", grads[1].clone())
            .with_grad("s2d_sp", grads[2].clone()),
        cls_3d: Component::new(cls[1])
            .with_grad("s3d_h", grads[3].clone())
            .with_grad("s3d_sp", grads[4].clone()),
        cls_joint: Component::new(cls[2]).with_grad("s_joint", grads[5].clone()),
    };
    Ok(BatchReport {
        batch_id: f.batch_id.clone(),
        breakdown: total_loss(&parts, &opts.weights)?,
        triplets,
        skipped,
        min_hinge_gap,
        min_semantic_gap,
    })
}

fn add_scaled(dst: &mut [f64], src: &[f64], k: f64) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += k * s);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{random_batch, relative_error};

    #[test]
    fn zero_difference_scores_give_zero_semantic_loss() {
        let mut inp = random_batch(4, 5, 6, 7);
        // S2D = (h + o) * sp = S3D when h3 = (h + o) * sp and sp3 = 0
        for i in 0..4 {
            for j in 0..6 {
                let v = (inp.scores.s2d_h.row(i)[j] + inp.scores.s2d_o.row(i)[j]) * inp.scores.s2d_sp.row(i)[j];
                inp.scores.s3d_h.row_mut(i)[j] = v;
                inp.scores.s3d_sp.row_mut(i)[j] = 0.0;
            }
        }
        inp.features.a3d = inp.features.a2d.clone();
        let r = batch_losses(&inp, &BatchOptions::default()).unwrap();
        assert_eq!(r.breakdown.l_sem, 0.0);
        assert_eq!(r.breakdown.l_att, 0.0);
    }

    #[test]
    fn named_shape_errors() {
        let mut inp = random_batch(3, 4, 5, 1);
        inp.scores.s3d_sp = Tensor::matrix(3, 4, vec![0.5; 12]).unwrap();
        let e = batch_losses(&inp, &BatchOptions::default()).unwrap_err().to_string();
        assert!(e.contains("s3d_sp"), "{e}");
        let mut inp = random_batch(3, 4, 5, 1);
        inp.scores.batch_id = "other".into();
        assert!(batch_losses(&inp, &BatchOptions::default()).is_err());
    }

    #[test]
    fn totals_match_component_sums() {
        let inp = random_batch(8, 6, 10, 3);
        let w = LossWeights::default();
        let r = batch_losses(&inp, &BatchOptions::default()).unwrap().breakdown;
        let manual =
            w.tri * r.l_tri + w.att * r.l_att + w.sem * r.l_sem + w.cls * (r.l_cls_2d + r.l_cls_3d + r.l_cls_joint);
        assert!((r.total - manual).abs() < 1e-10);
    }

    #[test]
    fn total_gradient_matches_fd_per_tensor() {
        let inp = random_batch(6, 5, 7, 11);
        let mined = batch_losses(&inp, &BatchOptions::default()).unwrap();
        let opts = BatchOptions {
            fixed_triplets: Some(mined.triplets.clone()),
            ..Default::default()
        };
        let g = &mined.breakdown.gradients;
        let h = 1e-5;
        for key in ["f2d_sp", "a3d", "s2d_sp", "s_joint"] {
            let base = crate::gradcheck::tensor_ref(&inp, key).data.clone();
            let mut fd = vec![0.0; base.len()];
            for i in 0..base.len() {
                let eval = |delta: f64| {
                    let mut x = inp.clone();
                    crate::gradcheck::tensor_mut(&mut x, key).data[i] += delta;
                    batch_losses(&x, &opts).unwrap().breakdown.total
                };
                fd[i] = (eval(h) - eval(-h)) / (2.0 * h);
            }
            assert!(relative_error(&g[key], &fd) < 1e-4, "{key}");
        }
    }
}
