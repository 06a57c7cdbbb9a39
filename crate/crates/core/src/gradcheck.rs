//! Central-difference verification of the analytic loss gradients.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::kl_divergence;
use crate::error::{Error, Result};
use crate::losses::{
    batch_losses, bce_multilabel, semantic_consistency, triplet_loss, BatchInputs, BatchOptions, FeatureBatch,
    SemanticMode, StreamScores, DEFAULT_MARGIN,
};
use crate::skeleton::NUM_JOINTS;
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const KINK_EXCLUSION: f64 = 1e-3;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut buf = x.to_vec();
    (0..x.len())
        .map(|i| {
            buf[i] = x[i] + h;
            let up = f(&buf);
            buf[i] = x[i] - h;
            let down = f(&buf);
            buf[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    if scale < 1e-300 {
        0.0
    } else {
        diff / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Triplet,
    Kl,
    Semantic,
    Bce,
    Total,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [Self::Triplet, Self::Kl, Self::Semantic, Self::Bce, Self::Total];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Triplet => "triplet",
            Self::Kl => "kl",
            Self::Semantic => "semantic",
            Self::Bce => "bce",
            Self::Total => "total",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown loss `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    pub first_seed: u64,
    pub cases: u64,
    /// Feature dimension for the triplet loss and batch features.
    pub dim: usize,
    /// Number of HOI classes.
    pub classes: usize,
    pub batch: usize,
    pub step: f64,
    pub tolerance: f64,
    pub kink: f64,
    /// Scale the analytic gradient of this loss by 1.5 (test hook).
    pub inject_fault: Option<LossKind>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            first_seed: 0,
            cases: 100,
            dim: 8,
            classes: 10,
            batch: 6,
            step: DEFAULT_STEP,
            tolerance: DEFAULT_TOLERANCE,
            kink: KINK_EXCLUSION,
            inject_fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckRow {
    pub loss: LossKind,
    pub cases: usize,
    /// Cases dropped because they sit within `kink` of a non-smooth point.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

pub fn run_grad_check(cfg: &GradCheckConfig) -> Result<Vec<GradCheckRow>> {
    if cfg.dim == 0 || cfg.classes == 0 || cfg.batch == 0 {
        return Err(Error::InvalidArgument("grad-check dimensions must be positive".into()));
    }
    if cfg.cases == 0 {
        return Err(Error::InvalidArgument("grad-check needs at least one case".into()));
    }
    LossKind::ALL.iter().map(|&k| check_loss(k, cfg)).collect()
}

pub fn check_loss(kind: LossKind, cfg: &GradCheckConfig) -> Result<GradCheckRow> {
    let mut row = GradCheckRow {
        loss: kind,
        cases: 0,
        skipped: 0,
        max_rel_error: 0.0,
        passed: true,
    };
    for seed in cfg.first_seed..cfg.first_seed + cfg.cases {
        match case_error(kind, cfg, seed)? {
            Some(e) => {
                row.cases += 1;
                row.max_rel_error = row.max_rel_error.max(e);
            }
            None => row.skipped += 1,
        }
    }
    row.passed = row.max_rel_error <= cfg.tolerance;
    Ok(row)
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Random point of the simplex with every entry at least `floor / n`.
pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| floor + rng.gen::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Relative error for one seeded case, or `None` if it sits on a kink.
fn case_error(kind: LossKind, cfg: &GradCheckConfig, seed: u64) -> Result<Option<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind as u64 + 1);
    let h = cfg.step;
    let (mut analytic, numeric) = match kind {
        LossKind::Triplet => {
            let d = cfg.dim;
            let x = uniform_vec(&mut rng, 3 * d, -1.0, 1.0);
            let split = |x: &[f64]| (x[..d].to_vec(), x[d..2 * d].to_vec(), x[2 * d..].to_vec());
            let (a, p, n) = split(&x);
            let r = triplet_loss(&a, &p, &n, DEFAULT_MARGIN)?;
            if r.margin_gap.abs() < cfg.kink {
                return Ok(None);
            }
            let analytic = [r.grad_anchor, r.grad_positive, r.grad_negative].concat();
            let fd = central_difference(
                |x| {
                    let (a, p, n) = split(x);
                    triplet_loss(&a, &p, &n, DEFAULT_MARGIN).map_or(f64::NAN, |r| r.loss)
                },
                &x,
                h,
            );
            (analytic, fd)
        }
        LossKind::Kl => {
            let n = NUM_JOINTS;
            let x = [random_simplex(&mut rng, n, 0.05), random_simplex(&mut rng, n, 0.05)].concat();
            let r = kl_divergence(&x[..n], &x[n..], None)?;
            let fd = central_difference(
                |x| kl_divergence(&x[..n], &x[n..], None).map_or(f64::NAN, |r| r.loss),
                &x,
                h,
            );
            ([r.grad_a2d, r.grad_a3d].concat(), fd)
        }
        LossKind::Semantic => {
            let m = cfg.classes;
            let x = uniform_vec(&mut rng, 2 * m, 0.0, 1.0);
            if (0..m).any(|i| (x[i] - x[m + i]).abs() < cfg.kink) {
                return Ok(None);
            }
            let mode = SemanticMode::PerClassAbs;
            let r = semantic_consistency(&x[..m], &x[m..], mode)?;
            let fd = central_difference(
                |x| semantic_consistency(&x[..m], &x[m..], mode).map_or(f64::NAN, |r| r.loss),
                &x,
                h,
            );
            ([r.grad_first, r.grad_second].concat(), fd)
        }
        LossKind::Bce => {
            let m = cfg.classes;
            let s = uniform_vec(&mut rng, m, 0.02, 0.98);
            let t: Vec<f64> = (0..m).map(|_| if rng.gen::<bool>() { 1.0 } else { 0.0 }).collect();
            let r = bce_multilabel(&s, &t)?;
            let fd = central_difference(|x| bce_multilabel(x, &t).map_or(f64::NAN, |r| r.loss), &s, h);
            (r.grad_scores, fd)
        }
        LossKind::Total => {
            let inputs = random_batch(cfg.batch, cfg.dim, cfg.classes, rng.gen());
            let mined = batch_losses(&inputs, &BatchOptions::default())?;
            let near_kink = |g: Option<f64>| g.is_some_and(|g| g < cfg.kink);
            if near_kink(mined.min_hinge_gap) || near_kink(mined.min_semantic_gap) {
                return Ok(None);
            }
            // on a smooth piece the mined selection is locally constant
            let opts = BatchOptions {
                fixed_triplets: Some(mined.triplets.clone()),
                ..Default::default()
            };
            let mut analytic = Vec::new();
            let mut numeric = Vec::new();
            for key in TENSOR_KEYS {
                let len = tensor_ref(&inputs, key).data.len();
                let mut work = inputs.clone();
                for i in 0..len {
                    let orig = tensor_ref(&inputs, key).data[i];
                    tensor_mut(&mut work, key).data[i] = orig + h;
                    let up = batch_losses(&work, &opts)?.breakdown.total;
                    tensor_mut(&mut work, key).data[i] = orig - h;
                    let down = batch_losses(&work, &opts)?.breakdown.total;
                    tensor_mut(&mut work, key).data[i] = orig;
                    numeric.push((up - down) / (2.0 * h));
                }
                analytic.extend_from_slice(&mined.breakdown.gradients[key]);
            }
            (analytic, numeric)
        }
    };
    if cfg.inject_fault == Some(kind) {
        analytic.iter_mut().for_each(|g| *g *= 1.5);
    }
    Ok(Some(relative_error(&analytic, &numeric)))
}

/// Every differentiable tensor of a batch, in gradient-report order.
pub const TENSOR_KEYS: [&str; 10] = [
    "f2d_sp", "f3d_sp", "a2d", "a3d", "s2d_h", "s2d_o", "s2d_sp", "s3d_h", "s3d_sp", "s_joint",
];

pub fn tensor_ref<'a>(b: &'a BatchInputs, key: &str) -> &'a Tensor {
    let (f, s) = (&b.features, &b.scores);
    match key {
        "f2d_sp" => &f.f2d_sp,
        "f3d_sp" => &f.f3d_sp,
        "a2d" => &f.a2d,
        "a3d" => &f.a3d,
        "s2d_h" => &s.s2d_h,
        "s2d_o" => &s.s2d_o,
        "s2d_sp" => &s.s2d_sp,
        "s3d_h" => &s.s3d_h,
        "s3d_sp" => &s.s3d_sp,
        "s_joint" => &s.s_joint,
        "targets" => &s.targets,
        other => panic!("no tensor named {other}"),
    }
}

pub fn tensor_mut<'a>(b: &'a mut BatchInputs, key: &str) -> &'a mut Tensor {
    let (f, s) = (&mut b.features, &mut b.scores);
    match key {
        "f2d_sp" => &mut f.f2d_sp,
        "f3d_sp" => &mut f.f3d_sp,
        "a2d" => &mut f.a2d,
        "a3d" => &mut f.a3d,
        "s2d_h" => &mut s.s2d_h,
        "s2d_o" => &mut s.s2d_o,
        "s2d_sp" => &mut s.s2d_sp,
        "s3d_h" => &mut s.s3d_h,
        "s3d_sp" => &mut s.s3d_sp,
        "s_joint" => &mut s.s_joint,
        "targets" => &mut s.targets,
        other => panic!("no tensor named {other}"),
    }
}

/// Synthetic batch of `b` samples with `d`-dim features and `m` classes.
/// Labels are drawn from four HOI ids so mining finds both positives and
/// negatives most of the time.
pub fn random_batch(b: usize, d: usize, m: usize, seed: u64) -> BatchInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mat = |rng: &mut ChaCha8Rng, cols: usize, lo: f64, hi: f64| {
        Tensor::matrix(b, cols, uniform_vec(rng, b * cols, lo, hi)).expect("shape")
    };
    let f2d_sp = mat(&mut rng, d, -1.0, 1.0);
    let f3d_sp = mat(&mut rng, d, -1.0, 1.0);
    let hoi_labels = (0..b)
        .map(|_| {
            let mut l: Vec<u32> = (0..4).filter(|_| rng.gen_bool(0.35)).collect();
            if l.is_empty() {
                l.push(rng.gen_range(0..4));
            }
            l
        })
        .collect();
    let simplex_rows = |rng: &mut ChaCha8Rng| {
        let rows: Vec<Vec<f64>> = (0..b).map(|_| random_simplex(rng, NUM_JOINTS, 0.05)).collect();
        Tensor::from_rows(&rows).expect("shape")
    };
    let a2d = simplex_rows(&mut rng);
    let a3d = simplex_rows(&mut rng);
    let scores = StreamScores {
        batch_id: format!("batch-{seed}"),
        s2d_h: mat(&mut rng, m, 0.02, 0.98),
        s2d_o: mat(&mut rng, m, 0.02, 0.98),
        s2d_sp: mat(&mut rng, m, 0.02, 0.98),
        s3d_h: mat(&mut rng, m, 0.02, 0.98),
        s3d_sp: mat(&mut rng, m, 0.02, 0.98),
        s_joint: mat(&mut rng, m, 0.02, 0.98),
        targets: Tensor::matrix(
            b,
            m,
            (0..b * m).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect(),
        )
        .expect("shape"),
    };
    BatchInputs {
        features: FeatureBatch {
            batch_id: format!("batch-{seed}"),
            f2d_sp,
            f3d_sp,
            hoi_labels,
            a2d,
            a3d,
        },
        scores,
    }
}
