//! Pose-ambiguity ranking: align 2D poses to templates with a similarity
//! transform, cluster the aligned poses and rank samples by their distance to
//! the assigned cluster center. Also the latent-embedding outlier filter.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{Joint2D, Pose2D};

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-6;
pub const DEFAULT_MONSTER_FRACTION: f64 = 0.10;
pub const DEFAULT_PROBE_WEIGHT: f64 = 0.5;

/// `dst ~ scale * R(angle) * src + translation`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity2D {
    pub scale: f64,
    pub angle: f64,
    pub translation: (f64, f64),
}

impl Similarity2D {
    pub fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        (
            self.scale * (c * u - s * v) + self.translation.0,
            self.scale * (s * u + c * v) + self.translation.1,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// `src` mapped by the fitted transform, visibility unchanged.
    pub aligned: Pose2D,
    pub transform: Similarity2D,
    /// Root mean square joint distance over the joints used for the fit.
    pub residual: f64,
    pub used: Vec<usize>,
}

/// Least-squares similarity (no reflection) from `src` onto `dst` over the
/// joints visible in both.
///
/// With points as complex numbers and both sets centered, the optimal
/// `scale * e^{i angle}` is `sum conj(x) y / sum |x|^2`.
pub fn procrustes_align(src: &Pose2D, dst: &Pose2D) -> Result<Alignment> {
    if src.joints.len() != dst.joints.len() {
        return Err(Error::dim("pose joints", dst.joints.len(), src.joints.len()));
    }
    let used: Vec<usize> = (0..src.joints.len())
        .filter(|&i| src.joints[i].visible && dst.joints[i].visible)
        .collect();
    if used.len() < 3 {
        return Err(Error::TooFewJoints(used.len()));
    }
    let n = used.len() as f64;
    let mean = |p: &Pose2D| {
        let (su, sv) = used
            .iter()
            .fold((0.0, 0.0), |(a, b), &i| (a + p.joints[i].u, b + p.joints[i].v));
        (su / n, sv / n)
    };
    let (mx, my) = mean(src);
    let (nx, ny) = mean(dst);
    let (mut re, mut im, mut var) = (0.0, 0.0, 0.0);
    for &i in &used {
        let (xu, xv) = (src.joints[i].u - mx, src.joints[i].v - my);
        let (yu, yv) = (dst.joints[i].u - nx, dst.joints[i].v - ny);
        re += xu * yu + xv * yv;
        im += xu * yv - xv * yu;
        var += xu * xu + xv * xv;
    }
    if !(var > 0.0) {
        return Err(Error::DegenerateFrame("source pose has zero variance".into()));
    }
    let (a, b) = (re / var, im / var);
    let scale = a.hypot(b);
    let angle = b.atan2(a);
    let translation = (nx - (a * mx - b * my), ny - (b * mx + a * my));
    let transform = Similarity2D {
        scale,
        angle,
        translation,
    };
    let map = |j: &Joint2D| Joint2D {
        u: a * j.u - b * j.v + translation.0,
        v: b * j.u + a * j.v + translation.1,
        visible: j.visible,
    };
    let aligned = Pose2D {
        joints: src.joints.iter().map(map).collect(),
    };
    let sq: f64 = used
        .iter()
        .map(|&i| {
            let (p, q) = (&aligned.joints[i], &dst.joints[i]);
            (p.u - q.u).powi(2) + (p.v - q.v).powi(2)
        })
        .sum();
    Ok(Alignment {
        aligned,
        transform,
        residual: (sq / n).sqrt(),
        used,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centers: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

/// Lloyd iterations from a seeded k-means++ start. Ties in assignment go to
/// the lower center index; an empty cluster keeps its previous center.
pub fn kmeans(data: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("k-means on an empty set".into()));
    }
    if k == 0 || k > data.len() {
        return Err(Error::InvalidArgument(format!("k = {k} with {} samples", data.len())));
    }
    let dim = data[0].len();
    if let Some(bad) = data.iter().find(|r| r.len() != dim) {
        return Err(Error::dim("k-means sample", dim, bad.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![data[rng.gen_range(0..data.len())].clone()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.gen::<f64>() * total;
            let mut idx = data.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if *w > 0.0 && t < *w {
                    idx = i;
                    break;
                }
                t -= w;
            }
            idx
        } else {
            rng.gen_range(0..data.len())
        };
        centers.push(data[pick].clone());
        for (d, x) in d2.iter_mut().zip(data) {
            *d = d.min(sq_dist(x, &centers[centers.len() - 1]));
        }
    }

    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        data.iter()
            .map(|x| {
                let mut best = (f64::INFINITY, 0);
                for (c, center) in centers.iter().enumerate() {
                    let d = sq_dist(x, center);
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                best.1
            })
            .collect()
    };
    let mut assignment = assign(&centers);
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &c) in data.iter().zip(&assignment) {
            counts[c] += 1;
            sums[c].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let new: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            shift = shift.max(sq_dist(&new, &centers[c]).sqrt());
            centers[c] = new;
        }
        assignment = assign(&centers);
        if shift < KMEANS_TOL {
            break;
        }
    }
    Ok(KMeans {
        centers,
        assignment,
        iterations,
    })
}

/// One line of the pose input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub sample_id: String,
    #[serde(default)]
    pub hoi_ids: Vec<u32>,
    pub pose: Pose2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityRecord {
    pub sample_id: String,
    /// Distance to the assigned cluster center, one per template.
    pub distances: Vec<f64>,
    pub mean_distance: f64,
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSample {
    pub sample_id: String,
    pub template: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Ranking {
    pub records: Vec<AmbiguityRecord>,
    pub skipped: Vec<SkippedSample>,
}

/// Aligned joint coordinates; joints hidden in the sample take the
/// template's position so they add no deviation from the template.
fn aligned_vector(al: &Alignment, template: &Pose2D) -> Vec<f64> {
    al.aligned
        .joints
        .iter()
        .zip(&template.joints)
        .flat_map(|(j, t)| if j.visible { [j.u, j.v] } else { [t.u, t.v] })
        .collect()
}

/// Align every sample to each template, cluster the aligned poses with
/// k-means and record each sample's distance to its center. Samples that
/// cannot be aligned to some template are reported and left out. Records are
/// sorted by descending mean distance, ties by sample id.
pub fn cluster_and_rank(samples: &[PoseSample], templates: &[Pose2D], k: usize, seed: u64) -> Result<Ranking> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to rank".into()));
    }
    if templates.is_empty() {
        return Err(Error::InvalidArgument("no templates".into()));
    }
    let mut sorted: Vec<&PoseSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].sample_id == w[1].sample_id) {
        return Err(Error::InvalidArgument(format!(
            "duplicate sample id `{}`",
            w[0].sample_id
        )));
    }

    let mut skipped = Vec::new();
    let mut vectors: Vec<BTreeMap<usize, Vec<f64>>> = vec![BTreeMap::new(); templates.len()];
    let mut dropped = BTreeSet::new();
    for (t, template) in templates.iter().enumerate() {
        for (i, s) in sorted.iter().enumerate() {
            match procrustes_align(&s.pose, template) {
                Ok(al) => {
                    vectors[t].insert(i, aligned_vector(&al, template));
                }
                Err(e) => {
                    dropped.insert(i);
                    skipped.push(SkippedSample {
                        sample_id: s.sample_id.clone(),
                        template: t,
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
    let kept: Vec<usize> = (0..sorted.len()).filter(|i| !dropped.contains(i)).collect();
    if kept.is_empty() {
        return Ok(Ranking {
            records: Vec::new(),
            skipped,
        });
    }
    let k = k.clamp(1, kept.len());
    let mut distances = vec![Vec::with_capacity(templates.len()); kept.len()];
    for (t, per_template) in vectors.iter().enumerate() {
        let data: Vec<Vec<f64>> = kept.iter().map(|i| per_template[i].clone()).collect();
        let km = kmeans(&data, k, seed.wrapping_add(t as u64))?;
        for (r, x) in data.iter().enumerate() {
            distances[r].push(sq_dist(x, &km.centers[km.assignment[r]]).sqrt());
        }
    }
    let mut records: Vec<AmbiguityRecord> = kept
        .iter()
        .zip(distances)
        .map(|(&i, d)| AmbiguityRecord {
            sample_id: sorted[i].sample_id.clone(),
            mean_distance: d.iter().sum::<f64>() / d.len() as f64,
            distances: d,
            rank: 0,
            probe: None,
            combined: None,
        })
        .collect();
    sort_and_rank(&mut records, |r| r.mean_distance);
    Ok(Ranking { records, skipped })
}

fn sort_and_rank(records: &mut [AmbiguityRecord], key: impl Fn(&AmbiguityRecord) -> f64) {
    records.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.sample_id.cmp(&b.sample_id)));
    for (i, r) in records.iter_mut().enumerate() {
        r.rank = i + 1;
    }
}

/// Blend an external per-sample probe score with the distance ranking:
/// `combined = w * mean_distance / max_mean_distance + (1 - w) * probe`,
/// then re-rank by `combined`.
pub fn combine_with_probe(records: &mut [AmbiguityRecord], probes: &BTreeMap<String, f64>, weight: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidArgument(format!("probe weight {weight} outside [0, 1]")));
    }
    let max = records.iter().map(|r| r.mean_distance).fold(0.0, f64::max);
    for r in records.iter_mut() {
        let p = *probes
            .get(&r.sample_id)
            .ok_or_else(|| Error::InvalidArgument(format!("no probe score for `{}`", r.sample_id)))?;
        let norm = if max > 0.0 { r.mean_distance / max } else { 0.0 };
        r.probe = Some(p);
        r.combined = Some(weight * norm + (1.0 - weight) * p);
    }
    sort_and_rank(records, |r| r.combined.unwrap_or(0.0));
    Ok(())
}

/// `sample_id,mean_distance,rank[,probe,combined]`
pub fn ranking_csv(records: &[AmbiguityRecord]) -> String {
    let with_probe = records.iter().any(|r| r.combined.is_some());
    let mut s = String::from(if with_probe {
        "sample_id,mean_distance,rank,probe,combined\n"
    } else {
        "sample_id,mean_distance,rank\n"
    });
    for r in records {
        s.push_str(&format!("{},{},{}", r.sample_id, r.mean_distance, r.rank));
        if with_probe {
            s.push_str(&format!(
                ",{},{}",
                r.probe.unwrap_or(f64::NAN),
                r.combined.unwrap_or(f64::NAN)
            ));
        }
        s.push('\n');
    }
    s
}

/// Number of samples flagged for `fraction` of `n`: `ceil(fraction * n)`,
/// with a small tolerance so that e.g. `0.1 * 30` yields 3.
pub fn monster_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Euclidean distance of every embedding to the mean embedding.
pub fn distances_to_mean(embeddings: &[Vec<f64>]) -> Result<Vec<f64>> {
    if embeddings.is_empty() {
        return Err(Error::InvalidArgument("no embeddings".into()));
    }
    let d = embeddings[0].len();
    let mut mean = vec![0.0; d];
    for e in embeddings {
        if e.len() != d {
            return Err(Error::dim("embedding", d, e.len()));
        }
        if e.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embedding".into()));
        }
        mean.iter_mut().zip(e).for_each(|(m, x)| *m += x);
    }
    let n = embeddings.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(embeddings.iter().map(|e| sq_dist(e, &mean).sqrt()).collect())
}

/// Flag the `ceil(fraction * n)` embeddings farthest from the mean embedding.
/// Ties go to the lower index.
pub fn monster_filter(embeddings: &[Vec<f64>], fraction: f64) -> Result<Vec<bool>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("fraction {fraction} outside (0, 1)")));
    }
    let dist = distances_to_mean(embeddings)?;
    let n = dist.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    let mut flags = vec![false; n];
    for &i in order.iter().take(monster_count(n, fraction)) {
        flags[i] = true;
    }
    Ok(flags)
}
