//! Command-line front end. Every subcommand reads files, writes files and
//! reports through its exit code: 0 on success, 1 when some items failed,
//! 2 on configuration or parse errors.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{
    cluster_and_rank, combine_with_probe, distances_to_mean, monster_filter, ranking_csv, PoseSample,
};
use crate::config::{item_seed, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::{estimate_sphere, BodySummary, Box2D, Camera, Point3, SphereEstimate};
use crate::gradcheck::{run_grad_check, GradCheckConfig, LossKind};
use crate::losses::{batch_losses, BatchInputs, BatchOptions, BatchReport, FeatureBatch, StreamScores};
use crate::maps2d::{make_pose_map, make_spatial_map};
use crate::priors::{load_priors, PriorTable};
use crate::skeleton::{Joint2D, Pose2D, NUM_JOINTS};
use crate::tensor::read_json;
use crate::volume::{
    build_volume, pair_semantics_with, read_ply_points, BodyPoints, EmbeddingTable, ReducedEmbeddings, VolumeFormat,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Gradient errors above this fail the `grad-check` subcommand.
pub const GRAD_CHECK_LIMIT: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "hoi3d", version, about = "3D human-object spatial configuration tools")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build one configuration volume per detected human-object pair.
    BuildVolume(BuildVolumeArgs),
    /// Evaluate every loss component on dumped features and scores.
    Losses(LossesArgs),
    /// Compare analytic loss gradients with central differences.
    GradCheck(GradCheckArgs),
    /// Rank pose samples by distance to their cluster centers.
    Ambiguity(AmbiguityArgs),
    /// Flag latent embeddings far from the mean embedding.
    MonsterFilter(MonsterArgs),
    /// Prior table utilities.
    #[command(subcommand)]
    Priors(PriorsCommand),
}

#[derive(Debug, Args)]
pub struct BuildVolumeArgs {
    /// JSON array of detection records.
    #[arg(long)]
    pub detections: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Volume formats to write (repeatable); defaults to the configured list.
    #[arg(long = "format")]
    pub formats: Vec<VolumeFormat>,
    /// Also write the 2D spatial and pose maps as CSV.
    #[arg(long)]
    pub dump_maps: bool,
}

#[derive(Debug, Args)]
pub struct LossesArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include gradients in the report.
    #[arg(long)]
    pub gradients: bool,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    /// Number of seeded cases per loss.
    #[arg(long, default_value_t = 100)]
    pub seeds: u64,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 6)]
    pub batch: usize,
    /// JSON report; a table is always printed to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, hide = true)]
    pub inject_fault: Option<LossKind>,
}

#[derive(Debug, Args)]
pub struct AmbiguityArgs {
    /// JSON lines of `{sample_id, hoi_ids, pose}`.
    #[arg(long)]
    pub poses: PathBuf,
    /// JSON array of template poses.
    #[arg(long)]
    pub templates: PathBuf,
    /// Number of clusters; defaults to the configured value.
    #[arg(long)]
    pub k: Option<usize>,
    /// CSV `sample_id,probe` of external ambiguity scores.
    #[arg(long)]
    pub probes: Option<PathBuf>,
    #[arg(long)]
    pub probe_weight: Option<f64>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MonsterArgs {
    /// CSV with a header; first column `sample_id`, remaining columns the embedding.
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PriorsCommand {
    /// Check a prior table (the bundled one when no path is given).
    Validate { path: Option<PathBuf> },
}

/// One human-object pair of the detection file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    /// Output key; `{image_id}-{n}` for the n-th pair of an image when absent.
    #[serde(default)]
    pub pair_id: Option<String>,
    pub image_id: String,
    pub human_box: Box2D,
    pub object_box: Box2D,
    pub object_category: String,
    /// Body joints first; extra entries are accepted and ignored.
    pub pose2d: Vec<Joint2D>,
    #[serde(default)]
    pub face: Vec<Joint2D>,
    #[serde(default)]
    pub hands: Vec<Joint2D>,
    /// Recovered body vertices, `.ply` or `x y z` text, relative to the detection file.
    pub body_points_path: PathBuf,
    pub joints3d: Vec<[f64; 3]>,
    #[serde(default)]
    pub gravity: Option<[f64; 3]>,
    #[serde(default)]
    pub hoi_labels: Vec<u32>,
    /// `[width, height]`; the principal point is the image center.
    #[serde(default)]
    pub image_size: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDump {
    pub batches: Vec<FeatureBatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDump {
    pub batches: Vec<StreamScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub batches: Vec<BatchReport>,
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_OK
            }
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::BuildVolume(a) => cmd_build_volume(&a, &cfg),
        Command::Losses(a) => cmd_losses(&a, &cfg),
        Command::GradCheck(a) => cmd_grad_check(&a, &cfg),
        Command::Ambiguity(a) => cmd_ambiguity(&a, &cfg),
        Command::MonsterFilter(a) => cmd_monster_filter(&a, &cfg),
        Command::Priors(PriorsCommand::Validate { path }) => cmd_priors_validate(path.as_deref(), &cfg),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn load_table(cfg: &RunConfig, explicit: Option<&Path>) -> Result<PriorTable> {
    match explicit.or(cfg.priors.as_deref()) {
        Some(p) => load_priors(p),
        None => Ok(PriorTable::bundled()),
    }
}

/// Assign output keys: explicit `pair_id`, else `{image_id}-{n}` by order of
/// appearance within the image.
pub fn pair_ids(records: &[DetectionRecord]) -> Result<Vec<String>> {
    let mut per_image: BTreeMap<&str, usize> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut ids = Vec::with_capacity(records.len());
    for r in records {
        let n = per_image.entry(&r.image_id).or_insert(0);
        let id = r.pair_id.clone().unwrap_or_else(|| format!("{}-{}", r.image_id, n));
        *n += 1;
        if id.is_empty() || id.contains(['/', '\\']) {
            return Err(Error::InvalidArgument(format!(
                "pair id `{id}` is not a valid file stem"
            )));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::InvalidArgument(format!("duplicate pair id `{id}`")));
        }
        ids.push(id);
    }
    Ok(ids)
}

struct PairContext<'a> {
    cfg: &'a RunConfig,
    priors: &'a PriorTable,
    reduced: Option<&'a ReducedEmbeddings>,
    base_dir: &'a Path,
    out_dir: &'a Path,
    formats: &'a [VolumeFormat],
    dump_maps: bool,
}

fn process_pair(ctx: &PairContext<'_>, id: &str, rec: &DetectionRecord) -> Result<SphereEstimate> {
    let cfg = ctx.cfg;
    let body_path = if rec.body_points_path.is_relative() {
        ctx.base_dir.join(&rec.body_points_path)
    } else {
        rec.body_points_path.clone()
    };
    let vertices = read_ply_points(&body_path)?;
    let joints: Vec<Point3> = rec.joints3d.iter().map(|j| Point3::new(j[0], j[1], j[2])).collect();
    let summary = BodySummary::from_body(&joints, &vertices)?;
    let [w, h] = rec
        .image_size
        .or(cfg.image_size)
        .ok_or_else(|| Error::InvalidArgument("image size unknown (set image_size in the record or config)".into()))?;
    let cam = Camera::new(cfg.focal, (w / 2.0, h / 2.0))?;
    let est = estimate_sphere(
        &cam,
        &rec.human_box,
        &rec.object_box,
        &rec.object_category,
        ctx.priors,
        &summary,
    )?;
    let body = BodyPoints::new(vertices, joints)?;
    let g = rec.gravity.unwrap_or(cfg.gravity);
    let mut vol = build_volume(
        &body,
        &est,
        &rec.object_category,
        &Vector3::new(g[0], g[1], g[2]),
        item_seed(cfg.seed, id),
    )?;
    if let Some(r) = ctx.reduced {
        vol = pair_semantics_with(&vol, r)?;
    }
    vol.validate()?;
    let mut files = Vec::new();
    for f in ctx.formats {
        files.push((ctx.out_dir.join(format!("{id}.{}", f.extension())), f.encode(&vol)?));
    }
    if ctx.dump_maps {
        if rec.pose2d.len() < NUM_JOINTS {
            return Err(Error::dim("pose2d joints", NUM_JOINTS, rec.pose2d.len()));
        }
        let pose = Pose2D::new(rec.pose2d[..NUM_JOINTS].to_vec())?;
        let spatial = make_spatial_map(&rec.human_box, &rec.object_box)?;
        let pose_map = make_pose_map(&pose, &rec.human_box.union(&rec.object_box), cfg.sigma)?;
        files.push((ctx.out_dir.join(format!("{id}_spatial.csv")), spatial.to_csv()));
        files.push((ctx.out_dir.join(format!("{id}_pose.csv")), pose_map.to_csv()));
    }
    for (p, text) in files {
        write_text(&p, &text)?;
    }
    Ok(est)
}

pub fn cmd_build_volume(a: &BuildVolumeArgs, cfg: &RunConfig) -> Result<i32> {
    let out_dir = a
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory (--out or output_dir)".into()))?;
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let records: Vec<DetectionRecord> = read_json(&a.detections)?;
    let ids = pair_ids(&records)?;
    let priors = load_table(cfg, None)?;
    let reduced = match &cfg.embeddings {
        Some(p) => Some(EmbeddingTable::load(p)?.reduce(cfg.embedding_dim)?),
        None => None,
    };
    let formats = if a.formats.is_empty() { &cfg.formats } else { &a.formats };
    let base_dir = a.detections.parent().unwrap_or(Path::new("."));
    let ctx = PairContext {
        cfg,
        priors: &priors,
        reduced: reduced.as_ref(),
        base_dir,
        out_dir: &out_dir,
        formats,
        dump_maps: a.dump_maps,
    };

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&x, &y| ids[x].cmp(&ids[y]));
    let mut summary = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Parse {
        row: 0,
        message: e.to_string(),
    };
    summary
        .write_record([
            "pair_id",
            "image_id",
            "object_category",
            "status",
            "center_x",
            "center_y",
            "center_z",
            "radius",
            "clamped",
            "message",
        ])
        .map_err(csv_err)?;
    let mut failed = 0usize;
    for i in order {
        let (id, rec) = (&ids[i], &records[i]);
        let row: Vec<String> = match process_pair(&ctx, id, rec) {
            Ok(est) => {
                info!("{id}: radius {} clamped {}", est.radius, est.clamped.as_str());
                let c = est.center;
                vec![
                    id.clone(),
                    rec.image_id.clone(),
                    rec.object_category.clone(),
                    "ok".into(),
                    c.x.to_string(),
                    c.y.to_string(),
                    c.z.to_string(),
                    est.radius.to_string(),
                    est.clamped.as_str().into(),
                    String::new(),
                ]
            }
            Err(e) => {
                warn!("{id}: {e}");
                failed += 1;
                let mut r = vec![
                    id.clone(),
                    rec.image_id.clone(),
                    rec.object_category.clone(),
                    "failed".into(),
                ];
                r.extend(std::iter::repeat_n(String::new(), 5));
                r.push(e.to_string());
                r
            }
        };
        summary.write_record(&row).map_err(csv_err)?;
    }
    let bytes = summary.into_inner().map_err(|e| Error::Parse {
        row: 0,
        message: e.to_string(),
    })?;
    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, bytes).map_err(|e| Error::io(&summary_path, e))?;
    if failed > 0 {
        eprintln!("{failed} of {} pairs failed", records.len());
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}

/// Pair feature and score batches by id, in id order.
pub fn join_batches(features: FeatureDump, scores: ScoreDump) -> Result<Vec<BatchInputs>> {
    let mut by_id: BTreeMap<String, StreamScores> = BTreeMap::new();
    for s in scores.batches {
        let id = s.batch_id.clone();
        if by_id.insert(id.clone(), s).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate score batch `{id}`")));
        }
    }
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for f in features.batches {
        if !seen.insert(f.batch_id.clone()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate feature batch `{}`",
                f.batch_id
            )));
        }
        let s = by_id
            .remove(&f.batch_id)
            .ok_or_else(|| Error::InvalidArgument(format!("no scores for batch `{}`", f.batch_id)))?;
        out.push(BatchInputs { features: f, scores: s });
    }
    if let Some(id) = by_id.keys().next() {
        return Err(Error::InvalidArgument(format!("no features for batch `{id}`")));
    }
    out.sort_by(|a, b| a.features.batch_id.cmp(&b.features.batch_id));
    Ok(out)
}

pub fn cmd_losses(a: &LossesArgs, cfg: &RunConfig) -> Result<i32> {
    let batches = join_batches(read_json(&a.features)?, read_json(&a.scores)?)?;
    let opts = BatchOptions {
        weights: cfg.weights,
        margin: cfg.margin,
        semantic_mode: cfg.semantic_mode,
        kl_smoothing: cfg.kl_smoothing,
        fixed_triplets: None,
    };
    let mut reports = Vec::with_capacity(batches.len());
    for b in &batches {
        let mut r = batch_losses(b, &opts)?;
        if !a.gradients {
            r.breakdown.gradients.clear();
        }
        reports.push(r);
    }
    let text = serde_json::to_string_pretty(&LossReport { batches: reports })? + "\n";
    emit(a.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

pub fn cmd_grad_check(a: &GradCheckArgs, cfg: &RunConfig) -> Result<i32> {
    let gc = GradCheckConfig {
        first_seed: cfg.seed,
        cases: a.seeds,
        dim: a.dim,
        classes: a.classes,
        batch: a.batch,
        tolerance: GRAD_CHECK_LIMIT,
        inject_fault: a.inject_fault,
        ..Default::default()
    };
    let rows = run_grad_check(&gc)?;
    let mut table = String::from("loss,cases,skipped,max_rel_error,status\n");
    for r in &rows {
        table.push_str(&format!(
            "{},{},{},{:.3e},{}\n",
            r.loss,
            r.cases,
            r.skipped,
            r.max_rel_error,
            if r.passed { "pass" } else { "FAIL" }
        ));
    }
    print!("{table}");
    if let Some(p) = &a.out {
        write_text(p, &(serde_json::to_string_pretty(&rows)? + "\n"))?;
    }
    Ok(if rows.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}

fn read_json_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            row: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn read_csv_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            row: 0,
            message: format!("{other:?}"),
        },
    })?;
    rdr.records()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                row: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

fn parse_f64(s: &str, row: usize) -> Result<f64> {
    s.trim().parse().map_err(|e| Error::Parse {
        row,
        message: format!("`{s}`: {e}"),
    })
}

pub fn cmd_ambiguity(a: &AmbiguityArgs, cfg: &RunConfig) -> Result<i32> {
    let samples: Vec<PoseSample> = read_json_lines(&a.poses)?;
    let templates: Vec<Pose2D> = read_json(&a.templates)?;
    let k = a.k.unwrap_or(cfg.clusters);
    let mut ranking = cluster_and_rank(&samples, &templates, k, cfg.seed)?;
    if let Some(p) = &a.probes {
        let mut probes = BTreeMap::new();
        for (i, r) in read_csv_rows(p)?.iter().enumerate() {
            if r.len() < 2 {
                return Err(Error::Parse {
                    row: i + 2,
                    message: "expected sample_id,probe".into(),
                });
            }
            probes.insert(r[0].to_string(), parse_f64(&r[1], i + 2)?);
        }
        combine_with_probe(
            &mut ranking.records,
            &probes,
            a.probe_weight.unwrap_or(cfg.probe_weight),
        )?;
    }
    for s in &ranking.skipped {
        warn!("{} skipped for template {}: {}", s.sample_id, s.template, s.reason);
    }
    emit(a.out.as_deref(), &ranking_csv(&ranking.records))?;
    Ok(if ranking.skipped.is_empty() {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}

pub fn cmd_monster_filter(a: &MonsterArgs, cfg: &RunConfig) -> Result<i32> {
    let rows = read_csv_rows(&a.embeddings)?;
    let mut ids = Vec::with_capacity(rows.len());
    let mut emb = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        ids.push(r.get(0).unwrap_or_default().to_string());
        emb.push(
            r.iter()
                .skip(1)
                .map(|v| parse_f64(v, i + 2))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    let fraction = a.fraction.unwrap_or(cfg.monster_fraction);
    let flags = monster_filter(&emb, fraction)?;
    let dist = distances_to_mean(&emb)?;
    let mut s = String::from("sample_id,distance,flagged\n");
    for ((id, d), f) in ids.iter().zip(&dist).zip(&flags) {
        s.push_str(&format!("{id},{d},{}\n", u8::from(*f)));
    }
    emit(a.out.as_deref(), &s)?;
    Ok(EXIT_OK)
}

pub fn cmd_priors_validate(path: Option<&Path>, cfg: &RunConfig) -> Result<i32> {
    let table = load_table(cfg, path)?;
    println!("{} categories, all valid", table.len());
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(image: &str, pair: Option<&str>) -> DetectionRecord {
        DetectionRecord {
            pair_id: pair.map(str::to_string),
            image_id: image.into(),
            human_box: Box2D::new(0.0, 0.0, 10.0, 10.0).unwrap(),
            object_box: Box2D::new(1.0, 1.0, 5.0, 5.0).unwrap(),
            object_category: "cup".into(),
            pose2d: vec![Joint2D::hidden(); 17],
            face: vec![],
            hands: vec![],
            body_points_path: "b.ply".into(),
            joints3d: vec![[0.0; 3]; 17],
            gravity: None,
            hoi_labels: vec![],
            image_size: None,
        }
    }

    #[test]
    fn pair_ids_number_within_image() {
        let recs = [
            record("a", None),
            record("b", None),
            record("a", None),
            record("c", Some("x")),
        ];
        assert_eq!(pair_ids(&recs).unwrap(), vec!["a-0", "b-0", "a-1", "x"]);
        assert!(pair_ids(&[record("a", Some("z")), record("b", Some("z"))]).is_err());
        assert!(pair_ids(&[record("a", Some("../z"))]).is_err());
    }

    #[test]
    fn detection_record_json() {
        let text = r#"{"image_id":"img","human_box":[0,0,10,10],"object_box":[1,1,5,5],
            "object_category":"cup","pose2d":[[1,2,1]],"body_points_path":"b.xyz",
            "joints3d":[[0,0,1]]}"#;
        let r: DetectionRecord = serde_json::from_str(text).unwrap();
        assert!(r.pose2d[0].visible);
        assert!(r.gravity.is_none());
    }

    #[test]
    fn join_reports_missing_partner() {
        let b = crate::gradcheck::random_batch(2, 3, 4, 0);
        let f = FeatureDump {
            batches: vec![b.features.clone()],
        };
        let s = ScoreDump { batches: vec![] };
        assert!(join_batches(f.clone(), s).is_err());
        let s = ScoreDump {
            batches: vec![b.scores.clone()],
        };
        assert_eq!(join_batches(f, s).unwrap().len(), 1);
    }
}
