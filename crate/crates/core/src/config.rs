//! Run configuration, read from TOML. Every field has a default so an empty
//! file (or no file) is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ambiguity::{DEFAULT_MONSTER_FRACTION, DEFAULT_PROBE_WEIGHT};
use crate::error::{Error, Result};
use crate::geometry::DEFAULT_FOCAL;
use crate::losses::{LossWeights, SemanticMode, DEFAULT_MARGIN};
use crate::maps2d::DEFAULT_SIGMA;
use crate::volume::{VolumeFormat, DEFAULT_GRAVITY};

pub const DEFAULT_EMBEDDING_DIM: usize = 64;
pub const DEFAULT_CLUSTERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Prior table CSV; the bundled table when absent.
    pub priors: Option<PathBuf>,
    /// Word embedding table; volumes carry no semantics when absent.
    pub embeddings: Option<PathBuf>,
    pub seed: u64,
    pub weights: LossWeights,
    pub margin: f64,
    pub semantic_mode: SemanticMode,
    pub kl_smoothing: Option<f64>,
    pub embedding_dim: usize,
    pub sigma: f64,
    pub focal: f64,
    /// `[width, height]` used when a detection record has no image size.
    pub image_size: Option<[f64; 2]>,
    pub gravity: [f64; 3],
    pub formats: Vec<VolumeFormat>,
    pub clusters: usize,
    pub probe_weight: f64,
    pub monster_fraction: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            priors: None,
            embeddings: None,
            seed: 0,
            weights: LossWeights::default(),
            margin: DEFAULT_MARGIN,
            semantic_mode: SemanticMode::default(),
            kl_smoothing: None,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            sigma: DEFAULT_SIGMA,
            focal: DEFAULT_FOCAL,
            image_size: None,
            gravity: DEFAULT_GRAVITY,
            formats: vec![VolumeFormat::Ply, VolumeFormat::Json],
            clusters: DEFAULT_CLUSTERS,
            probe_weight: DEFAULT_PROBE_WEIGHT,
            monster_fraction: DEFAULT_MONSTER_FRACTION,
            output_dir: None,
        }
    }
}

impl RunConfig {
    /// Parse a TOML file; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.priors, &mut cfg.embeddings, &mut cfg.output_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate().map_err(|e| Error::Config(e.to_string()))?;
        let bad = |m: String| Err(Error::Config(m));
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad(format!("margin must be non-negative, got {}", self.margin));
        }
        if let Some(eps) = self.kl_smoothing {
            if !(eps > 0.0 && eps.is_finite()) {
                return bad(format!("kl_smoothing must be positive, got {eps}"));
            }
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be positive".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return bad(format!("focal must be positive, got {}", self.focal));
        }
        if let Some([w, h]) = self.image_size {
            if !(w > 0.0 && h > 0.0) {
                return bad(format!("image_size must be positive, got [{w}, {h}]"));
            }
        }
        if self.gravity.iter().all(|g| *g == 0.0) || self.gravity.iter().any(|g| !g.is_finite()) {
            return bad("gravity must be a finite nonzero vector".into());
        }
        if self.formats.is_empty() {
            return bad("at least one volume format is required".into());
        }
        if self.clusters == 0 {
            return bad("clusters must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.probe_weight) {
            return bad(format!("probe_weight must lie in [0, 1], got {}", self.probe_weight));
        }
        if !(self.monster_fraction > 0.0 && self.monster_fraction < 1.0) {
            return bad(format!(
                "monster_fraction must lie in (0, 1), got {}",
                self.monster_fraction
            ));
        }
        Ok(())
    }
}

/// Per-item seed: the first 8 bytes of `SHA-256(seed_le || id)`.
pub fn item_seed(seed: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
