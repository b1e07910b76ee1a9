//! Run configuration: one flat JSON file drives every subcommand;
//! command-line flags override individual keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pcdiff_core::diffusion::TrainConfig;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Lines,
    Shapes,
    Csv,
}

fn default_seed() -> u64 {
    42
}
fn default_n_events() -> usize {
    1000
}
fn default_n_points() -> usize {
    256
}
fn default_shape_sigma() -> f32 {
    pcdiff_core::data::DEFAULT_SHAPE_SIGMA
}
fn default_batch() -> usize {
    128
}
fn default_iters() -> u64 {
    1_000_000
}
fn default_t_steps() -> usize {
    256
}
fn default_latent_dim() -> usize {
    256
}
fn default_lr_initial() -> f32 {
    0.001
}
fn default_lr_final() -> f32 {
    0.0001
}
fn default_enc_hidden() -> Vec<usize> {
    vec![128, 256]
}
fn default_dec_hidden() -> Vec<usize> {
    vec![256, 256, 256]
}
fn default_jsd_resolution() -> usize {
    pcdiff_core::metrics::DEFAULT_JSD_RESOLUTION
}
fn default_sigma_bins() -> usize {
    4
}
fn default_keep_fraction() -> f64 {
    0.99
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_dataset() -> DatasetKind {
    DatasetKind::Lines
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_dataset")]
    pub dataset: DatasetKind,
    #[serde(default = "default_n_events")]
    pub n_events: usize,
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    #[serde(default = "default_shape_sigma")]
    pub shape_noise_sigma: f32,
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_iters")]
    pub iters: u64,
    #[serde(default = "default_t_steps")]
    pub t_steps: usize,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default)]
    pub beta_start: Option<f64>,
    #[serde(default)]
    pub beta_end: Option<f64>,
    #[serde(default = "default_lr_initial")]
    pub lr_initial: f32,
    #[serde(default = "default_lr_final")]
    pub lr_final: f32,
    #[serde(default = "default_enc_hidden")]
    pub enc_hidden: Vec<usize>,
    #[serde(default = "default_dec_hidden")]
    pub dec_hidden: Vec<usize>,
    #[serde(default = "default_jsd_resolution")]
    pub jsd_resolution: usize,
    #[serde(default = "default_sigma_bins")]
    pub sigma_bins: usize,
    #[serde(default = "default_keep_fraction")]
    pub keep_fraction: f64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| anyhow::anyhow!("config {}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.n_points < 2 {
            anyhow::bail!("n_points must be >= 2");
        }
        if self.batch == 0 || self.t_steps == 0 || self.latent_dim == 0 {
            anyhow::bail!("batch, t_steps and latent_dim must be positive");
        }
        if self.dataset == DatasetKind::Csv && self.csv_path.is_none() {
            anyhow::bail!("dataset kind `csv` requires csv_path");
        }
        if !(0.0 < self.keep_fraction && self.keep_fraction <= 1.0) {
            anyhow::bail!("keep_fraction must be in (0, 1]");
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch: self.batch,
            iters: self.iters,
            t_steps: self.t_steps,
            latent_dim: self.latent_dim,
            beta_start: self.beta_start,
            beta_end: self.beta_end,
            lr_initial: self.lr_initial,
            lr_final: self.lr_final,
            enc_hidden: self.enc_hidden.clone(),
            dec_hidden: self.dec_hidden.clone(),
        }
    }

    /// FNV-1a over the resolved config JSON; embedded in every artifact so
    /// outputs are traceable to the exact settings that produced them.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in canonical.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        format!("{h:016x}")
    }
}

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
