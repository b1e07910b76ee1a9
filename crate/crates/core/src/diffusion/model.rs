//! A trained domain model: shape encoder + noise decoder + schedule +
//! normalization stats, with checkpoint save/load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_params, save_params};
use crate::data::{NormStats, PointCloud};
use crate::diffusion::net::{self, DecoderConfig, EncoderConfig};
use crate::diffusion::schedule::{make_schedule, NoiseSchedule};
use crate::error::{Error, Result};
use crate::optim::ParamStore;
use crate::rng::{stream, Rng};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct Dpm {
    pub params: ParamStore,
    pub encoder: EncoderConfig,
    pub decoder: DecoderConfig,
    pub schedule: NoiseSchedule,
    pub norm: NormStats,
    pub domain_label: String,
    /// Beta endpoints the schedule was built from (kept for the sidecar).
    pub beta_range: (f64, f64),
}

/// JSON sidecar stored next to a model checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DpmSidecar {
    pub version: u32,
    pub domain_label: String,
    pub t_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub latent_dim: usize,
    pub input_dim: usize,
    pub enc_hidden: Vec<usize>,
    pub dec_hidden: Vec<usize>,
    pub norm: NormStats,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub config_hash: Option<String>,
    #[serde(default)]
    pub tool_version: Option<String>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

impl Dpm {
    /// Freshly initialized model (untrained weights).
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        input_dim: usize,
        enc_hidden: Vec<usize>,
        dec_hidden: Vec<usize>,
        latent_dim: usize,
        t_steps: usize,
        beta_range: (f64, f64),
        norm: NormStats,
        domain_label: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        let encoder = EncoderConfig {
            input_dim,
            hidden: enc_hidden,
            latent_dim,
        };
        let decoder = DecoderConfig {
            point_dim: input_dim,
            hidden: dec_hidden,
            latent_dim,
        };
        let schedule = make_schedule(t_steps, beta_range.0, beta_range.1)?;
        let mut params = ParamStore::new();
        let mut rng = Rng::substream(seed, stream::PARAM_INIT, 0);
        net::init_encoder(&mut params, &encoder, &mut rng);
        net::init_decoder(&mut params, &decoder, &mut rng);
        Ok(Dpm {
            params,
            encoder,
            decoder,
            schedule,
            norm,
            domain_label: domain_label.into(),
            beta_range,
        })
    }

    pub fn t_steps(&self) -> usize {
        self.schedule.t_steps()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim
    }

    /// Permutation-invariant latent of a cloud.
    pub fn encode_shape(&self, cloud: &PointCloud) -> Result<Vec<f32>> {
        net::encode_shape(&self.params, &self.encoder, cloud.points())
    }

    /// Per-point noise prediction at timestep t.
    pub fn predict_noise(&self, xt: &PointCloud, t: usize, latent: &[f32]) -> Result<Tensor> {
        self.schedule.validate_t(t)?;
        net::predict_noise(
            &self.params,
            &self.decoder,
            xt.points(),
            t,
            self.t_steps(),
            latent,
        )
    }

    /// Learned reverse-step mean:
    /// mu(x_t, t, z) = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_t).
    pub fn posterior_mean(&self, xt: &PointCloud, t: usize, latent: &[f32]) -> Result<PointCloud> {
        self.schedule.validate_t(t)?;
        let eps_hat = self.predict_noise(xt, t, latent)?;
        let coef = (self.schedule.beta(t) / (1.0 - self.schedule.alpha_bar(t)).sqrt()) as f32;
        let inv_sqrt_alpha = (1.0 / self.schedule.alpha(t).sqrt()) as f32;
        let mut values = xt.points().values().to_vec();
        for (v, &e) in values.iter_mut().zip(eps_hat.values()) {
            *v = (*v - coef * e) * inv_sqrt_alpha;
        }
        PointCloud::new(Tensor::new(vec![xt.n_points(), xt.dim()], values)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.save_with_meta(path, None, None, None)
    }

    pub fn save_with_meta(
        &self,
        path: &Path,
        seed: Option<u64>,
        config_hash: Option<String>,
        tool_version: Option<String>,
    ) -> Result<()> {
        save_params(&self.params, path)?;
        let sidecar = DpmSidecar {
            version: 1,
            domain_label: self.domain_label.clone(),
            t_steps: self.t_steps(),
            beta_start: self.beta_range.0,
            beta_end: self.beta_range.1,
            latent_dim: self.encoder.latent_dim,
            input_dim: self.encoder.input_dim,
            enc_hidden: self.encoder.hidden.clone(),
            dec_hidden: self.decoder.hidden.clone(),
            norm: self.norm.clone(),
            seed,
            config_hash,
            tool_version,
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let params = load_params(path)?;
        let sidecar_file = sidecar_path(path);
        let json = std::fs::read_to_string(&sidecar_file).map_err(|e| {
            Error::format(format!(
                "missing model sidecar {}: {e}",
                sidecar_file.display()
            ))
        })?;
        let sc: DpmSidecar = serde_json::from_str(&json)?;
        let encoder = EncoderConfig {
            input_dim: sc.input_dim,
            hidden: sc.enc_hidden.clone(),
            latent_dim: sc.latent_dim,
        };
        let decoder = DecoderConfig {
            point_dim: sc.input_dim,
            hidden: sc.dec_hidden.clone(),
            latent_dim: sc.latent_dim,
        };
        let schedule = make_schedule(sc.t_steps, sc.beta_start, sc.beta_end)?;
        let dpm = Dpm {
            params,
            encoder,
            decoder,
            schedule,
            norm: sc.norm.clone(),
            domain_label: sc.domain_label.clone(),
            beta_range: (sc.beta_start, sc.beta_end),
        };
        // The checkpoint must actually contain the layers the sidecar claims.
        for (i, &(fan_in, fan_out)) in dpm.encoder.layer_dims().iter().enumerate() {
            let name = if i == dpm.encoder.hidden.len() {
                "enc.head.w".to_string()
            } else {
                format!("enc.l{i}.w")
            };
            let t = dpm
                .params
                .get(&name)
                .ok_or_else(|| Error::format(format!("checkpoint missing `{name}`")))?;
            if t.shape() != [fan_in, fan_out] {
                return Err(Error::format(format!(
                    "checkpoint `{name}` has shape {:?}, sidecar implies [{fan_in}, {fan_out}]",
                    t.shape()
                )));
            }
        }
        Ok(dpm)
    }
}
