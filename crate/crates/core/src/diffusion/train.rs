//! Training loop: standard noise-prediction objective.
//!
//! Each iteration samples a batch of events, a timestep per event and fresh
//! gaussian noise, forms x_t through the closed-form marginal
//! x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) w, and minimizes
//! || w - eps_hat(x_t, t, Enc(x0)) ||^2 with Adam under the linear
//! learning-rate decay. Batch assembly and every random draw are
//! single-threaded; parallelism lives inside the matmul kernels, so runs
//! are bit-reproducible for a given seed.

use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::data::Dataset;
use crate::diffusion::model::Dpm;
use crate::diffusion::net::{self, TEMB_DIM};
use crate::diffusion::schedule::default_beta_range;
use crate::error::{Error, Result};
use crate::optim::{adam_step, AdamState, LrSchedule};
use crate::rng::{stream, Rng};
use crate::tensor::Tensor;

/// Training hyperparameters. Defaults are the full-scale settings; the
/// desk-scale configs used in tests shrink iterations and widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch: usize,
    pub iters: u64,
    pub t_steps: usize,
    pub latent_dim: usize,
    /// None picks the default range rescaled for `t_steps`.
    pub beta_start: Option<f64>,
    pub beta_end: Option<f64>,
    pub lr_initial: f32,
    pub lr_final: f32,
    pub enc_hidden: Vec<usize>,
    pub dec_hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch: 128,
            iters: 1_000_000,
            t_steps: 256,
            latent_dim: 256,
            beta_start: None,
            beta_end: None,
            lr_initial: 0.001,
            lr_final: 0.0001,
            enc_hidden: vec![128, 256],
            dec_hidden: vec![256, 256, 256],
        }
    }
}

impl TrainConfig {
    pub fn beta_range(&self) -> (f64, f64) {
        let default = default_beta_range(self.t_steps);
        (
            self.beta_start.unwrap_or(default.0),
            self.beta_end.unwrap_or(default.1),
        )
    }

    pub fn lr_schedule(&self) -> LrSchedule {
        LrSchedule {
            lr_initial: self.lr_initial,
            lr_final: self.lr_final,
            total_iters: self.iters.max(1),
        }
    }
}

pub struct TrainResult {
    pub dpm: Dpm,
    /// Loss at every iteration.
    pub losses: Vec<f32>,
}

/// Train one domain model on a normalized dataset.
pub fn train_dpm(dataset: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<TrainResult> {
    dataset.validate()?;
    let norm = dataset.normalization.clone().ok_or_else(|| {
        Error::invalid("train_dpm expects a normalized dataset (call data::normalize first)")
    })?;
    let n_points = dataset.events[0].n_points();
    if dataset.events.iter().any(|e| e.n_points() != n_points) {
        return Err(Error::invalid(
            "train_dpm batches events as one tensor; every event needs the same point count",
        ));
    }
    if cfg.batch == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }

    let d = dataset.dim();
    let beta_range = cfg.beta_range();
    let mut dpm = Dpm::init(
        d,
        cfg.enc_hidden.clone(),
        cfg.dec_hidden.clone(),
        cfg.latent_dim,
        cfg.t_steps,
        beta_range,
        norm,
        dataset.domain_label.clone(),
        seed,
    )?;

    let lr_schedule = cfg.lr_schedule();
    let mut adam = AdamState::for_params(&dpm.params);
    let mut rng = Rng::substream(seed, stream::TRAIN, 0);
    let mut losses = Vec::with_capacity(cfg.iters as usize);

    let b = cfg.batch;
    let rows = b * n_points;
    let mut x0_batch = vec![0.0f32; rows * d];
    let mut xt_batch = vec![0.0f32; rows * d];
    let mut noise_batch = vec![0.0f32; rows * d];
    let mut temb_batch = vec![0.0f32; b * TEMB_DIM];
    let mut event_noise = vec![0.0f32; n_points * d];

    for iter in 0..cfg.iters {
        for slot in 0..b {
            let event = &dataset.events[rng.below(dataset.n_events())];
            let t = 1 + rng.below(cfg.t_steps);
            rng.fill_normal_f32(&mut event_noise);

            let a = dpm.schedule.alpha_bar(t);
            let coef_x = a.sqrt() as f32;
            let coef_w = (1.0 - a).sqrt() as f32;
            let dst = slot * n_points * d..(slot + 1) * n_points * d;
            let x0 = event.points().values();
            x0_batch[dst.clone()].copy_from_slice(x0);
            noise_batch[dst.clone()].copy_from_slice(&event_noise);
            for ((xt, &x), &w) in xt_batch[dst].iter_mut().zip(x0).zip(&event_noise) {
                *xt = coef_x.mul_add(x, coef_w * w);
            }
            temb_batch[slot * TEMB_DIM..(slot + 1) * TEMB_DIM]
                .copy_from_slice(&net::timestep_embedding(t, cfg.t_steps));
        }

        let mut g = Graph::new();
        let x0_node = g.input(Tensor::new(vec![rows, d], x0_batch.clone())?);
        let xt_node = g.input(Tensor::new(vec![rows, d], xt_batch.clone())?);
        let w_node = g.input(Tensor::new(vec![rows, d], noise_batch.clone())?);
        let temb_node = g.input(Tensor::new(vec![b, TEMB_DIM], temb_batch.clone())?);

        let latent = net::encoder_graph(&mut g, &dpm.params, &dpm.encoder, x0_node, n_points)?;
        let eps_hat = net::decoder_graph(
            &mut g,
            &dpm.params,
            &dpm.decoder,
            xt_node,
            temb_node,
            latent,
            n_points,
        )?;
        let loss_node = g.mse(w_node, eps_hat)?;
        let loss = g.value(loss_node).values()[0];
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iter });
        }
        g.backward(loss_node, &mut dpm.params)?;
        adam_step(&mut dpm.params, &mut adam, lr_schedule.lr_at(iter))?;
        losses.push(loss);
    }

    Ok(TrainResult { dpm, losses })
}
