//! Shape encoder and noise-prediction decoder.
//!
//! The encoder is a point-wise MLP followed by a max-pool over the set axis
//! and a linear head, so its latent is permutation-invariant by
//! construction. The decoder is a per-point MLP over
//! `[point coords | timestep embedding | latent]`; permuting input points
//! permutes its output identically.
//!
//! Each network has a graph builder (for training) and a plain forward.
//! Both call the same kernels, so the two paths agree bit-for-bit.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, NodeRef};
use crate::error::{Error, Result};
use crate::kernels::{self, Act};
use crate::optim::ParamStore;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Decoder negative-slope; the encoder uses plain relu.
pub const LEAKY_SLOPE: f32 = 0.1;

/// t/T plus four sin/cos pairs at frequencies 1, 2, 4, 8.
pub const TEMB_DIM: usize = 9;

pub fn timestep_embedding(t: usize, t_steps: usize) -> [f32; TEMB_DIM] {
    let tau = t as f64 / t_steps as f64;
    let mut out = [0.0f32; TEMB_DIM];
    out[0] = tau as f32;
    for k in 0..4 {
        let freq = (1u32 << k) as f64;
        let phase = std::f64::consts::TAU * freq * tau;
        out[1 + 2 * k] = phase.sin() as f32;
        out[2 + 2 * k] = phase.cos() as f32;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub point_dim: usize,
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
}

impl EncoderConfig {
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.latent_dim)); // head
        dims
    }
}

impl DecoderConfig {
    pub fn input_dim(&self) -> usize {
        self.point_dim + TEMB_DIM + self.latent_dim
    }

    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim();
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.point_dim)); // noise output
        dims
    }
}

/// He-uniform init: W ~ U(-b, b) with b = sqrt(6 / fan_in), zero biases.
/// Weights are drawn row-major in layer order, which pins the draw order for
/// reproducibility.
fn init_layers(
    store: &mut ParamStore,
    prefix: &str,
    dims: &[(usize, usize)],
    head_name: &str,
    rng: &mut Rng,
) {
    for (i, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let name = if i + 1 == dims.len() {
            format!("{prefix}.{head_name}")
        } else {
            format!("{prefix}.l{i}")
        };
        let bound = (6.0 / fan_in as f64).sqrt();
        let values: Vec<f32> = (0..fan_in * fan_out)
            .map(|_| rng.uniform_range(-bound, bound) as f32)
            .collect();
        store.insert(
            &format!("{name}.w"),
            Tensor::new(vec![fan_in, fan_out], values).unwrap(),
        );
        store.insert(&format!("{name}.b"), Tensor::zeros(vec![1, fan_out]));
    }
}

pub fn init_encoder(store: &mut ParamStore, cfg: &EncoderConfig, rng: &mut Rng) {
    init_layers(store, "enc", &cfg.layer_dims(), "head", rng);
}

pub fn init_decoder(store: &mut ParamStore, cfg: &DecoderConfig, rng: &mut Rng) {
    init_layers(store, "dec", &cfg.layer_dims(), "out", rng);
}

fn layer_names(prefix: &str, n_layers: usize, head_name: &str) -> Vec<String> {
    (0..n_layers)
        .map(|i| {
            if i + 1 == n_layers {
                format!("{prefix}.{head_name}")
            } else {
                format!("{prefix}.l{i}")
            }
        })
        .collect()
}

/// Encoder as tape ops. `points` is [B*N x D]; `seg` is the points-per-event
/// count N; the result is the [B x F] latent block.
pub fn encoder_graph(
    g: &mut Graph,
    store: &ParamStore,
    cfg: &EncoderConfig,
    points: NodeRef,
    seg: usize,
) -> Result<NodeRef> {
    let names = layer_names("enc", cfg.hidden.len() + 1, "head");
    let mut x = points;
    for name in &names[..cfg.hidden.len()] {
        let w = g.param(store, &format!("{name}.w"))?;
        let b = g.param(store, &format!("{name}.b"))?;
        x = g.linear(x, w, b, Act::Relu)?;
    }
    let pooled = g.segment_max(x, seg)?;
    let head = &names[cfg.hidden.len()];
    let w = g.param(store, &format!("{head}.w"))?;
    let b = g.param(store, &format!("{head}.b"))?;
    g.linear(pooled, w, b, Act::None)
}

/// Plain (no-grad) encoder forward for one cloud: [N x D] -> latent [F].
pub fn encode_shape(store: &ParamStore, cfg: &EncoderConfig, points: &Tensor) -> Result<Vec<f32>> {
    let (n, d) = points.as_matrix()?;
    if d != cfg.input_dim {
        return Err(Error::ShapeMismatch {
            op: "encode_shape",
            lhs: vec![n, d],
            rhs: vec![cfg.input_dim],
        });
    }
    let names = layer_names("enc", cfg.hidden.len() + 1, "head");
    let mut x = points.values().to_vec();
    let mut width = d;
    for name in &names[..cfg.hidden.len()] {
        let (x2, w2) = linear(store, name, &x, n, width, Act::Relu)?;
        x = x2;
        width = w2;
    }
    let mut pooled = vec![0.0f32; width];
    let mut argmax = vec![0u32; width];
    kernels::segment_max(&x, n, width, n, &mut pooled, &mut argmax);
    let (z, zw) = linear(store, &names[cfg.hidden.len()], &pooled, 1, width, Act::None)?;
    debug_assert_eq!(zw, cfg.latent_dim);
    Ok(z)
}

/// Decoder as tape ops. `xt` is [B*N x D]; `temb` [B x TEMB_DIM] and
/// `latent` [B x F] broadcast per event over N points.
pub fn decoder_graph(
    g: &mut Graph,
    store: &ParamStore,
    cfg: &DecoderConfig,
    xt: NodeRef,
    temb: NodeRef,
    latent: NodeRef,
    seg: usize,
) -> Result<NodeRef> {
    let temb_rows = g.repeat_rows(temb, seg)?;
    let latent_rows = g.repeat_rows(latent, seg)?;
    let mut x = g.concat_cols(&[xt, temb_rows, latent_rows])?;
    let names = layer_names("dec", cfg.hidden.len() + 1, "out");
    for name in &names[..cfg.hidden.len()] {
        let w = g.param(store, &format!("{name}.w"))?;
        let b = g.param(store, &format!("{name}.b"))?;
        x = g.linear(x, w, b, Act::Leaky(LEAKY_SLOPE))?;
    }
    let out = &names[cfg.hidden.len()];
    let w = g.param(store, &format!("{out}.w"))?;
    let b = g.param(store, &format!("{out}.b"))?;
    g.linear(x, w, b, Act::None)
}

/// Plain decoder forward: predicted noise for one cloud at timestep `t`.
pub fn predict_noise(
    store: &ParamStore,
    cfg: &DecoderConfig,
    xt: &Tensor,
    t: usize,
    t_steps: usize,
    latent: &[f32],
) -> Result<Tensor> {
    let (n, d) = xt.as_matrix()?;
    if d != cfg.point_dim {
        return Err(Error::ShapeMismatch {
            op: "predict_noise",
            lhs: vec![n, d],
            rhs: vec![cfg.point_dim],
        });
    }
    if latent.len() != cfg.latent_dim {
        return Err(Error::ShapeMismatch {
            op: "predict_noise",
            lhs: vec![latent.len()],
            rhs: vec![cfg.latent_dim],
        });
    }
    let temb = timestep_embedding(t, t_steps);
    let mut temb_rows = vec![0.0f32; n * TEMB_DIM];
    kernels::repeat_rows(&temb, 1, TEMB_DIM, n, &mut temb_rows);
    let mut latent_rows = vec![0.0f32; n * cfg.latent_dim];
    kernels::repeat_rows(latent, 1, cfg.latent_dim, n, &mut latent_rows);
    let width = cfg.input_dim();
    let mut x = vec![0.0f32; n * width];
    kernels::concat_cols(
        &[
            (xt.values(), d),
            (&temb_rows, TEMB_DIM),
            (&latent_rows, cfg.latent_dim),
        ],
        n,
        &mut x,
    );

    let names = layer_names("dec", cfg.hidden.len() + 1, "out");
    let mut width = width;
    for name in &names[..cfg.hidden.len()] {
        let (x2, w2) = linear(store, name, &x, n, width, Act::Leaky(LEAKY_SLOPE))?;
        x = x2;
        width = w2;
    }
    let (out, ow) = linear(store, &names[cfg.hidden.len()], &x, n, width, Act::None)?;
    debug_assert_eq!(ow, cfg.point_dim);
    Tensor::new(vec![n, cfg.point_dim], out)
}

/// act(x[rows x width] @ W + b) through the same fused kernel the tape uses.
fn linear(
    store: &ParamStore,
    name: &str,
    x: &[f32],
    rows: usize,
    width: usize,
    act: Act,
) -> Result<(Vec<f32>, usize)> {
    let w = store
        .get(&format!("{name}.w"))
        .ok_or_else(|| Error::invalid(format!("missing parameter `{name}.w`")))?;
    let b = store
        .get(&format!("{name}.b"))
        .ok_or_else(|| Error::invalid(format!("missing parameter `{name}.b`")))?;
    let (fan_in, fan_out) = w.as_matrix()?;
    if fan_in != width {
        return Err(Error::ShapeMismatch {
            op: "linear",
            lhs: vec![rows, width],
            rhs: vec![fan_in, fan_out],
        });
    }
    let mut out = vec![0.0f32; rows * fan_out];
    kernels::linear_act(x, w.values(), b.values(), rows, fan_in, fan_out, act, &mut out);
    Ok((out, fan_out))
}
