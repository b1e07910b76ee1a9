//! Cross-domain translation through exactly invertible diffusion latents.
//!
//! Encoding an event records its terminal noised cloud x_T together with the
//! per-step residuals eps_t = (x_{t-1} - mu(x_t, t, z)) / sigma_t measured
//! against the source model's own mean estimator. Replaying the reverse
//! recursion y_{t-1} = mu(y_t, t, z) + sigma_t eps_t under the same model
//! then reproduces the input exactly (up to f32 rounding), for any weights,
//! trained or not. Decoding under the other domain's model instead performs
//! the translation: same residuals, different mean estimator.

use std::io::{Read, Write};

use crate::data::PointCloud;
use crate::diffusion::{forward_diffuse_with, Dpm};
use crate::error::{Error, Result};
use crate::kernels;
use crate::metrics::chamfer;
use crate::rng::{stream, Rng};
use crate::tensor::Tensor;

/// Exactly invertible latent of one event: the terminal cloud plus the
/// residual list ordered [eps_T, ..., eps_1].
#[derive(Clone, Debug, PartialEq)]
pub struct DpmEncoding {
    pub x_terminal: PointCloud,
    pub eps: Vec<Tensor>,
    pub source_t: usize,
}

impl DpmEncoding {
    /// Residual for timestep t (1-based).
    pub fn eps_at(&self, t: usize) -> &Tensor {
        &self.eps[self.source_t - t]
    }
}

/// Output of a cross-domain translation.
#[derive(Clone, Debug)]
pub struct TranslationResult {
    pub output: PointCloud,
    pub z_src: Vec<f32>,
    pub z_tgt: Vec<f32>,
    pub encoding: DpmEncoding,
}

/// Encode a (normalized) event under its own domain model.
///
/// Returns the shape latent and the invertible encoding. The caller is
/// responsible for normalizing `x0` with `dpm.norm` beforehand; `translate`
/// does that for raw events.
pub fn dpm_encode(dpm: &Dpm, x0: &PointCloud, seed: u64) -> Result<(Vec<f32>, DpmEncoding)> {
    let mut rng = Rng::substream(seed, stream::TRANSLATE, 0);
    dpm_encode_with(dpm, x0, &mut rng)
}

pub fn dpm_encode_with(
    dpm: &Dpm,
    x0: &PointCloud,
    rng: &mut Rng,
) -> Result<(Vec<f32>, DpmEncoding)> {
    let t_steps = dpm.t_steps();
    for t in 1..=t_steps {
        if dpm.schedule.sigma(t) == 0.0 {
            return Err(Error::invalid(format!(
                "dpm_encode requires strictly positive sigma, got 0 at t={t}"
            )));
        }
    }
    let z = dpm.encode_shape(x0)?;
    let trajectory = forward_diffuse_with(&dpm.schedule, x0, rng)?;

    let n = x0.n_points();
    let d = x0.dim();
    let mut eps = Vec::with_capacity(t_steps);
    for t in (1..=t_steps).rev() {
        let x_t = PointCloud::new(trajectory[t - 1].clone())?;
        let mu = dpm.posterior_mean(&x_t, t, &z)?;
        let prev: &[f32] = if t == 1 {
            x0.points().values()
        } else {
            trajectory[t - 2].values()
        };
        let inv_sigma = (1.0 / dpm.schedule.sigma(t)) as f32;
        let mut values = vec![0.0f32; n * d];
        for ((e, &p), &m) in values.iter_mut().zip(prev).zip(mu.points().values()) {
            *e = (p - m) * inv_sigma;
        }
        eps.push(Tensor::new(vec![n, d], values)?);
    }

    let encoding = DpmEncoding {
        x_terminal: PointCloud::new(trajectory[t_steps - 1].clone())?,
        eps,
        source_t: t_steps,
    };
    Ok((z, encoding))
}

/// Run the reverse recursion from an encoding under `dpm`, conditioned on
/// `latent`. With the encoding's source model this inverts `dpm_encode`;
/// with another domain's model it translates.
pub fn dpm_decode(dpm: &Dpm, latent: &[f32], encoding: &DpmEncoding) -> Result<PointCloud> {
    if encoding.source_t != dpm.t_steps() {
        return Err(Error::StepCountMismatch {
            encoding: encoding.source_t,
            model: dpm.t_steps(),
        });
    }
    let n = encoding.x_terminal.n_points();
    let d = encoding.x_terminal.dim();
    for (i, e) in encoding.eps.iter().enumerate() {
        if e.shape() != [n, d] {
            return Err(Error::ShapeMismatch {
                op: "dpm_decode",
                lhs: vec![n, d],
                rhs: encoding.eps[i].shape().to_vec(),
            });
        }
    }
    let mut cloud = encoding.x_terminal.clone();
    let mut values = vec![0.0f32; n * d];
    for t in (1..=dpm.t_steps()).rev() {
        let mu = dpm.posterior_mean(&cloud, t, latent)?;
        let sigma = dpm.schedule.sigma(t) as f32;
        kernels::axpby(
            sigma,
            encoding.eps_at(t).values(),
            1.0,
            mu.points().values(),
            &mut values,
        );
        cloud = PointCloud::new(Tensor::new(vec![n, d], values.clone())?)?;
    }
    Ok(cloud)
}

/// Translate a raw event from the source model's domain into the target
/// model's domain. Both encoders see the raw event (normalized per-model);
/// the residual trajectory comes from the source model and the reverse
/// recursion runs under the target model, conditioned on the target latent.
pub fn translate(
    dpm_src: &Dpm,
    dpm_tgt: &Dpm,
    x0_raw: &PointCloud,
    seed: u64,
) -> Result<TranslationResult> {
    if dpm_src.input_dim() != dpm_tgt.input_dim() {
        return Err(Error::ShapeMismatch {
            op: "translate",
            lhs: vec![dpm_src.input_dim()],
            rhs: vec![dpm_tgt.input_dim()],
        });
    }
    let x0_src = dpm_src.norm.apply(x0_raw);
    let x0_tgt = dpm_tgt.norm.apply(x0_raw);
    let z_tgt = dpm_tgt.encode_shape(&x0_tgt)?;
    let (z_src, encoding) = dpm_encode(dpm_src, &x0_src, seed)?;
    let decoded = dpm_decode(dpm_tgt, &z_tgt, &encoding)?;
    let output = dpm_tgt.norm.invert(&decoded);
    Ok(TranslationResult {
        output,
        z_src,
        z_tgt,
        encoding,
    })
}

/// Translate A -> B -> A and measure the chamfer distance to the original.
pub fn reconstruct_cycle(
    dpm_a: &Dpm,
    dpm_b: &Dpm,
    x0: &PointCloud,
    seed: u64,
) -> Result<(PointCloud, f64)> {
    let forward = translate(dpm_a, dpm_b, x0, Rng::substream(seed, stream::TRANSLATE, 1).next_u64())?;
    let back = translate(dpm_b, dpm_a, &forward.output, Rng::substream(seed, stream::TRANSLATE, 2).next_u64())?;
    let cd = chamfer(x0, &back.output)?;
    Ok((back.output, cd))
}

/// Serialize an encoding into the checkpoint container format: `x_T` plus
/// one entry per residual, named by timestep.
pub fn write_encoding<W: Write>(w: W, encoding: &DpmEncoding) -> Result<()> {
    let mut entries: Vec<(String, &Tensor)> = vec![("x_T".to_string(), encoding.x_terminal.points())];
    for t in (1..=encoding.source_t).rev() {
        entries.push((format!("eps_{t:05}"), encoding.eps_at(t)));
    }
    let views: Vec<(&str, &Tensor)> = entries.iter().map(|(n, t)| (n.as_str(), *t)).collect();
    crate::checkpoint::write_container(w, &views)
}

pub fn read_encoding<R: Read>(r: R) -> Result<DpmEncoding> {
    let entries = crate::checkpoint::read_container(r)?;
    let mut x_terminal = None;
    let mut steps: Vec<(usize, Tensor)> = Vec::new();
    for (name, tensor) in entries {
        if name == "x_T" {
            x_terminal = Some(tensor);
        } else if let Some(t) = name.strip_prefix("eps_").and_then(|s| s.parse::<usize>().ok()) {
            steps.push((t, tensor));
        } else {
            return Err(Error::format(format!("unexpected encoding entry `{name}`")));
        }
    }
    let x_terminal = x_terminal
        .ok_or_else(|| Error::format("encoding container missing `x_T`".to_string()))?;
    steps.sort_by_key(|(t, _)| *t);
    let source_t = steps.len();
    for (expected, (t, _)) in (1..=source_t).zip(&steps) {
        if *t != expected {
            return Err(Error::format(format!(
                "encoding residuals not contiguous: expected eps_{expected:05}, found eps_{t:05}"
            )));
        }
    }
    steps.reverse(); // store as [eps_T, ..., eps_1]
    Ok(DpmEncoding {
        x_terminal: PointCloud::new(x_terminal)?,
        eps: steps.into_iter().map(|(_, t)| t).collect(),
        source_t,
    })
}
