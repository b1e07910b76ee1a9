//! Per-domain diffusion models: noise schedule, shape encoder, conditional
//! noise decoder, training and sampling.

mod model;
mod net;
mod sample;
mod schedule;
mod train;

pub use model::{Dpm, DpmSidecar};
pub use net::{
    encode_shape, init_decoder, init_encoder, predict_noise, timestep_embedding, DecoderConfig,
    EncoderConfig, TEMB_DIM,
};
pub use sample::{forward_diffuse, forward_diffuse_with, sample_unconditional};
pub use schedule::{default_beta_range, make_schedule, NoiseSchedule};
pub use train::{train_dpm, TrainConfig, TrainResult};
