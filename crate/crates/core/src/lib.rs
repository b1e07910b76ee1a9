//! Unpaired translation of point-cloud events between a clean and a noisy
//! domain.
//!
//! One diffusion model is trained per domain. A source event is encoded into
//! an exactly invertible latent (its terminal noised cloud plus the per-step
//! noise residuals, alongside a permutation-invariant shape latent) and then
//! decoded with the other domain's model. The crate also ships the synthetic
//! benchmark generators and the evaluation metrics used to score
//! translations.

pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod diffusion;
pub mod error;
pub mod kernels;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod translation;

pub use data::{
    denormalize, gen_lines, gen_shapes, load_csv, load_pc, normalize, normalize_with, save_pc,
    Dataset, NormStats, PointCloud,
};
pub use diffusion::{
    default_beta_range, forward_diffuse, make_schedule, sample_unconditional, train_dpm, Dpm,
    NoiseSchedule, TrainConfig, TrainResult,
};
pub use error::{Error, Result};
pub use metrics::{
    chamfer, fitted_sigma_report, jsd_baselines, jsd_sets, outlier_trim, FittedSigmaRow,
    MetricsReport,
};
pub use optim::{adam_step, AdamState, LrSchedule, ParamStore};
pub use rng::Rng;
pub use tensor::Tensor;
pub use translation::{
    dpm_decode, dpm_encode, reconstruct_cycle, translate, DpmEncoding, TranslationResult,
};
