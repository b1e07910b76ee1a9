//! Shared fixtures for the benchmark targets.

use pcdiff_core::data::NormStats;
use pcdiff_core::diffusion::default_beta_range;
use pcdiff_core::rng::Rng;
use pcdiff_core::tensor::Tensor;
use pcdiff_core::{Dpm, PointCloud};

pub fn random_cloud(n: usize, dim: usize, seed: u64) -> PointCloud {
    let mut rng = Rng::new(seed);
    let values: Vec<f32> = (0..n * dim).map(|_| rng.normal_f32()).collect();
    PointCloud::new(Tensor::new(vec![n, dim], values).unwrap()).unwrap()
}

/// Untrained desk-scale model; benchmarks only exercise compute paths, so
/// weights do not need to be meaningful.
pub fn random_dpm(t_steps: usize, seed: u64) -> Dpm {
    Dpm::init(
        3,
        vec![24, 48],
        vec![32, 32, 32],
        64,
        t_steps,
        default_beta_range(t_steps),
        NormStats {
            center: vec![0.0; 3],
            scale: 1.0,
            clamped: false,
        },
        "bench",
        seed,
    )
    .unwrap()
}
