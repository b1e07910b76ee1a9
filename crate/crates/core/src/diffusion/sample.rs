//! Forward diffusion and unconditional ancestral sampling.

use crate::data::PointCloud;
use crate::diffusion::model::Dpm;
use crate::diffusion::schedule::NoiseSchedule;
use crate::error::Result;
use crate::rng::{stream, Rng};
use crate::tensor::Tensor;

/// Simulate x_t = sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) w_t for t = 1..T.
/// Returns the trajectory [x_1, ..., x_T]. Noise draws are row-major per
/// point per coordinate, one step at a time.
pub fn forward_diffuse(
    schedule: &NoiseSchedule,
    x0: &PointCloud,
    seed: u64,
) -> Result<Vec<Tensor>> {
    let mut rng = Rng::substream(seed, stream::DIFFUSE, 0);
    forward_diffuse_with(schedule, x0, &mut rng)
}

pub fn forward_diffuse_with(
    schedule: &NoiseSchedule,
    x0: &PointCloud,
    rng: &mut Rng,
) -> Result<Vec<Tensor>> {
    let n = x0.n_points();
    let d = x0.dim();
    let mut trajectory = Vec::with_capacity(schedule.t_steps());
    let mut current = x0.points().values().to_vec();
    let mut noise = vec![0.0f32; n * d];
    for t in 1..=schedule.t_steps() {
        let keep = (1.0 - schedule.beta(t)).sqrt() as f32;
        let add = schedule.beta(t).sqrt() as f32;
        rng.fill_normal_f32(&mut noise);
        for (c, &w) in current.iter_mut().zip(&noise) {
            *c = keep.mul_add(*c, add * w);
        }
        trajectory.push(Tensor::new(vec![n, d], current.clone())?);
    }
    Ok(trajectory)
}

/// Ancestral sampling conditioned on a latent: start from N(0, I) points and
/// run the reverse recursion with fresh noise each step. The result is
/// denormalized with the model's stats.
pub fn sample_unconditional(
    dpm: &Dpm,
    latent: &[f32],
    n_points: usize,
    seed: u64,
) -> Result<PointCloud> {
    let d = dpm.input_dim();
    let mut rng = Rng::substream(seed, stream::SAMPLE, 0);
    let mut values = vec![0.0f32; n_points * d];
    rng.fill_normal_f32(&mut values);
    let mut cloud = PointCloud::new(Tensor::new(vec![n_points, d], values)?)?;
    let mut noise = vec![0.0f32; n_points * d];
    for t in (1..=dpm.t_steps()).rev() {
        let mu = dpm.posterior_mean(&cloud, t, latent)?;
        let sigma = dpm.schedule.sigma(t) as f32;
        rng.fill_normal_f32(&mut noise);
        let mut vals = mu.points().values().to_vec();
        for (v, &w) in vals.iter_mut().zip(&noise) {
            *v = sigma.mul_add(w, *v);
        }
        cloud = PointCloud::new(Tensor::new(vec![n_points, d], vals)?)?;
    }
    Ok(dpm.norm.invert(&cloud))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::NormStats;
    use crate::diffusion::schedule::{make_schedule, NoiseSchedule};
    use crate::rng::Rng;

    fn cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = Rng::new(seed);
        let values: Vec<f32> = (0..n * 3).map(|_| rng.uniform_range(-1.0, 1.0) as f32).collect();
        PointCloud::new(Tensor::new(vec![n, 3], values).unwrap()).unwrap()
    }

    #[test]
    fn zero_beta_is_identity_kernel() {
        let schedule = NoiseSchedule::from_betas(vec![0.0; 10]);
        let x0 = cloud(8, 1);
        let trajectory = forward_diffuse(&schedule, &x0, 5).unwrap();
        let last = trajectory.last().unwrap();
        assert_eq!(last.values(), x0.points().values());
    }

    #[test]
    fn forward_marginals_match_closed_form() {
        // Over many trajectories, x_t has mean sqrt(alpha_bar_t) x0 and
        // per-coordinate variance 1 - alpha_bar_t.
        let schedule = make_schedule(16, 4e-4, 0.08).unwrap();
        let x0 = cloud(4, 2);
        let trials = 10_000usize;
        let checkpoints = [4usize, 8, 16];
        let dims = x0.points().numel();
        let mut sums = vec![vec![0.0f64; dims]; checkpoints.len()];
        let mut sum_sqs = vec![vec![0.0f64; dims]; checkpoints.len()];
        for trial in 0..trials {
            let trajectory = forward_diffuse(&schedule, &x0, 1000 + trial as u64).unwrap();
            for (ci, &t) in checkpoints.iter().enumerate() {
                for (i, &v) in trajectory[t - 1].values().iter().enumerate() {
                    sums[ci][i] += v as f64;
                    sum_sqs[ci][i] += (v as f64) * (v as f64);
                }
            }
        }
        for (ci, &t) in checkpoints.iter().enumerate() {
            let ab = schedule.alpha_bar(t);
            let expect_sd = (1.0 - ab).sqrt();
            let se_mean = expect_sd / (trials as f64).sqrt();
            let se_var = (1.0 - ab) * (2.0 / (trials as f64 - 1.0)).sqrt();
            for i in 0..dims {
                let mean = sums[ci][i] / trials as f64;
                let var = sum_sqs[ci][i] / trials as f64 - mean * mean;
                let expect_mean = ab.sqrt() * x0.points().values()[i] as f64;
                assert!(
                    (mean - expect_mean).abs() < 4.0 * se_mean,
                    "t={t} coord {i}: mean {mean} vs {expect_mean} (se {se_mean})"
                );
                assert!(
                    (var - (1.0 - ab)).abs() < 4.0 * se_var,
                    "t={t} coord {i}: var {var} vs {} (se {se_var})",
                    1.0 - ab
                );
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let schedule = make_schedule(8, 1e-3, 0.05).unwrap();
        let x0 = cloud(6, 3);
        let a = forward_diffuse(&schedule, &x0, 9).unwrap();
        let b = forward_diffuse(&schedule, &x0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_sigma_zero_decoder_sampling_is_closed_form() {
        // sigma forced to zero and eps_hat forced to zero: each step divides
        // by sqrt(alpha_t), so the output is the start cloud times
        // prod_t 1/sqrt(alpha_t).
        let mut dpm = crate::diffusion::model::Dpm::init(
            3,
            vec![6, 8],
            vec![8, 8],
            4,
            12,
            (1e-3, 0.05),
            NormStats {
                center: vec![0.0; 3],
                scale: 1.0,
                clamped: false,
            },
            "test",
            4,
        )
        .unwrap();
        dpm.params
            .get_mut("dec.out.w")
            .unwrap()
            .values_mut()
            .fill(0.0);
        let schedule = dpm.schedule.clone().with_sigmas(vec![0.0; 12]);
        let factor: f64 = (1..=12).map(|t| 1.0 / schedule.alpha(t).sqrt()).product();
        dpm.schedule = schedule;

        let z = vec![0.0f32; 4];
        let out = sample_unconditional(&dpm, &z, 5, 77).unwrap();

        // Replay the same starting gaussian cloud.
        let mut rng = Rng::substream(77, stream::SAMPLE, 0);
        let mut start = vec![0.0f32; 5 * 3];
        rng.fill_normal_f32(&mut start);
        for (o, s) in out.points().values().iter().zip(&start) {
            let expected = *s as f64 * factor;
            assert!(
                (*o as f64 - expected).abs() < 1e-4 * expected.abs().max(1.0),
                "{o} vs {expected}"
            );
        }
    }

    #[test]
    fn sampling_deterministic() {
        let dpm = crate::diffusion::model::Dpm::init(
            3,
            vec![6, 8],
            vec![8, 8],
            4,
            8,
            (1e-3, 0.05),
            NormStats {
                center: vec![0.1, -0.2, 0.3],
                scale: 2.0,
                clamped: false,
            },
            "test",
            4,
        )
        .unwrap();
        let z = vec![0.5f32; 4];
        let a = sample_unconditional(&dpm, &z, 7, 5).unwrap();
        let b = sample_unconditional(&dpm, &z, 7, 5).unwrap();
        assert_eq!(a, b);
    }
}
