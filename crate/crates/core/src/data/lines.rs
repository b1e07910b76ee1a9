//! Synthetic line-segment events.
//!
//! Each event is a line along the z axis: x = 0, one y drawn from U(0, 2)
//! per event, and z values drawn i.i.d. from U(0, 2). The noisy variant adds
//! N(0, (0.1 y)^2) independently to all three coordinates of every point, so
//! the spread of the x coordinate is a direct estimator of the added noise.
//!
//! Geometry and noise come from separate substreams of the seed: the noisy
//! dataset for a seed corrupts exactly the clean events of the same seed.

use crate::data::{Dataset, PointCloud};
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};
use crate::tensor::Tensor;

pub fn gen_lines(n_events: usize, n_points: usize, seed: u64, noisy: bool) -> Result<Dataset> {
    if n_events < 1 {
        return Err(Error::invalid("gen_lines: n_events must be >= 1"));
    }
    if n_points < 2 {
        return Err(Error::invalid("gen_lines: n_points must be >= 2"));
    }
    let mut events = Vec::with_capacity(n_events);
    for ev in 0..n_events {
        let mut geom = Rng::substream(seed, stream::LINES_GEOMETRY, ev as u64);
        let y = geom.uniform_range(0.0, 2.0) as f32;
        let mut values = Vec::with_capacity(n_points * 3);
        for _ in 0..n_points {
            let z = geom.uniform_range(0.0, 2.0) as f32;
            values.extend_from_slice(&[0.0, y, z]);
        }
        if noisy {
            let sigma = 0.1 * y;
            let mut noise = Rng::substream(seed, stream::LINES_NOISE, ev as u64);
            for v in values.iter_mut() {
                *v += sigma * noise.normal_f32();
            }
        }
        events.push(PointCloud::new(Tensor::new(vec![n_points, 3], values)?)?);
    }
    let label = if noisy { "lines-noisy" } else { "lines-clean" };
    Dataset::new(events, label)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_lines_have_exact_geometry() {
        let ds = gen_lines(20, 64, 9, false).unwrap();
        for e in &ds.events {
            let y0 = e.point(0)[1];
            for i in 0..e.n_points() {
                let p = e.point(i);
                assert_eq!(p[0], 0.0, "x must be exactly zero");
                assert_eq!(p[1], y0, "y constant within an event");
                assert!((0.0..2.0).contains(&p[2]));
            }
        }
    }

    #[test]
    fn paper_scale_counts() {
        let ds = gen_lines(1000, 256, 1, false).unwrap();
        assert_eq!(ds.n_events(), 1000);
        assert!(ds.events.iter().all(|e| e.n_points() == 256));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = gen_lines(5, 32, 77, true).unwrap();
        let b = gen_lines(5, 32, 77, true).unwrap();
        let c = gen_lines(5, 32, 78, true).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noisy_shares_clean_geometry() {
        // Same seed: the noisy events perturb exactly the clean ones. The y
        // column of event k must match the clean y up to the added noise,
        // which is mean-zero; check the base z draw stayed aligned by
        // removing noise determinism from the equation entirely at y ~ 0.
        let clean = gen_lines(50, 16, 3, false).unwrap();
        let noisy = gen_lines(50, 16, 3, true).unwrap();
        for (c, n) in clean.events.iter().zip(&noisy.events) {
            let y = c.point(0)[1];
            let max_dev = c.points().max_abs_diff(n.points()).unwrap();
            // Residuals are N(0, 0.1 y); 6 sigma covers 16 x 3 draws comfortably.
            assert!(max_dev <= 0.1 * y * 6.0 + 1e-6, "deviation {max_dev} at y {y}");
        }
    }

    #[test]
    fn noise_std_matches_configured_law_near_y_one() {
        // Pool x residuals from events with y close to 1.0; their standard
        // deviation estimates 0.1 * y.
        let ds = gen_lines(4000, 64, 42, true).unwrap();
        let clean = gen_lines(4000, 64, 42, false).unwrap();
        let mut xs = Vec::new();
        for (e, c) in ds.events.iter().zip(&clean.events) {
            let y = c.point(0)[1];
            if (0.95..=1.05).contains(&y) {
                xs.extend(e.coord(0));
            }
        }
        assert!(xs.len() >= 10_000, "only {} points near y=1", xs.len());
        let mean = xs.iter().map(|&v| v as f64).sum::<f64>() / xs.len() as f64;
        let var = xs
            .iter()
            .map(|&v| {
                let d = v as f64 - mean;
                d * d
            })
            .sum::<f64>()
            / (xs.len() - 1) as f64;
        let sd = var.sqrt();
        assert!((sd - 0.1).abs() < 0.005, "sample std {sd}");
    }
}
