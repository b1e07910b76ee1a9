//! Noise schedule: beta_t, alpha_t, alpha-bar_t and the decoding-noise
//! standard deviations sigma_t = sqrt(beta_t).
//!
//! Beta runs linearly from `beta1` to `betaT`; sigma is then strictly
//! increasing alongside it. Coefficients are kept in f64 so running products
//! stay exact to well below f32 resolution; they are cast to f32 at the
//! point-cloud boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    sigma: Vec<f64>,
}

/// Default (beta1, betaT) endpoints: (1e-4, 0.02) at T = 256, scaled by
/// 256/T for other step counts so the total noise budget stays comparable.
pub fn default_beta_range(t_steps: usize) -> (f64, f64) {
    let scale = 256.0 / t_steps as f64;
    (1e-4 * scale, 0.02 * scale)
}

/// Validated constructor: linear beta from `beta1` to `betaT`.
pub fn make_schedule(t_steps: usize, beta1: f64, beta_t: f64) -> Result<NoiseSchedule> {
    if t_steps < 1 {
        return Err(Error::invalid("make_schedule: T must be >= 1"));
    }
    if !(beta1 > 0.0 && beta1 <= beta_t && beta_t < 1.0) {
        return Err(Error::invalid(format!(
            "make_schedule: need 0 < beta1 <= betaT < 1, got ({beta1}, {beta_t})"
        )));
    }
    let betas: Vec<f64> = if t_steps == 1 {
        vec![beta1]
    } else {
        (0..t_steps)
            .map(|i| beta1 + (beta_t - beta1) * i as f64 / (t_steps - 1) as f64)
            .collect()
    };
    Ok(NoiseSchedule::from_betas(betas))
}

impl NoiseSchedule {
    /// Unvalidated constructor, mainly for tests that need degenerate
    /// schedules (for example all-zero beta).
    pub fn from_betas(betas: Vec<f64>) -> Self {
        assert!(!betas.is_empty(), "schedule needs at least one step");
        let alpha: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(betas.len());
        let mut prod = 1.0;
        for a in &alpha {
            prod *= a;
            alpha_bar.push(prod);
        }
        let sigma: Vec<f64> = betas.iter().map(|b| b.sqrt()).collect();
        NoiseSchedule {
            beta: betas,
            alpha,
            alpha_bar,
            sigma,
        }
    }

    /// Replace sigma, a diagnostic hook for closed-form sampling checks.
    pub fn with_sigmas(mut self, sigmas: Vec<f64>) -> Self {
        assert_eq!(sigmas.len(), self.beta.len());
        self.sigma = sigmas;
        self
    }

    pub fn t_steps(&self) -> usize {
        self.beta.len()
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t < 1 || t > self.t_steps() {
            return Err(Error::invalid(format!(
                "timestep {t} out of range 1..={}",
                self.t_steps()
            )));
        }
        Ok(())
    }

    /// All accessors take one-based t, matching the recursion t = T..1.
    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t - 1]
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma[t - 1]
    }

    pub fn validate_t(&self, t: usize) -> Result<()> {
        self.check_t(t)
    }
}
