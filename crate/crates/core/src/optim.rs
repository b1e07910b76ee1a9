//! Parameter storage, the Adam optimizer and the learning-rate schedule.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Named parameters with matching gradient slots. Iteration order is the
/// lexicographic name order (BTreeMap), so optimizer sweeps are
/// deterministic.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
    grads: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a parameter and a zeroed gradient slot of the same shape.
    pub fn insert(&mut self, name: &str, tensor: Tensor) {
        self.grads
            .insert(name.to_string(), Tensor::zeros(tensor.shape().to_vec()));
        self.params.insert(name.to_string(), tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn grad(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn zero_grads(&mut self) {
        for g in self.grads.values_mut() {
            g.values_mut().fill(0.0);
        }
    }

    pub(crate) fn accumulate_grad(&mut self, name: &str, delta: &[f32]) -> Result<()> {
        let slot = self
            .grads
            .get_mut(name)
            .ok_or_else(|| Error::invalid(format!("no gradient slot for `{name}`")))?;
        if slot.numel() != delta.len() {
            return Err(Error::ShapeMismatch {
                op: "accumulate_grad",
                lhs: slot.shape().to_vec(),
                rhs: vec![delta.len()],
            });
        }
        for (dst, src) in slot.values_mut().iter_mut().zip(delta) {
            *dst += src;
        }
        Ok(())
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.values().map(Tensor::numel).sum()
    }
}

/// Adam moment estimates plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
    step: u64,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl AdamState {
    /// Moments shaped after `params`, standard (0.9, 0.999, 1e-8) defaults.
    pub fn for_params(params: &ParamStore) -> Self {
        Self::with_hyper(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(params: &ParamStore, beta1: f32, beta2: f32, epsilon: f32) -> Self {
        let zeros = |p: &ParamStore| -> BTreeMap<String, Tensor> {
            p.iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape().to_vec())))
                .collect()
        };
        AdamState {
            m: zeros(params),
            v: zeros(params),
            step: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update across every parameter in the store.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState, lr: f32) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let names: Vec<String> = params.names().cloned().collect();
    for name in names {
        let grad = params
            .grads
            .get(&name)
            .expect("grad slot exists for every param");
        if !grad.is_finite() {
            return Err(Error::NonFiniteGradient { name });
        }
        let g = grad.values().to_vec();
        let m = state
            .m
            .get_mut(&name)
            .ok_or_else(|| Error::invalid(format!("AdamState missing moment for `{name}`")))?;
        for (mi, &gi) in m.values_mut().iter_mut().zip(&g) {
            *mi = state.beta1 * *mi + (1.0 - state.beta1) * gi;
        }
        let m = m.values().to_vec();
        let v = state
            .v
            .get_mut(&name)
            .expect("v mirrors m");
        for (vi, &gi) in v.values_mut().iter_mut().zip(&g) {
            *vi = state.beta2 * *vi + (1.0 - state.beta2) * gi * gi;
        }
        let v = v.values();
        let p = params.params.get_mut(&name).expect("param exists");
        for ((pi, &mi), &vi) in p.values_mut().iter_mut().zip(&m).zip(v) {
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            *pi -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

/// Linear decay from `lr_initial` to `lr_final` over `total_iters`, clamped
/// at `lr_final` afterwards.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_initial: f32,
    pub lr_final: f32,
    pub total_iters: u64,
}

impl LrSchedule {
    pub fn lr_at(&self, iter: u64) -> f32 {
        if iter >= self.total_iters {
            return self.lr_final;
        }
        let frac = iter as f64 / self.total_iters as f64;
        (self.lr_initial as f64 + (self.lr_final as f64 - self.lr_initial as f64) * frac) as f32
    }
}
