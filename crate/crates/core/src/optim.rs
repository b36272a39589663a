//! Adam with decoupled weight decay, on flat `f64` parameter vectors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamWConfig {
    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = lr;
        self
    }

    pub fn with_weight_decay(mut self, weight_decay: f64) -> Self {
        self.weight_decay = weight_decay;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub config: AdamWConfig,
}

impl OptimState {
    pub fn new(len: usize, config: AdamWConfig) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            config,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

fn check(params: &[f64], grads: &[f64], state: &OptimState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.len() {
        return Err(Error::Shape(format!(
            "params {}, grads {}, state {} must match",
            params.len(),
            grads.len(),
            state.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(i));
    }
    Ok(())
}

/// Adam moment update and gradient step, no weight decay.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut OptimState) -> Result<()> {
    check(params, grads, state)?;
    let AdamWConfig {
        lr, beta1, beta2, eps, ..
    } = state.config;
    state.t += 1;
    let c1 = 1.0 - beta1.powf(state.t as f64);
    let c2 = 1.0 - beta2.powf(state.t as f64);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Scales every parameter by `1 − lr·λ`.
pub fn decay(params: &mut [f64], lr: f64, weight_decay: f64) {
    let shrink = 1.0 - lr * weight_decay;
    for p in params {
        *p *= shrink;
    }
}

/// One AdamW step. Decay acts on the pre-step value:
/// `p ← p·(1 − lr·λ) − lr·m̂/(√v̂ + ε)`.
pub fn adamw_step(params: &mut [f64], grads: &[f64], state: &mut OptimState) -> Result<()> {
    check(params, grads, state)?;
    let AdamWConfig { lr, weight_decay, .. } = state.config;
    decay(params, lr, weight_decay);
    adam_step(params, grads, state)
}

/// Runs `steps` AdamW updates with `grad(x)` supplying gradients.
pub fn minimize(
    x0: &[f64],
    steps: usize,
    config: AdamWConfig,
    mut grad: impl FnMut(&[f64]) -> Vec<f64>,
) -> Result<(Vec<f64>, OptimState)> {
    let mut x = x0.to_vec();
    let mut state = OptimState::new(x.len(), config);
    for _ in 0..steps {
        let g = grad(&x);
        adamw_step(&mut x, &g, &mut state)?;
    }
    Ok((x, state))
}
