use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates and the step counter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place. A non-finite gradient rejects
/// the whole step and leaves `params` and `state` untouched.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::Shape {
            left: vec![params.len()],
            right: vec![grads.len(), state.m.len()],
            context: "adam params vs grads/state",
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite gradient at coordinate {i}"
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= config.lr * m_hat / (v_hat.sqrt() + config.eps);
    }
    Ok(())
}

/// Adam over the trainable entries of a [`Parameters`] tree.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    pub state: AdamState,
}

impl Adam {
    pub fn new<P: Parameters>(params: &P, config: AdamConfig) -> Self {
        Self {
            config,
            state: AdamState::new(params.trainable_count()),
        }
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let mut flat = params.flatten_trainable();
        adam_step(
            &mut flat,
            &grads.flatten_trainable(),
            &mut self.state,
            &self.config,
        )?;
        params.load_trainable(&flat);
        Ok(())
    }
}

/// Rescale `grads` so their global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm<P: Parameters>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm.is_finite() {
        grads.scale_all(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        adam_step(&mut p, &[1.0], &mut s, &cfg).unwrap();
        assert!((p[0] - (-0.1 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn equal_gradients_equal_updates() {
        let mut p = vec![0.5, 0.5];
        let mut s = AdamState::new(2);
        for _ in 0..3 {
            adam_step(&mut p, &[0.3, 0.3], &mut s, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn nan_gradient_rejected_without_side_effects() {
        let mut p = vec![1.0];
        let mut s = AdamState::new(1);
        assert!(adam_step(&mut p, &[f64::NAN], &mut s, &AdamConfig::default()).is_err());
        assert_eq!(p, vec![1.0]);
        assert_eq!(s.t, 0);
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = Tensor::vector(vec![3.0, 4.0]);
        let before = clip_global_norm(&mut g, 1.0);
        assert_eq!(before, 5.0);
        assert!((g.global_norm() - 1.0).abs() < 1e-15);
    }
}
