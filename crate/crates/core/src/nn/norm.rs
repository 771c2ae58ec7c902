//! Batch and layer normalization.
//!
//! Batch norm forward is `&self`: train-mode batch statistics are returned in
//! the cache and folded into the running estimates by [`BatchNorm::commit`],
//! so a forward pass never mutates shared parameters.

use serde::{Deserialize, Serialize};

use super::params::{join, ParamKind, Parameters};
use super::Mode;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;
pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchNormConfig {
    pub eps: f64,
    pub momentum: f64,
}

impl Default for BatchNormConfig {
    fn default() -> Self {
        Self {
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub config: BatchNormConfig,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var_unbiased: Vec<f64>,
    mode: Mode,
}

impl BatchNorm {
    pub fn new(dim: usize, config: BatchNormConfig) -> Self {
        Self {
            gamma: Tensor::filled(&[dim], 1.0),
            beta: Tensor::zeros(&[dim]),
            running_mean: Tensor::zeros(&[dim]),
            running_var: Tensor::filled(&[dim], 1.0),
            config,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<(Tensor, BatchNormCache)> {
        let (b, d) = (x.rows(), x.cols());
        if d != self.dim() {
            return Err(Error::Shape {
                left: x.shape().to_vec(),
                right: self.gamma.shape().to_vec(),
                context: "batchnorm input vs features",
            });
        }
        let (mean, var, unbiased) = match mode {
            Mode::Train => {
                if b < 2 {
                    return Err(Error::Config(
                        "batch norm in train mode needs at least 2 rows (variance undefined)"
                            .into(),
                    ));
                }
                let mut mean = vec![0.0; d];
                for i in 0..b {
                    for (m, v) in mean.iter_mut().zip(x.row(i)) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= b as f64);
                let mut var = vec![0.0; d];
                for i in 0..b {
                    for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                let unbiased = var.iter().map(|s| s / (b - 1) as f64).collect();
                var.iter_mut().for_each(|s| *s /= b as f64);
                (mean, var, unbiased)
            }
            Mode::Eval => (
                self.running_mean.data().to_vec(),
                self.running_var.data().to_vec(),
                Vec::new(),
            ),
        };
        let inv_std: Vec<f64> = var
            .iter()
            .map(|v| 1.0 / (v + self.config.eps).sqrt())
            .collect();
        let mut xhat = Tensor::zeros(&[b, d]);
        let mut y = Tensor::zeros(&[b, d]);
        for i in 0..b {
            for j in 0..d {
                let h = (x.get(i, j) - mean[j]) * inv_std[j];
                xhat.set(i, j, h);
                y.set(i, j, h * self.gamma.data()[j] + self.beta.data()[j]);
            }
        }
        Ok((
            y,
            BatchNormCache {
                xhat,
                inv_std,
                batch_mean: if mode == Mode::Train {
                    mean
                } else {
                    Vec::new()
                },
                batch_var_unbiased: unbiased,
                mode,
            },
        ))
    }

    /// Fold the batch statistics of a train-mode forward into the running
    /// estimates. No-op for eval-mode caches.
    pub fn commit(&mut self, cache: &BatchNormCache) {
        if cache.mode != Mode::Train {
            return;
        }
        let m = self.config.momentum;
        for (r, b) in self
            .running_mean
            .data_mut()
            .iter_mut()
            .zip(&cache.batch_mean)
        {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, b) in self
            .running_var
            .data_mut()
            .iter_mut()
            .zip(&cache.batch_var_unbiased)
        {
            *r = (1.0 - m) * *r + m * b;
        }
    }

    pub fn backward(&self, cache: &BatchNormCache, d_out: &Tensor, grad: &mut BatchNorm) -> Tensor {
        let (b, d) = (d_out.rows(), d_out.cols());
        let gamma = self.gamma.data();
        let mut sum_dy = vec![0.0; d];
        let mut sum_dy_xhat = vec![0.0; d];
        for i in 0..b {
            for j in 0..d {
                let g = d_out.get(i, j);
                sum_dy[j] += g;
                sum_dy_xhat[j] += g * cache.xhat.get(i, j);
            }
        }
        for j in 0..d {
            grad.gamma.data_mut()[j] += sum_dy_xhat[j];
            grad.beta.data_mut()[j] += sum_dy[j];
        }
        let mut dx = Tensor::zeros(&[b, d]);
        match cache.mode {
            Mode::Eval => {
                for i in 0..b {
                    for j in 0..d {
                        dx.set(i, j, d_out.get(i, j) * gamma[j] * cache.inv_std[j]);
                    }
                }
            }
            Mode::Train => {
                let n = b as f64;
                for i in 0..b {
                    for j in 0..d {
                        let v = gamma[j] * cache.inv_std[j] / n
                            * (n * d_out.get(i, j)
                                - sum_dy[j]
                                - cache.xhat.get(i, j) * sum_dy_xhat[j]);
                        dx.set(i, j, v);
                    }
                }
            }
        }
        dx
    }
}

impl Parameters for BatchNorm {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        f(&join(prefix, "gamma"), &self.gamma, ParamKind::Trainable);
        f(&join(prefix, "beta"), &self.beta, ParamKind::Trainable);
        f(
            &join(prefix, "running_mean"),
            &self.running_mean,
            ParamKind::Buffer,
        );
        f(
            &join(prefix, "running_var"),
            &self.running_var,
            ParamKind::Buffer,
        );
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        f(
            &join(prefix, "gamma"),
            &mut self.gamma,
            ParamKind::Trainable,
        );
        f(&join(prefix, "beta"), &mut self.beta, ParamKind::Trainable);
        f(
            &join(prefix, "running_mean"),
            &mut self.running_mean,
            ParamKind::Buffer,
        );
        f(
            &join(prefix, "running_var"),
            &mut self.running_var,
            ParamKind::Buffer,
        );
    }
}

/// Per-row normalization with learnable scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[dim], 1.0),
            beta: Tensor::zeros(&[dim]),
        }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, LayerNormCache) {
        let (n, d) = (x.rows(), x.cols());
        assert_eq!(d, self.gamma.len(), "layernorm width");
        let mut xhat = Tensor::zeros(&[n, d]);
        let mut y = Tensor::zeros(&[n, d]);
        let mut inv_std = Vec::with_capacity(n);
        for i in 0..n {
            let row = x.row(i);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for j in 0..d {
                let h = (row[j] - mean) * is;
                xhat.set(i, j, h);
                y.set(i, j, h * self.gamma.data()[j] + self.beta.data()[j]);
            }
        }
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache, d_out: &Tensor, grad: &mut LayerNorm) -> Tensor {
        let (n, d) = (d_out.rows(), d_out.cols());
        let gamma = self.gamma.data();
        let mut dx = Tensor::zeros(&[n, d]);
        let df = d as f64;
        for i in 0..n {
            let mut sum_g = 0.0;
            let mut sum_g_xhat = 0.0;
            for j in 0..d {
                let dy = d_out.get(i, j);
                let xh = cache.xhat.get(i, j);
                grad.gamma.data_mut()[j] += dy * xh;
                grad.beta.data_mut()[j] += dy;
                let g = dy * gamma[j];
                sum_g += g;
                sum_g_xhat += g * xh;
            }
            for j in 0..d {
                let g = d_out.get(i, j) * gamma[j];
                let v =
                    cache.inv_std[i] / df * (df * g - sum_g - cache.xhat.get(i, j) * sum_g_xhat);
                dx.set(i, j, v);
            }
        }
        dx
    }
}

impl Parameters for LayerNorm {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        f(&join(prefix, "gamma"), &self.gamma, ParamKind::Trainable);
        f(&join(prefix, "beta"), &self.beta, ParamKind::Trainable);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        f(
            &join(prefix, "gamma"),
            &mut self.gamma,
            ParamKind::Trainable,
        );
        f(&join(prefix, "beta"), &mut self.beta, ParamKind::Trainable);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_mode_with_unit_stats_is_identity() {
        let bn = BatchNorm::new(2, BatchNormConfig::default());
        let x = Tensor::matrix(2, 2, vec![0.5, -1.0, 3.0, 2.0]);
        let (y, _) = bn.forward(&x, Mode::Eval).unwrap();
        assert!(y.max_abs_diff(&x) < 1e-4);
    }

    #[test]
    fn train_mode_two_points() {
        let bn = BatchNorm::new(1, BatchNormConfig::default());
        let x = Tensor::matrix(2, 1, vec![0.0, 2.0]);
        let (y, _) = bn.forward(&x, Mode::Train).unwrap();
        let s = 1.0 / (1.0 + BN_EPS).sqrt();
        assert!((y.get(0, 0) + s).abs() < 1e-12);
        assert!((y.get(1, 0) - s).abs() < 1e-12);
    }

    #[test]
    fn single_row_train_mode_is_an_error() {
        let bn = BatchNorm::new(3, BatchNormConfig::default());
        assert!(bn.forward(&Tensor::zeros(&[1, 3]), Mode::Train).is_err());
    }

    #[test]
    fn commit_moves_running_stats_by_momentum() {
        let mut bn = BatchNorm::new(1, BatchNormConfig::default());
        let x = Tensor::matrix(2, 1, vec![0.0, 2.0]);
        let (_, cache) = bn.forward(&x, Mode::Train).unwrap();
        bn.commit(&cache);
        assert!((bn.running_mean.data()[0] - 0.1).abs() < 1e-15);
        // unbiased batch variance is 2
        assert!((bn.running_var.data()[0] - 1.1).abs() < 1e-15);
    }
}
