use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{join, sigmoid, Linear, ParamKind, Parameters};
use crate::tensor::Tensor;
use crate::train::{Adam, AdamConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            lr: 1e-2,
            seed: 0,
        }
    }
}

/// Numerically stable `-[y ln σ(z) + (1-y) ln(1-σ(z))]`.
pub fn bce_with_logits(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Linear head D→1, read through a sigmoid for classification.
pub type LinearHead = Linear;

fn check_rows(x: &Tensor, y: &[f64]) -> Result<()> {
    if x.rows() != y.len() || y.is_empty() {
        return Err(Error::Shape {
            left: x.shape().to_vec(),
            right: vec![y.len()],
            context: "head inputs vs labels",
        });
    }
    Ok(())
}

fn fit<P: Parameters>(
    head: &mut P,
    config: &HeadConfig,
    mut loss_grad: impl FnMut(&P) -> Result<(f64, P)>,
) -> Result<f64> {
    let mut adam = Adam::new(
        head,
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
    );
    let mut last = f64::NAN;
    for _ in 0..config.steps {
        let (loss, grad) = loss_grad(head)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("head loss became {loss}")));
        }
        adam.step(head, &grad)?;
        last = loss;
    }
    Ok(last)
}

/// Mean BCE of `σ(xw + b)` against 0/1 labels, with its gradient.
pub fn binary_loss(head: &LinearHead, x: &Tensor, y: &[f64]) -> Result<(f64, LinearHead)> {
    check_rows(x, y)?;
    let z = head.forward(x)?;
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut dz = Tensor::zeros(&[y.len(), 1]);
    for i in 0..y.len() {
        let zi = z.get(i, 0);
        loss += bce_with_logits(zi, y[i]);
        dz.set(i, 0, (sigmoid(zi) - y[i]) / n);
    }
    let mut grad = head.zeros_like();
    head.backward(x, &dz, &mut grad);
    Ok((loss / n, grad))
}

/// Mean squared error of `xw + b`, with its gradient.
pub fn regression_loss(head: &LinearHead, x: &Tensor, y: &[f64]) -> Result<(f64, LinearHead)> {
    check_rows(x, y)?;
    let p = head.forward(x)?;
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut dp = Tensor::zeros(&[y.len(), 1]);
    for i in 0..y.len() {
        let r = p.get(i, 0) - y[i];
        loss += r * r;
        dp.set(i, 0, 2.0 * r / n);
    }
    let mut grad = head.zeros_like();
    head.backward(x, &dp, &mut grad);
    Ok((loss / n, grad))
}

fn init_linear(dim: usize, seed: u64) -> LinearHead {
    Linear::new(dim, 1, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn train_binary_head(x: &Tensor, y: &[f64], config: &HeadConfig) -> Result<LinearHead> {
    if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::Data(format!(
            "binary labels must be 0 or 1, found {bad}"
        )));
    }
    let mut head = init_linear(x.cols(), config.seed);
    fit(&mut head, config, |h| binary_loss(h, x, y))?;
    Ok(head)
}

pub fn train_regression_head(x: &Tensor, y: &[f64], config: &HeadConfig) -> Result<LinearHead> {
    let mut head = init_linear(x.cols(), config.seed);
    fit(&mut head, config, |h| regression_loss(h, x, y))?;
    Ok(head)
}

pub fn predict_probabilities(head: &LinearHead, x: &Tensor) -> Result<Vec<f64>> {
    Ok(head
        .forward(x)?
        .data()
        .iter()
        .map(|&z| sigmoid(z))
        .collect())
}

pub fn predict_values(head: &LinearHead, x: &Tensor) -> Result<Vec<f64>> {
    Ok(head.forward(x)?.into_data())
}

/// Pairwise contact scorer `s(i, j) = h_i ᵀ M h_j + b` with
/// `M = (W + Wᵀ)/2`, so `s(i, j) == s(j, i)` for any `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactHead {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl ContactHead {
    pub fn new<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        Self {
            weight: Tensor::randn(&[dim, dim], 0.1 / (dim as f64).sqrt(), rng),
            bias: Tensor::zeros(&[1]),
        }
    }

    fn symmetric(&self) -> Tensor {
        let mut m = self.weight.clone();
        m.add_assign(&self.weight.transpose());
        m.scale(0.5);
        m
    }

    /// n×n logits for one peptide's per-residue features.
    pub fn logits(&self, h: &Tensor) -> Tensor {
        let mut s = h.matmul(&self.symmetric()).matmul_t(h);
        let b = self.bias.data()[0];
        // Averaging mirrored entries makes the symmetry exact in floating point.
        for i in 0..s.rows() {
            for j in i..s.rows() {
                let v = 0.5 * (s.get(i, j) + s.get(j, i)) + b;
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        s
    }

    pub fn probabilities(&self, h: &Tensor) -> Tensor {
        self.logits(h).map(sigmoid)
    }
}

impl Parameters for ContactHead {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        f(&join(prefix, "weight"), &self.weight, ParamKind::Trainable);
        f(&join(prefix, "bias"), &self.bias, ParamKind::Trainable);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        f(
            &join(prefix, "weight"),
            &mut self.weight,
            ParamKind::Trainable,
        );
        f(&join(prefix, "bias"), &mut self.bias, ParamKind::Trainable);
    }
}

/// One peptide for the contact task: per-residue features and the binary
/// target matrix. Only pairs with `j - i >= min_sep` are scored.
#[derive(Debug, Clone)]
pub struct ContactExample {
    pub features: Tensor,
    pub targets: Tensor,
}

pub fn valid_pairs(n: usize, min_sep: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + min_sep.max(1)..n).map(move |j| (i, j)))
}

/// Mean elementwise BCE over all valid upper-triangle pairs of all examples.
pub fn contact_loss(
    head: &ContactHead,
    data: &[ContactExample],
    min_sep: usize,
) -> Result<(f64, ContactHead)> {
    let total: usize = data
        .iter()
        .map(|e| valid_pairs(e.features.rows(), min_sep).count())
        .sum();
    if total == 0 {
        return Err(Error::Data(format!(
            "no residue pairs at separation >= {min_sep}"
        )));
    }
    let dim = head.weight.rows();
    let mut loss = 0.0;
    let mut d_m = Tensor::zeros(&[dim, dim]);
    let mut d_b = 0.0;
    for ex in data {
        let h = &ex.features;
        let s = head.logits(h);
        let n = h.rows();
        let mut g = Tensor::zeros(&[n, n]);
        for (i, j) in valid_pairs(n, min_sep) {
            let z = s.get(i, j);
            let t = ex.targets.get(i, j);
            loss += bce_with_logits(z, t);
            let d = (sigmoid(z) - t) / total as f64;
            g.set(i, j, d);
            d_b += d;
        }
        // ∂/∂M of Σ g_ij h_iᵀ M h_j = Hᵀ G H.
        d_m.add_assign(&h.t_matmul(&g.matmul(h)));
    }
    let mut d_w = d_m.clone();
    d_w.add_assign(&d_m.transpose());
    d_w.scale(0.5);
    Ok((
        loss / total as f64,
        ContactHead {
            weight: d_w,
            bias: Tensor::vector(vec![d_b]),
        },
    ))
}

pub fn train_contact_head(
    data: &[ContactExample],
    min_sep: usize,
    config: &HeadConfig,
) -> Result<ContactHead> {
    let dim = data
        .first()
        .map(|e| e.features.cols())
        .ok_or_else(|| Error::Data("no contact training examples".into()))?;
    let mut head = ContactHead::new(dim, &mut ChaCha8Rng::seed_from_u64(config.seed));
    fit(&mut head, config, |h| contact_loss(h, data, min_sep))?;
    Ok(head)
}
