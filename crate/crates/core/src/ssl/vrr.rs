//! Variational representation reconstruction.
//!
//! Each view is mapped to a diagonal Gaussian posterior, a latent is drawn by
//! reparameterization, and a linear decoder reconstructs the *other* view's
//! embedding, which is held constant (stop-gradient):
//!
//! ```text
//! L = ½·mean‖q_x(z_x) − SG(h_y)‖² + ½·mean‖q_y(z_y) − SG(h_x)‖²
//!   + (β/2)·[KL(q(z_x|x) ‖ N(0,I)) + KL(q(z_y|y) ‖ N(0,I))]
//! ```
//!
//! Means run over the batch and the Monte Carlo draws.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::encoders::EmbeddingBatch;
use crate::error::{Error, Result};
use crate::nn::{join, Linear, ParamKind, Parameters};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VrrConfig {
    pub beta: f64,
    pub mc_samples: usize,
    pub latent_dim: usize,
}

impl Default for VrrConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            mc_samples: 1,
            latent_dim: 32,
        }
    }
}

impl VrrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(Error::Config(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        if self.mc_samples == 0 || self.latent_dim == 0 {
            return Err(Error::Config(
                "mc_samples and latent_dim must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Posterior heads and decoder for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct VrrHead {
    pub mu: Linear,
    pub logvar: Linear,
    pub decoder: Linear,
}

impl VrrHead {
    pub fn new<R: Rng + ?Sized>(dim: usize, latent: usize, rng: &mut R) -> Self {
        let mut logvar = Linear::new(dim, latent, rng);
        // start close to unit variance
        logvar.weight.scale(0.1);
        Self {
            mu: Linear::new(dim, latent, rng),
            logvar,
            decoder: Linear::new(latent, dim, rng),
        }
    }
}

impl Parameters for VrrHead {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        self.mu.visit(&join(prefix, "mu"), f);
        self.logvar.visit(&join(prefix, "logvar"), f);
        self.decoder.visit(&join(prefix, "decoder"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        self.mu.visit_mut(&join(prefix, "mu"), f);
        self.logvar.visit_mut(&join(prefix, "logvar"), f);
        self.decoder.visit_mut(&join(prefix, "decoder"), f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VrrParams {
    /// Encodes `h_x`, reconstructs `h_y`.
    pub x: VrrHead,
    /// Encodes `h_y`, reconstructs `h_x`.
    pub y: VrrHead,
    pub config: VrrConfig,
}

impl VrrParams {
    pub fn new<R: Rng + ?Sized>(dim: usize, config: VrrConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            x: VrrHead::new(dim, config.latent_dim, rng),
            y: VrrHead::new(dim, config.latent_dim, rng),
            config,
        })
    }
}

impl Parameters for VrrParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        self.x.visit(&join(prefix, "x"), f);
        self.y.visit(&join(prefix, "y"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        self.x.visit_mut(&join(prefix, "x"), f);
        self.y.visit_mut(&join(prefix, "y"), f);
    }
}

/// Standard-normal draws for the reparameterization, one `B×Dz` matrix per
/// Monte Carlo sample and view. Drawing them up front makes the loss a
/// deterministic function of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VrrNoise {
    pub x: Vec<Tensor>,
    pub y: Vec<Tensor>,
}

impl VrrNoise {
    pub fn sample<R: Rng + ?Sized>(batch: usize, config: &VrrConfig, rng: &mut R) -> Self {
        let mut draw = || {
            (0..config.mc_samples)
                .map(|_| {
                    let data = (0..batch * config.latent_dim)
                        .map(|_| StandardNormal.sample(&mut *rng))
                        .collect();
                    Tensor::matrix(batch, config.latent_dim, data)
                })
                .collect::<Vec<_>>()
        };
        let x = draw();
        let y = draw();
        Self { x, y }
    }

    pub fn zeros(batch: usize, config: &VrrConfig) -> Self {
        let z = vec![Tensor::zeros(&[batch, config.latent_dim]); config.mc_samples];
        Self { x: z.clone(), y: z }
    }
}

/// `Σ_d ½(μ_d² + exp(logvar_d) − 1 − logvar_d)`.
pub fn kl_diag_gaussian(mu: &[f64], logvar: &[f64]) -> f64 {
    mu.iter()
        .zip(logvar)
        .map(|(m, lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
        .sum()
}

#[derive(Debug, Clone)]
pub struct VrrOutput {
    pub loss: f64,
    pub reconstruction: f64,
    pub kl: f64,
    pub d_hx: Tensor,
    pub d_hy: Tensor,
    pub grad: VrrParams,
}

struct ViewTerms {
    recon: f64,
    kl: f64,
    d_source: Tensor,
}

fn view_terms(
    head: &VrrHead,
    grad: &mut VrrHead,
    source: &Tensor,
    target: &Tensor,
    noise: &[Tensor],
    beta: f64,
) -> Result<ViewTerms> {
    let b = source.rows();
    let bf = b as f64;
    let s = noise.len() as f64;
    let mu = head.mu.forward(source)?;
    let logvar = head.logvar.forward(source)?;
    let std = logvar.map(|lv| (0.5 * lv).exp());
    let mut d_mu = Tensor::zeros(mu.shape());
    let mut d_logvar = Tensor::zeros(logvar.shape());
    let mut recon = 0.0;
    for eps in noise {
        if eps.shape() != mu.shape() {
            return Err(Error::Shape {
                left: eps.shape().to_vec(),
                right: mu.shape().to_vec(),
                context: "noise vs latent",
            });
        }
        let mut z = mu.clone();
        for ((zv, e), sd) in z.data_mut().iter_mut().zip(eps.data()).zip(std.data()) {
            *zv += sd * e;
        }
        let rec = head.decoder.forward(&z)?;
        let mut diff = rec;
        diff.add_scaled(target, -1.0);
        recon += 0.5 * diff.sum_sq() / (bf * s);
        diff.scale(1.0 / (bf * s));
        let dz = head.decoder.backward(&z, &diff, &mut grad.decoder);
        d_mu.add_assign(&dz);
        for (((dl, g), e), sd) in d_logvar
            .data_mut()
            .iter_mut()
            .zip(dz.data())
            .zip(eps.data())
            .zip(std.data())
        {
            *dl += g * e * sd * 0.5;
        }
    }
    let mut kl = 0.0;
    for i in 0..b {
        kl += kl_diag_gaussian(mu.row(i), logvar.row(i));
    }
    kl /= bf;
    let c = 0.5 * beta / bf;
    for (dm, m) in d_mu.data_mut().iter_mut().zip(mu.data()) {
        *dm += c * m;
    }
    for (dl, lv) in d_logvar.data_mut().iter_mut().zip(logvar.data()) {
        *dl += c * 0.5 * (lv.exp() - 1.0);
    }
    let mut d_source = head.mu.backward(source, &d_mu, &mut grad.mu);
    d_source.add_assign(&head.logvar.backward(source, &d_logvar, &mut grad.logvar));
    Ok(ViewTerms {
        recon,
        kl,
        d_source,
    })
}

pub fn vrr_loss(batch: &EmbeddingBatch, params: &VrrParams, noise: &VrrNoise) -> Result<VrrOutput> {
    vrr_loss_with_targets(batch, batch, params, noise)
}

/// The same loss with the stop-gradient made explicit: `sources` feed the
/// posteriors and receive gradients, `targets` are what gets reconstructed.
pub fn vrr_loss_with_targets(
    sources: &EmbeddingBatch,
    targets: &EmbeddingBatch,
    params: &VrrParams,
    noise: &VrrNoise,
) -> Result<VrrOutput> {
    params.config.validate()?;
    for t in [&sources.h_x, &sources.h_y, &targets.h_x, &targets.h_y] {
        if !t.all_finite() {
            return Err(Error::Numeric("non-finite embeddings".into()));
        }
    }
    let beta = params.config.beta;
    let mut grad = params.zeros_like();
    let x = view_terms(
        &params.x,
        &mut grad.x,
        &sources.h_x,
        &targets.h_y,
        &noise.x,
        beta,
    )?;
    let y = view_terms(
        &params.y,
        &mut grad.y,
        &sources.h_y,
        &targets.h_x,
        &noise.y,
        beta,
    )?;
    let reconstruction = x.recon + y.recon;
    let kl = x.kl + y.kl;
    Ok(VrrOutput {
        loss: reconstruction + 0.5 * beta * kl,
        reconstruction,
        kl,
        d_hx: x.d_source,
        d_hy: y.d_source,
        grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// D = Dz = 1 heads with all-zero weights; biases set μ, logvar and the
    /// decoder output directly.
    fn constant_head(mu: f64, logvar: f64, out: f64) -> VrrHead {
        let lin =
            |b: f64| Linear::from_parts(Tensor::zeros(&[1, 1]), Tensor::vector(vec![b])).unwrap();
        VrrHead {
            mu: lin(mu),
            logvar: lin(logvar),
            decoder: lin(out),
        }
    }

    fn params(x: VrrHead, y: VrrHead, beta: f64) -> VrrParams {
        VrrParams {
            x,
            y,
            config: VrrConfig {
                beta,
                mc_samples: 1,
                latent_dim: 1,
            },
        }
    }

    fn batch(hx: f64, hy: f64) -> EmbeddingBatch {
        EmbeddingBatch::from_views(
            Tensor::matrix(1, 1, vec![hx]),
            Tensor::matrix(1, 1, vec![hy]),
        )
    }

    #[test]
    fn kl_closed_forms() {
        assert_eq!(kl_diag_gaussian(&[0.0], &[0.0]), 0.0);
        assert_eq!(kl_diag_gaussian(&[1.0], &[0.0]), 0.5);
        let v = kl_diag_gaussian(&[0.0], &[4f64.ln()]);
        assert!((v - 0.5 * (3.0 - 4f64.ln())).abs() < 1e-15);
        assert!((v - 0.8069).abs() < 1e-4);
    }

    #[test]
    fn perfect_reconstruction_standard_posterior_is_zero() {
        let p = params(
            constant_head(0.0, 0.0, 0.7),
            constant_head(0.0, 0.0, -0.2),
            1.0,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let noise = VrrNoise::sample(1, &p.config, &mut rng);
        let out = vrr_loss(&batch(-0.2, 0.7), &p, &noise).unwrap();
        assert_eq!(out.loss, 0.0);
    }

    #[test]
    fn kl_only_term_with_beta_two() {
        let p = params(
            constant_head(1.0, 0.0, 0.7),
            constant_head(0.0, 0.0, -0.2),
            2.0,
        );
        let noise = VrrNoise::sample(1, &p.config, &mut ChaCha8Rng::seed_from_u64(3));
        let out = vrr_loss(&batch(-0.2, 0.7), &p, &noise).unwrap();
        assert!((out.loss - 0.5).abs() < 1e-15);
    }

    #[test]
    fn target_receives_no_gradient_from_reconstruction() {
        // Only the x-view reconstruction is active: the y head is perfect and
        // standard, and beta is 0. Then h_y sees no gradient at all.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = VrrParams::new(
            3,
            VrrConfig {
                beta: 0.0,
                mc_samples: 2,
                latent_dim: 2,
            },
            &mut rng,
        )
        .unwrap();
        let hx = Tensor::randn(&[4, 3], 1.0, &mut rng);
        let hy = Tensor::randn(&[4, 3], 1.0, &mut rng);
        p.y.mu = Linear::from_parts(Tensor::zeros(&[3, 2]), Tensor::zeros(&[2])).unwrap();
        p.y.logvar = p.y.mu.clone();
        p.y.decoder.weight.fill(0.0);
        let noise = VrrNoise::sample(4, &p.config, &mut rng);
        let out = vrr_loss(&EmbeddingBatch::from_views(hx, hy), &p, &noise).unwrap();
        assert!(out.d_hy.data().iter().all(|&g| g == 0.0));
        assert!(out.d_hx.data().iter().any(|&g| g != 0.0));
    }

    #[test]
    fn negative_beta_rejected() {
        let p = params(
            constant_head(0.0, 0.0, 0.0),
            constant_head(0.0, 0.0, 0.0),
            -1.0,
        );
        let noise = VrrNoise::zeros(1, &p.config);
        assert!(matches!(
            vrr_loss(&batch(0.0, 0.0), &p, &noise),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn same_seed_same_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = VrrParams::new(4, VrrConfig::default(), &mut rng).unwrap();
        let hx = Tensor::randn(&[3, 4], 1.0, &mut rng);
        let hy = Tensor::randn(&[3, 4], 1.0, &mut rng);
        let b = EmbeddingBatch::from_views(hx, hy);
        let run = |seed| {
            let noise = VrrNoise::sample(3, &p.config, &mut ChaCha8Rng::seed_from_u64(seed));
            vrr_loss(&b, &p, &noise).unwrap().loss
        };
        assert_eq!(run(17).to_bits(), run(17).to_bits());
    }
}
