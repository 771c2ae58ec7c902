//! Oracles: a finite-difference suite over every hand-written backward pass,
//! and brute-force [`reference`] implementations of the forward maths.
//!
//! Each component is checked on many randomly shaped instances. Layers are
//! reduced to a scalar through a fixed random projection `Σ out ⊙ R`, so the
//! upstream gradient is `R` and every coordinate gets an O(1) derivative.

pub mod reference;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::{EmbeddingBatch, RgcnLayer, TransformerBlock};
use crate::error::{Error, Result};
use crate::graph::{build_residue_graph, GraphConfig};
use crate::ingest::{PeptideRecord, Source, Split, ALPHABET};
use crate::nn::{
    finite_diff_check_with, relu_backward, relu_forward, BatchNorm, BatchNormConfig, GradCheck,
    Linear, Mode, Parameters, Stencil,
};
use crate::ssl::{infonce_loss, vrr_loss_with_targets, VrrConfig, VrrNoise, VrrParams};
use crate::tensor::Tensor;

pub const TOLERANCE: f64 = 1e-4;
pub const VRR_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_TRIALS: usize = 50;
/// Step for the extrapolated stencil. Its O(ε⁴) truncation allows a step ten
/// times the plain default, which cuts round-off on near-zero coordinates.
pub const ORACLE_EPS: f64 = 1e-4;
/// Instances with a ReLU input closer to zero than this are redrawn, so no
/// perturbation of size `ORACLE_EPS` can cross the kink.
pub const KINK_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Linear,
    Relu,
    BatchNorm,
    TransformerBlock,
    RgcnLayer,
    InfoNce,
    Vrr,
}

impl Component {
    pub const ALL: [Component; 7] = [
        Component::Linear,
        Component::Relu,
        Component::BatchNorm,
        Component::TransformerBlock,
        Component::RgcnLayer,
        Component::InfoNce,
        Component::Vrr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::Linear => "linear",
            Component::Relu => "relu",
            Component::BatchNorm => "batchnorm",
            Component::TransformerBlock => "transformer_block",
            Component::RgcnLayer => "rgcn_layer",
            Component::InfoNce => "infonce",
            Component::Vrr => "vrr",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Component::Vrr => VRR_TOLERANCE,
            _ => TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub component: Component,
    pub trials: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Flatten inputs then trainable parameters; `objective` returns the value,
/// parameter gradients, and input gradients.
fn check_with<P, F>(params: &P, inputs: &[Tensor], objective: F) -> Result<GradCheck>
where
    P: Parameters,
    F: Fn(&P, &[Tensor]) -> Result<(f64, P, Vec<Tensor>)>,
{
    let mut flat: Vec<f64> = inputs
        .iter()
        .flat_map(|t| t.data().iter().copied())
        .collect();
    flat.extend(params.flatten_trainable());
    let f = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let mut offset = 0;
        let xs: Vec<Tensor> = inputs
            .iter()
            .map(|t| {
                let n = t.len();
                let x = Tensor::from_vec(t.shape().to_vec(), theta[offset..offset + n].to_vec());
                offset += n;
                x
            })
            .collect::<Result<_>>()?;
        let mut p = params.clone();
        p.load_trainable(&theta[offset..]);
        let (value, grad_p, grad_x) = objective(&p, &xs)?;
        let mut g: Vec<f64> = grad_x
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect();
        g.extend(grad_p.flatten_trainable());
        Ok((value, g))
    };
    finite_diff_check_with(f, &flat, ORACLE_EPS, Stencil::Richardson)
}

fn projection(out: &Tensor, r: &Tensor) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Move every trainable value off its initialiser so zero biases and unit
/// gains do not park activations exactly on a ReLU kink.
fn jitter<P: Parameters, R: Rng>(params: &mut P, rng: &mut R) {
    let theta: Vec<f64> = params
        .flatten_trainable()
        .into_iter()
        .map(|v| v + 0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    params.load_trainable(&theta);
}

fn random_tensor<R: Rng>(shape: &[usize], rng: &mut R) -> Tensor {
    Tensor::randn(shape, 1.0, rng)
}

fn linear_trial<R: Rng>(rng: &mut R) -> Result<GradCheck> {
    let (b, din, dout) = (
        rng.random_range(1..=5),
        rng.random_range(1..=6),
        rng.random_range(1..=6),
    );
    let mut layer = Linear::new(din, dout, rng);
    jitter(&mut layer, rng);
    let x = random_tensor(&[b, din], rng);
    let r = random_tensor(&[b, dout], rng);
    check_with(&layer, &[x], |p, xs| {
        let out = p.forward(&xs[0])?;
        let mut g = p.zeros_like();
        let dx = p.backward(&xs[0], &r, &mut g);
        Ok((projection(&out, &r), g, vec![dx]))
    })
}

fn relu_trial<R: Rng>(rng: &mut R) -> Result<GradCheck> {
    let (b, d) = (rng.random_range(1..=5), rng.random_range(1..=8));
    // Keep inputs away from the kink so central differences stay one-sided-free.
    let x = Tensor::from_vec(
        vec![b, d],
        (0..b * d)
            .map(|_| {
                let m = rng.random_range(KINK_MARGIN..2.0);
                if rng.random_bool(0.5) {
                    m
                } else {
                    -m
                }
            })
            .collect(),
    )?;
    let r = random_tensor(&[b, d], rng);
    check_with(&Vec::<Tensor>::new(), &[x], |p, xs| {
        let out = relu_forward(&xs[0]);
        Ok((
            projection(&out, &r),
            p.clone(),
            vec![relu_backward(&xs[0], &r)],
        ))
    })
}

// Normalising two values maps them to ±1 whatever they are, leaving only an
// O(eps_norm) gradient that central differences cannot resolve; three or
// more rows (or features, for layer norm) keep the check well conditioned.
const MIN_NORMALISED: usize = 3;

fn batchnorm_trial<R: Rng>(rng: &mut R) -> Result<GradCheck> {
    let (b, d) = (
        rng.random_range(MIN_NORMALISED..=6),
        rng.random_range(1..=5),
    );
    let mut bn = BatchNorm::new(d, BatchNormConfig::default());
    jitter(&mut bn, rng);
    let x = random_tensor(&[b, d], rng);
    let r = random_tensor(&[b, d], rng);
    check_with(&bn, &[x], |p, xs| {
        let (out, cache) = p.forward(&xs[0], Mode::Train)?;
        let mut g = p.zeros_like();
        let dx = p.backward(&cache, &r, &mut g);
        Ok((projection(&out, &r), g, vec![dx]))
    })
}

fn transformer_trial<R: Rng>(rng: &mut R) -> Result<GradCheck> {
    let heads = rng.random_range(1..=2);
    let dim = heads * rng.random_range(MIN_NORMALISED.div_ceil(heads)..=4);
    let n = rng.random_range(1..=5);
    let ff_mult = rng.random_range(1..=2);
    let (block, x) = loop {
        let mut block = TransformerBlock::new(dim, heads, ff_mult, rng);
        jitter(&mut block, rng);
        let x = random_tensor(&[n, dim], rng);
        if block.forward(&x)?.1.relu_margin() > KINK_MARGIN {
            break (block, x);
        }
    };
    let r = random_tensor(&[n, dim], rng);
    check_with(&block, &[x], |p, xs| {
        let (out, cache) = p.forward(&xs[0])?;
        let mut g = p.zeros_like();
        let dx = p.backward(&cache, &r, &mut g);
        Ok((projection(&out, &r), g, vec![dx]))
    })
}

/// A valid record with random residues and Cα positions in a 9 Å box.
pub fn random_record<R: Rng>(id: &str, n: usize, rng: &mut R) -> PeptideRecord {
    loop {
        let record = PeptideRecord {
            id: id.to_string(),
            sequence: (0..n)
                .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char)
                .collect(),
            coords: (0..n)
                .map(|_| {
                    [
                        rng.random_range(0.0..9.0),
                        rng.random_range(0.0..9.0),
                        rng.random_range(0.0..9.0),
                    ]
                })
                .collect(),
            plddt: None,
            labels: BTreeMap::new(),
            split: Split::Train,
            source: Source::Experimental,
        };
        if record.validate().is_ok() {
            return record;
        }
    }
}

fn rgcn_trial<R: Rng>(rng: &mut R) -> Result<GradCheck> {
    let n = rng.random_range(MIN_NORMALISED..=6);
    let dim = rng.random_range(1..=5);
    let record = random_record("g", n, rng);
    let config = GraphConfig {
        radius_cutoff: rng.random_range(3.0..12.0),
        knn_k: rng.random_range(1..=3),
        mask_residue_identity: false,
    };
    let graph = build_residue_graph(&record, &config)?;
    let (layer, h) = loop {
        let mut layer = RgcnLayer::new(dim, BatchNormConfig::default(), rng);
        jitter(&mut layer, rng);
        let h = random_tensor(&[n, dim], rng);
        if layer.forward(&h, &graph, Mode::Train)?.1.relu_margin() > KINK_MARGIN {
            break (layer, h);
        }
    };
    let r = random_tensor(&[n, dim], rng);
    check_with(&layer, &[h], |p, xs| {
        let (out, cache) = p.forward(&xs[0], &graph, Mode::Train)?;
        let mut g = p.zeros_like();
        let dh = p.backward(&graph, &cache, &r, &mut g);
        Ok((projection(&out, &r), g, vec![dh]))
    })
}

fn infonce_trial<R: Rng>(rng: &mut R) -> Result<GradCheck> {
    let (b, d) = (rng.random_range(1..=8), rng.random_range(1..=16));
    let tau = rng.random_range(0.5..2.0);
    let hx = random_tensor(&[b, d], rng);
    let hy = random_tensor(&[b, d], rng);
    check_with(&Vec::<Tensor>::new(), &[hx, hy], |p, xs| {
        let out = infonce_loss(
            &EmbeddingBatch::from_views(xs[0].clone(), xs[1].clone()),
            tau,
        )?;
        Ok((out.loss, p.clone(), vec![out.d_hx, out.d_hy]))
    })
}

fn vrr_trial<R: Rng>(rng: &mut R) -> Result<GradCheck> {
    let (b, d) = (rng.random_range(1..=5), rng.random_range(1..=6));
    let config = VrrConfig {
        beta: rng.random_range(0.0..2.0),
        mc_samples: rng.random_range(1..=2),
        latent_dim: rng.random_range(1..=4),
    };
    let mut params = VrrParams::new(d, config, rng)?;
    jitter(&mut params, rng);
    let noise = VrrNoise::sample(b, &config, rng);
    let hx = random_tensor(&[b, d], rng);
    let hy = random_tensor(&[b, d], rng);
    // Reconstruction targets sit behind a stop-gradient, so only the sources move.
    let targets = EmbeddingBatch::from_views(hx.clone(), hy.clone());
    check_with(&params, &[hx, hy], |p, xs| {
        let sources = EmbeddingBatch::from_views(xs[0].clone(), xs[1].clone());
        let out = vrr_loss_with_targets(&sources, &targets, p, &noise)?;
        Ok((out.loss, out.grad, vec![out.d_hx, out.d_hy]))
    })
}

pub fn check_component(component: Component, trials: usize, seed: u64) -> Result<OracleOutcome> {
    if trials == 0 {
        return Err(Error::Config("at least one trial is needed".into()));
    }
    // Each component gets its own stream so adding one never shifts another.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((component as u64 + 1) << 32));
    let mut worst: f64 = 0.0;
    let mut coordinates = 0;
    for _ in 0..trials {
        let g = match component {
            Component::Linear => linear_trial(&mut rng),
            Component::Relu => relu_trial(&mut rng),
            Component::BatchNorm => batchnorm_trial(&mut rng),
            Component::TransformerBlock => transformer_trial(&mut rng),
            Component::RgcnLayer => rgcn_trial(&mut rng),
            Component::InfoNce => infonce_trial(&mut rng),
            Component::Vrr => vrr_trial(&mut rng),
        }?;
        worst = worst.max(g.max_rel_error);
        coordinates += g.checked;
    }
    let tolerance = component.tolerance();
    Ok(OracleOutcome {
        component,
        trials,
        coordinates,
        max_rel_error: worst,
        tolerance,
        passed: worst < tolerance,
    })
}

pub fn run_suite(trials: usize, seed: u64) -> Result<Vec<OracleOutcome>> {
    Component::ALL
        .iter()
        .map(|&c| check_component(c, trials, seed))
        .collect()
}

pub fn format_table(outcomes: &[OracleOutcome]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18} {:>6} {:>8} {:>12} {:>9}  result",
        "component", "trials", "coords", "max rel err", "tol"
    );
    for o in outcomes {
        let _ = writeln!(
            out,
            "{:<18} {:>6} {:>8} {:>12.3e} {:>9.0e}  {}",
            o.component.name(),
            o.trials,
            o.coordinates,
            o.max_rel_error,
            o.tolerance,
            if o.passed { "PASS" } else { "FAIL" }
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_component_passes_a_few_trials() {
        for c in Component::ALL {
            let o = check_component(c, 5, 11).unwrap();
            assert!(o.passed, "{}: {:e}", c.name(), o.max_rel_error);
            assert!(o.coordinates > 0);
        }
    }
}
