//! All learnable state of the two-view model, and one combined
//! loss-and-gradient evaluation over a batch.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::{EmbeddingBatch, Readout, SequenceEncoder, StructureCache, StructureEncoder};
use crate::error::{Error, Result};
use crate::graph::{build_residue_graph, GraphConfig, ResidueGraph, NODE_FEATURE_DIM};
use crate::ingest::PeptideRecord;
use crate::nn::{join, BatchNormConfig, Mode, ParamKind, Parameters};
use crate::ssl::{
    infonce_loss, matching_accuracy, vrr_loss, MatchingAccuracy, SslConfig, VrrConfig, VrrNoise,
    VrrParams,
};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub structure_layers: usize,
    pub sequence_blocks: usize,
    pub heads: usize,
    pub ff_mult: usize,
    pub node_feature_dim: usize,
    pub readout: Readout,
    pub batch_norm: BatchNormConfig,
    pub vrr: VrrConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            structure_layers: 3,
            sequence_blocks: 2,
            heads: 4,
            ff_mult: 4,
            node_feature_dim: NODE_FEATURE_DIM,
            readout: Readout::Mean,
            batch_norm: BatchNormConfig::default(),
            vrr: VrrConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub sequence: SequenceEncoder,
    pub structure: StructureEncoder,
    pub vrr: VrrParams,
}

impl ModelParams {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        if config.hidden_dim == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        let sequence = SequenceEncoder::new(
            config.hidden_dim,
            config.heads,
            config.sequence_blocks,
            config.ff_mult,
            rng,
        )?;
        let structure = StructureEncoder::new(
            config.node_feature_dim,
            config.hidden_dim,
            config.structure_layers,
            config.batch_norm,
            rng,
        );
        let vrr = VrrParams::new(config.hidden_dim, config.vrr, rng)?;
        Ok(Self {
            config,
            sequence,
            structure,
            vrr,
        })
    }
}

impl Parameters for ModelParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        self.sequence.visit(&join(prefix, "sequence"), f);
        self.structure.visit(&join(prefix, "structure"), f);
        self.vrr.visit(&join(prefix, "vrr"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        self.sequence.visit_mut(&join(prefix, "sequence"), f);
        self.structure.visit_mut(&join(prefix, "structure"), f);
        self.vrr.visit_mut(&join(prefix, "vrr"), f);
    }
}

/// A record reduced to what the encoders consume.
#[derive(Debug, Clone)]
pub struct PreparedRecord {
    pub id: String,
    pub tokens: Vec<usize>,
    pub graph: ResidueGraph,
}

impl PreparedRecord {
    pub fn new(record: &PeptideRecord, graph_config: &GraphConfig) -> Result<Self> {
        Ok(Self {
            id: record.id.clone(),
            tokens: record.tokens()?,
            graph: build_residue_graph(record, graph_config)?,
        })
    }
}

pub fn prepare_all(
    records: &[PeptideRecord],
    graph_config: &GraphConfig,
) -> Result<Vec<PreparedRecord>> {
    records
        .iter()
        .map(|r| PreparedRecord::new(r, graph_config))
        .collect()
}

/// Forward both encoders over a batch, keeping what backward needs.
pub struct BatchForward {
    pub embeddings: EmbeddingBatch,
    structure: StructureCache,
    sequence: Vec<crate::encoders::SequenceCache>,
}

pub fn forward_batch(
    params: &ModelParams,
    batch: &[&PreparedRecord],
    mode: Mode,
) -> Result<BatchForward> {
    let readout = params.config.readout;
    let graphs: Vec<&ResidueGraph> = batch.iter().map(|r| &r.graph).collect();
    let (structure_out, structure) = params.structure.forward_batch(&graphs, readout, mode)?;
    let mut pooled_x = Vec::with_capacity(batch.len());
    let mut per_residue_x = Vec::with_capacity(batch.len());
    let mut sequence = Vec::with_capacity(batch.len());
    for r in batch {
        let (per, pooled, cache) = params.sequence.forward(&r.tokens, readout)?;
        pooled_x.push(pooled);
        per_residue_x.push(per);
        sequence.push(cache);
    }
    Ok(BatchForward {
        embeddings: EmbeddingBatch {
            ids: batch.iter().map(|r| r.id.clone()).collect(),
            h_x: Tensor::stack_rows(&pooled_x),
            h_y: structure_out.pooled,
            per_residue_x,
        },
        structure,
        sequence,
    })
}

/// Frozen (eval-mode) embeddings of both views.
pub fn embed_batch(params: &ModelParams, batch: &[&PreparedRecord]) -> Result<EmbeddingBatch> {
    forward_batch(params, batch, Mode::Eval).map(|f| f.embeddings)
}

#[derive(Debug, Clone)]
pub struct LossTerms {
    pub total: f64,
    pub infonce: Option<f64>,
    pub vrr: Option<f64>,
    pub matching: MatchingAccuracy,
}

pub struct StepOutput {
    pub terms: LossTerms,
    pub grads: ModelParams,
    pub forward: BatchForward,
}

/// Selected SSL loss over one batch and its gradient w.r.t. every parameter.
///
/// `noise` is only read when the generative objective is active.
pub fn loss_and_grad(
    params: &ModelParams,
    batch: &[&PreparedRecord],
    ssl: &SslConfig,
    noise: Option<&VrrNoise>,
    mode: Mode,
) -> Result<StepOutput> {
    ssl.validate()?;
    let forward = forward_batch(params, batch, mode)?;
    let emb = &forward.embeddings;
    let d = params.config.hidden_dim;
    let b = emb.len();
    let mut grads = params.zeros_like();
    let mut d_hx = Tensor::zeros(&[b, d]);
    let mut d_hy = Tensor::zeros(&[b, d]);
    let mut total = 0.0;
    let mut infonce = None;
    let mut vrr = None;
    if ssl.loss.uses_contrastive() {
        let out = infonce_loss(emb, ssl.temperature)?;
        total += out.loss;
        d_hx.add_assign(&out.d_hx);
        d_hy.add_assign(&out.d_hy);
        infonce = Some(out.loss);
    }
    if ssl.loss.uses_generative() {
        let noise = noise.ok_or_else(|| Error::Config("generative loss needs VRR noise".into()))?;
        let w = if ssl.loss.uses_contrastive() {
            ssl.vrr_weight
        } else {
            1.0
        };
        let out = vrr_loss(emb, &params.vrr, noise)?;
        total += w * out.loss;
        d_hx.add_scaled(&out.d_hx, w);
        d_hy.add_scaled(&out.d_hy, w);
        let mut g = out.grad;
        g.scale_all(w);
        grads.vrr = g;
        vrr = Some(out.loss);
    }
    if !total.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {total}")));
    }
    params
        .structure
        .backward(&forward.structure, &d_hy, &mut grads.structure);
    for (i, cache) in forward.sequence.iter().enumerate() {
        params
            .sequence
            .backward_pooled(cache, d_hx.row(i), &mut grads.sequence);
    }
    let matching = matching_accuracy(emb);
    Ok(StepOutput {
        terms: LossTerms {
            total,
            infonce,
            vrr,
            matching,
        },
        grads,
        forward,
    })
}

/// Fold train-mode batch-norm statistics from a forward pass into `params`.
pub fn commit_running_stats(params: &mut ModelParams, forward: &BatchForward) {
    params.structure.commit(&forward.structure);
}
