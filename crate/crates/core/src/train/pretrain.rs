use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphConfig;
use crate::ingest::PeptideRecord;
use crate::model::{
    commit_running_stats, embed_batch, loss_and_grad, prepare_all, ModelParams, PreparedRecord,
};
use crate::nn::Mode;
use crate::ssl::{matching_accuracy, VrrNoise};

use super::adam::{clip_global_norm, Adam};
use super::batching::{batch_indices, BatchStrategy};
use super::checkpoint::Checkpoint;
use super::TrainConfig;

/// One line of the step log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infonce: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vrr: Option<f64>,
    pub match_acc: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainOutput {
    pub checkpoint: Checkpoint,
    pub log: Vec<StepLog>,
}

fn keys(prepared: &[PreparedRecord]) -> Vec<(&str, usize)> {
    prepared
        .iter()
        .map(|p| (p.id.as_str(), p.tokens.len()))
        .collect()
}

/// Train both encoders from scratch.
///
/// A single ChaCha8 stream seeded from `train.seed` drives initialization,
/// batch composition and order, and VRR noise, so the log is a pure function
/// of the inputs.
pub fn pretrain(
    records: &[PeptideRecord],
    train: &TrainConfig,
    graph: &GraphConfig,
) -> Result<PretrainOutput> {
    train.validate()?;
    graph.validate()?;
    if records.is_empty() {
        return Err(Error::Data("pretraining needs at least one record".into()));
    }
    let prepared = prepare_all(records, graph)?;
    let keys = keys(&prepared);
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let mut params = ModelParams::new(train.model, &mut rng)?;
    let mut adam = Adam::new(&params, train.optimizer);
    let mut log = Vec::new();
    let mut step = 0u64;
    for _ in 0..train.epochs {
        let mut batches = batch_indices(&keys, train.batch_size, train.batch_strategy, &mut rng)?;
        if train.batch_strategy == BatchStrategy::LengthSorted {
            // Composition stays length-grouped; only the visiting order moves.
            batches.shuffle(&mut rng);
        }
        for idx in batches {
            let batch: Vec<&PreparedRecord> = idx.iter().map(|&i| &prepared[i]).collect();
            let noise = train
                .ssl
                .loss
                .uses_generative()
                .then(|| VrrNoise::sample(batch.len(), &train.model.vrr, &mut rng));
            let entry = train_step(&mut params, &mut adam, &batch, train, noise.as_ref())
                .map_err(|e| e.at_step(step))?;
            log.push(StepLog { step, ..entry });
            step += 1;
        }
    }
    Ok(PretrainOutput {
        checkpoint: Checkpoint {
            params,
            train: train.clone(),
            graph: *graph,
            rng,
            step,
        },
        log,
    })
}

/// Forward, backward, clip, Adam, then fold batch-norm statistics.
pub fn train_step(
    params: &mut ModelParams,
    adam: &mut Adam,
    batch: &[&PreparedRecord],
    train: &TrainConfig,
    noise: Option<&VrrNoise>,
) -> Result<StepLog> {
    let mut out = loss_and_grad(params, batch, &train.ssl, noise, Mode::Train)?;
    clip_global_norm(&mut out.grads, train.grad_clip);
    adam.step(params, &out.grads)?;
    commit_running_stats(params, &out.forward);
    Ok(StepLog {
        step: 0,
        loss: out.terms.total,
        infonce: out.terms.infonce,
        vrr: out.terms.vrr,
        match_acc: out.terms.matching.mean,
    })
}

/// Item-weighted mean eval-mode matching accuracy over batches of `records`.
pub fn held_out_matching(
    params: &ModelParams,
    records: &[PeptideRecord],
    graph: &GraphConfig,
    batch_size: usize,
    strategy: BatchStrategy,
    seed: u64,
) -> Result<f64> {
    let prepared = prepare_all(records, graph)?;
    if prepared.is_empty() {
        return Err(Error::Data("no held-out records".into()));
    }
    let keys = keys(&prepared);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batches = batch_indices(&keys, batch_size, strategy, &mut rng)?;
    let mut hits = 0.0;
    for idx in &batches {
        let batch: Vec<&PreparedRecord> = idx.iter().map(|&i| &prepared[i]).collect();
        let emb = embed_batch(params, &batch)?;
        hits += matching_accuracy(&emb).mean * batch.len() as f64;
    }
    Ok(hits / prepared.len() as f64)
}
