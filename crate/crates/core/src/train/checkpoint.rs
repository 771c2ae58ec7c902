use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ContainerError, Error, Result};
use crate::graph::GraphConfig;
use crate::model::ModelParams;
use crate::nn::Parameters;
use crate::tensor::Tensor;

use super::container::{decode_container, encode_container, FORMAT_VERSION};
use super::TrainConfig;

const KIND: &str = "checkpoint";

/// Everything needed to resume or reuse a pretraining run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub train: TrainConfig,
    pub graph: GraphConfig,
    pub rng: ChaCha8Rng,
    pub step: u64,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    kind: String,
    version: u32,
    train: TrainConfig,
    graph: GraphConfig,
    rng: ChaCha8Rng,
    step: u64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = Meta {
            kind: KIND.into(),
            version: FORMAT_VERSION,
            train: self.train.clone(),
            graph: self.graph,
            rng: self.rng.clone(),
            step: self.step,
        };
        encode_container(&serde_json::to_value(&meta)?, &self.params.named_tensors())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (meta, tensors) = decode_container(bytes)?;
        let meta: Meta =
            serde_json::from_value(meta).map_err(|e| ContainerError::Header(e.to_string()))?;
        if meta.kind != KIND {
            return Err(ContainerError::Header(format!(
                "container holds `{}`, not a checkpoint",
                meta.kind
            ))
            .into());
        }
        // Initial values are irrelevant: every tensor is overwritten below.
        let mut params = ModelParams::new(meta.train.model, &mut ChaCha8Rng::seed_from_u64(0))?;
        load_named(&mut params, tensors)?;
        Ok(Self {
            params,
            train: meta.train,
            graph: meta.graph,
            rng: meta.rng,
            step: meta.step,
        })
    }
}

/// Overwrite every tensor of `params` by name; the table must match the
/// parameter set exactly in names and shapes.
pub fn load_named<P: Parameters>(params: &mut P, tensors: Vec<(String, Tensor)>) -> Result<()> {
    let mut table: BTreeMap<String, Tensor> = BTreeMap::new();
    for (name, t) in tensors {
        if table.insert(name.clone(), t).is_some() {
            return Err(ContainerError::TensorTable(format!("duplicate tensor `{name}`")).into());
        }
    }
    let mut problem = None;
    params.visit_mut("", &mut |name, t, _| {
        if problem.is_some() {
            return;
        }
        match table.remove(name) {
            Some(src) if src.shape() == t.shape() => *t = src,
            Some(src) => {
                problem = Some(format!(
                    "`{name}` has shape {:?}, model expects {:?}",
                    src.shape(),
                    t.shape()
                ))
            }
            None => problem = Some(format!("missing tensor `{name}`")),
        }
    });
    if let Some(p) = problem {
        return Err(ContainerError::TensorTable(p).into());
    }
    if let Some(extra) = table.keys().next() {
        return Err(ContainerError::TensorTable(format!("unexpected tensor `{extra}`")).into());
    }
    Ok(())
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
