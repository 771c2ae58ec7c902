//! Deterministic pretraining: batching, Adam, checkpoints, the training
//! loop and the ablation grid.

mod ablation;
mod adam;
mod batching;
mod checkpoint;
mod container;
mod pretrain;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::ssl::SslConfig;

pub use ablation::{run_ablation, AblationConfig, AblationReport, AblationRow};
pub use adam::{adam_step, clip_global_norm, Adam, AdamConfig, AdamState};
pub use batching::{batch_indices, make_batches, BatchStrategy};
pub use checkpoint::{load_checkpoint, load_named, save_checkpoint, Checkpoint};
pub use container::{
    decode_container, encode_container, read_container, write_container, TensorEntry,
    FORMAT_VERSION, MAGIC,
};
pub use pretrain::{held_out_matching, pretrain, train_step, PretrainOutput, StepLog};

pub const DEFAULT_GRAD_CLIP: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: AdamConfig,
    pub batch_strategy: BatchStrategy,
    pub seed: u64,
    pub ssl: SslConfig,
    pub grad_clip: f64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            epochs: 10,
            optimizer: AdamConfig::default(),
            batch_strategy: BatchStrategy::Random,
            seed: 0,
            ssl: SslConfig::default(),
            grad_clip: DEFAULT_GRAD_CLIP,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.optimizer.lr
            )));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::Config(format!(
                "gradient clip must be positive, got {}",
                self.grad_clip
            )));
        }
        self.ssl.validate()?;
        self.model.vrr.validate()
    }
}
