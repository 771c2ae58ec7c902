//! Pretraining objectives: symmetric InfoNCE, variational representation
//! reconstruction, and the in-batch matching diagnostic.

mod infonce;
mod vrr;

use serde::{Deserialize, Serialize};

use crate::encoders::EmbeddingBatch;
use crate::error::{Error, Result};

pub use infonce::{infonce_loss, score, score_matrix, InfoNceOutput};
pub use vrr::{
    kl_diag_gaussian, vrr_loss, vrr_loss_with_targets, VrrConfig, VrrHead, VrrNoise, VrrOutput,
    VrrParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Contrastive,
    Generative,
    Both,
}

impl LossKind {
    pub fn uses_contrastive(self) -> bool {
        matches!(self, LossKind::Contrastive | LossKind::Both)
    }

    pub fn uses_generative(self) -> bool {
        matches!(self, LossKind::Generative | LossKind::Both)
    }

    pub fn label(self) -> &'static str {
        match self {
            LossKind::Contrastive => "contrastive",
            LossKind::Generative => "generative",
            LossKind::Both => "both",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "infonce" | "contrastive" => Ok(LossKind::Contrastive),
            "vae" | "vrr" | "generative" => Ok(LossKind::Generative),
            "both" => Ok(LossKind::Both),
            other => Err(Error::Config(format!(
                "unknown loss `{other}` (expected infonce|vae|both)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SslConfig {
    pub loss: LossKind,
    pub temperature: f64,
    /// Weight of the VRR term when both objectives are active.
    pub vrr_weight: f64,
}

impl Default for SslConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Contrastive,
            temperature: 1.0,
            vrr_weight: 1.0,
        }
    }
}

impl SslConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.vrr_weight >= 0.0) {
            return Err(Error::Config(format!(
                "vrr weight must be non-negative, got {}",
                self.vrr_weight
            )));
        }
        Ok(())
    }
}

/// Fraction of pairs whose own partner scores highest, per direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingAccuracy {
    /// Row-wise: each sequence picks a structure.
    pub seq_to_struct: f64,
    /// Column-wise: each structure picks a sequence.
    pub struct_to_seq: f64,
    pub mean: f64,
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// In-batch matching accuracy over `S = h_x h_yᵀ`; argmax ties go to the
/// lower index.
pub fn matching_accuracy(batch: &EmbeddingBatch) -> MatchingAccuracy {
    let s = batch.h_x.matmul_t(&batch.h_y);
    let b = s.rows();
    if b == 0 {
        return MatchingAccuracy {
            seq_to_struct: 0.0,
            struct_to_seq: 0.0,
            mean: 0.0,
        };
    }
    let rows = (0..b)
        .filter(|&i| argmax_first(s.row(i).iter().copied()) == i)
        .count();
    let cols = (0..b)
        .filter(|&j| argmax_first((0..b).map(|i| s.get(i, j))) == j)
        .count();
    let r = rows as f64 / b as f64;
    let c = cols as f64 / b as f64;
    MatchingAccuracy {
        seq_to_struct: r,
        struct_to_seq: c,
        mean: 0.5 * (r + c),
    }
}
