//! The two view encoders: relational graph convolution over residue graphs
//! and a transformer over residue tokens.

mod rgcn;
mod transformer;

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

pub use rgcn::{
    rgcn_layer, RgcnCache, RgcnLayer, StructureCache, StructureEncoder, StructureOutput,
};
pub use transformer::{
    sinusoidal_positions, AttentionCache, BlockCache, MultiHeadAttention, SequenceCache,
    SequenceEncoder, TransformerBlock,
};

/// Peptide-level pooling of per-residue states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    #[default]
    Mean,
    Sum,
}

impl Readout {
    pub fn pool(self, per_residue: &Tensor) -> Tensor {
        let mut m = per_residue.mean_rows();
        if self == Readout::Sum {
            m.scale(per_residue.rows() as f64);
        }
        m
    }

    /// d(pooled)/d(residue row) for `n` residues.
    pub fn backward_scale(self, n: usize) -> f64 {
        match self {
            Readout::Mean => 1.0 / n as f64,
            Readout::Sum => 1.0,
        }
    }
}

/// Aligned per-peptide embeddings of both views.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    pub ids: Vec<String>,
    /// `B×D` sequence-view embeddings.
    pub h_x: Tensor,
    /// `B×D` structure-view embeddings.
    pub h_y: Tensor,
    pub per_residue_x: Vec<Tensor>,
}

impl EmbeddingBatch {
    /// Batch without ids or residue states, for loss evaluation.
    pub fn from_views(h_x: Tensor, h_y: Tensor) -> Self {
        let b = h_x.rows();
        Self {
            ids: (0..b).map(|i| i.to_string()).collect(),
            h_x,
            h_y,
            per_residue_x: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.h_x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
