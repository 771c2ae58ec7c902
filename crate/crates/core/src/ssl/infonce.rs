use crate::encoders::EmbeddingBatch;
use crate::error::{Error, Result};
use crate::nn::softmax_cross_entropy;
use crate::tensor::{dot, Tensor};

/// Critic `⟨h_x, h_y⟩`.
pub fn score(h_x: &[f64], h_y: &[f64]) -> Result<f64> {
    if h_x.len() != h_y.len() {
        return Err(Error::Shape {
            left: vec![h_x.len()],
            right: vec![h_y.len()],
            context: "score operands",
        });
    }
    Ok(dot(h_x, h_y))
}

/// `S_ij = ⟨h_x[i], h_y[j]⟩ / τ`.
pub fn score_matrix(h_x: &Tensor, h_y: &Tensor, tau: f64) -> Tensor {
    let mut s = h_x.matmul_t(h_y);
    s.scale(1.0 / tau);
    s
}

#[derive(Debug, Clone)]
pub struct InfoNceOutput {
    pub loss: f64,
    pub d_hx: Tensor,
    pub d_hy: Tensor,
}

/// Symmetric InfoNCE with in-batch negatives:
/// `½ · mean_i [CE(S[i, ·], i) + CE(S[·, i], i)]`.
pub fn infonce_loss(batch: &EmbeddingBatch, tau: f64) -> Result<InfoNceOutput> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let (hx, hy) = (&batch.h_x, &batch.h_y);
    if hx.shape() != hy.shape() {
        return Err(Error::Shape {
            left: hx.shape().to_vec(),
            right: hy.shape().to_vec(),
            context: "h_x vs h_y",
        });
    }
    if !hx.all_finite() || !hy.all_finite() {
        return Err(Error::Numeric("non-finite embeddings".into()));
    }
    let b = hx.rows();
    let targets: Vec<usize> = (0..b).collect();
    let s = score_matrix(hx, hy, tau);
    let (row_loss, d_rows) = softmax_cross_entropy(&s, &targets)?;
    let (col_loss, d_cols) = softmax_cross_entropy(&s.transpose(), &targets)?;
    let mut d_s = d_rows;
    d_s.add_assign(&d_cols.transpose());
    d_s.scale(0.5 / tau);
    Ok(InfoNceOutput {
        loss: 0.5 * (row_loss + col_loss),
        d_hx: d_s.matmul(hy),
        d_hy: d_s.t_matmul(hx),
    })
}
