//! Pre-norm transformer encoder over residue tokens.
//!
//! Block: `x ← x + MHA(LN(x))`, then `x ← x + W₂·ReLU(W₁·LN(x))`.
//! Token embeddings are summed with fixed sinusoidal position codes.

use rand::Rng;

use super::Readout;
use crate::error::{Error, Result};
use crate::ingest::VOCAB_SIZE;
use crate::nn::{
    join, relu_backward, relu_forward, softmax_rows, LayerNorm, LayerNormCache, Linear, ParamKind,
    Parameters,
};
use crate::tensor::Tensor;

pub fn sinusoidal_positions(n: usize, dim: usize) -> Tensor {
    let mut pe = Tensor::zeros(&[n, dim]);
    for pos in 0..n {
        for k in 0..dim {
            let pair = (k / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * pair / dim as f64);
            pe.set(pos, k, if k % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    pe
}

fn columns(x: &Tensor, start: usize, width: usize) -> Tensor {
    let mut out = Tensor::zeros(&[x.rows(), width]);
    for i in 0..x.rows() {
        out.row_mut(i)
            .copy_from_slice(&x.row(i)[start..start + width]);
    }
    out
}

fn put_columns(dst: &mut Tensor, src: &Tensor, start: usize) {
    let w = src.cols();
    for i in 0..src.rows() {
        dst.row_mut(i)[start..start + w].copy_from_slice(src.row(i));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    x: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    probs: Vec<Tensor>,
    context: Tensor,
}

impl MultiHeadAttention {
    pub fn new<R: Rng + ?Sized>(dim: usize, heads: usize, rng: &mut R) -> Self {
        Self {
            query: Linear::new(dim, dim, rng),
            key: Linear::new(dim, dim, rng),
            value: Linear::new(dim, dim, rng),
            output: Linear::new(dim, dim, rng),
            heads,
        }
    }

    fn head_dim(&self) -> usize {
        self.query.out_dim() / self.heads
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, AttentionCache)> {
        let q = self.query.forward(x)?;
        let k = self.key.forward(x)?;
        let v = self.value.forward(x)?;
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut context = Tensor::zeros(&[x.rows(), q.cols()]);
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (qh, kh, vh) = (
                columns(&q, h * dh, dh),
                columns(&k, h * dh, dh),
                columns(&v, h * dh, dh),
            );
            let mut scores = qh.matmul_t(&kh);
            scores.scale(scale);
            let p = softmax_rows(&scores);
            put_columns(&mut context, &p.matmul(&vh), h * dh);
            probs.push(p);
        }
        let out = self.output.forward(&context)?;
        Ok((
            out,
            AttentionCache {
                x: x.clone(),
                q,
                k,
                v,
                probs,
                context,
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &AttentionCache,
        d_out: &Tensor,
        grad: &mut MultiHeadAttention,
    ) -> Tensor {
        let d_context = self
            .output
            .backward(&cache.context, d_out, &mut grad.output);
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let n = cache.x.rows();
        let mut dq = Tensor::zeros(&[n, cache.q.cols()]);
        let mut dk = Tensor::zeros(&[n, cache.k.cols()]);
        let mut dv = Tensor::zeros(&[n, cache.v.cols()]);
        for h in 0..self.heads {
            let p = &cache.probs[h];
            let (qh, kh, vh) = (
                columns(&cache.q, h * dh, dh),
                columns(&cache.k, h * dh, dh),
                columns(&cache.v, h * dh, dh),
            );
            let dctx = columns(&d_context, h * dh, dh);
            let dp = dctx.matmul_t(&vh);
            put_columns(&mut dv, &p.t_matmul(&dctx), h * dh);
            // softmax backward, row-wise
            let mut ds = Tensor::zeros(&[n, n]);
            for i in 0..n {
                let dot: f64 = p.row(i).iter().zip(dp.row(i)).map(|(a, b)| a * b).sum();
                for j in 0..n {
                    ds.set(i, j, p.get(i, j) * (dp.get(i, j) - dot) * scale);
                }
            }
            put_columns(&mut dq, &ds.matmul(&kh), h * dh);
            put_columns(&mut dk, &ds.t_matmul(&qh), h * dh);
        }
        let mut dx = self.query.backward(&cache.x, &dq, &mut grad.query);
        dx.add_assign(&self.key.backward(&cache.x, &dk, &mut grad.key));
        dx.add_assign(&self.value.backward(&cache.x, &dv, &mut grad.value));
        dx
    }
}

impl Parameters for MultiHeadAttention {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        self.query.visit(&join(prefix, "query"), f);
        self.key.visit(&join(prefix, "key"), f);
        self.value.visit(&join(prefix, "value"), f);
        self.output.visit(&join(prefix, "output"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        self.query.visit_mut(&join(prefix, "query"), f);
        self.key.visit_mut(&join(prefix, "key"), f);
        self.value.visit_mut(&join(prefix, "value"), f);
        self.output.visit_mut(&join(prefix, "output"), f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerBlock {
    pub attn_norm: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ff_norm: LayerNorm,
    pub ff_in: Linear,
    pub ff_out: Linear,
}

#[derive(Debug, Clone)]
pub struct BlockCache {
    ln1: LayerNormCache,
    attn: AttentionCache,
    ln2: LayerNormCache,
    ff_input: Tensor,
    hidden_pre: Tensor,
    hidden: Tensor,
}

impl BlockCache {
    /// Smallest |pre-activation| at the ReLU; how far the point is from a kink.
    pub fn relu_margin(&self) -> f64 {
        self.hidden_pre
            .data()
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

impl TransformerBlock {
    pub fn new<R: Rng + ?Sized>(dim: usize, heads: usize, ff_mult: usize, rng: &mut R) -> Self {
        Self {
            attn_norm: LayerNorm::new(dim),
            attn: MultiHeadAttention::new(dim, heads, rng),
            ff_norm: LayerNorm::new(dim),
            ff_in: Linear::new(dim, ff_mult * dim, rng),
            ff_out: Linear::new(ff_mult * dim, dim, rng),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, BlockCache)> {
        let (a, ln1) = self.attn_norm.forward(x);
        let (attn_out, attn) = self.attn.forward(&a)?;
        let mut x1 = x.clone();
        x1.add_assign(&attn_out);
        let (b, ln2) = self.ff_norm.forward(&x1);
        let hidden_pre = self.ff_in.forward(&b)?;
        let hidden = relu_forward(&hidden_pre);
        let mut out = x1;
        out.add_assign(&self.ff_out.forward(&hidden)?);
        Ok((
            out,
            BlockCache {
                ln1,
                attn,
                ln2,
                ff_input: b,
                hidden_pre,
                hidden,
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &BlockCache,
        d_out: &Tensor,
        grad: &mut TransformerBlock,
    ) -> Tensor {
        let d_hidden = self.ff_out.backward(&cache.hidden, d_out, &mut grad.ff_out);
        let d_hidden_pre = relu_backward(&cache.hidden_pre, &d_hidden);
        let d_b = self
            .ff_in
            .backward(&cache.ff_input, &d_hidden_pre, &mut grad.ff_in);
        let mut d_x1 = d_out.clone();
        d_x1.add_assign(&self.ff_norm.backward(&cache.ln2, &d_b, &mut grad.ff_norm));
        let d_a = self.attn.backward(&cache.attn, &d_x1, &mut grad.attn);
        let mut dx = d_x1;
        dx.add_assign(
            &self
                .attn_norm
                .backward(&cache.ln1, &d_a, &mut grad.attn_norm),
        );
        dx
    }
}

impl Parameters for TransformerBlock {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        self.attn_norm.visit(&join(prefix, "attn_norm"), f);
        self.attn.visit(&join(prefix, "attn"), f);
        self.ff_norm.visit(&join(prefix, "ff_norm"), f);
        self.ff_in.visit(&join(prefix, "ff_in"), f);
        self.ff_out.visit(&join(prefix, "ff_out"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        self.attn_norm.visit_mut(&join(prefix, "attn_norm"), f);
        self.attn.visit_mut(&join(prefix, "attn"), f);
        self.ff_norm.visit_mut(&join(prefix, "ff_norm"), f);
        self.ff_in.visit_mut(&join(prefix, "ff_in"), f);
        self.ff_out.visit_mut(&join(prefix, "ff_out"), f);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEncoder {
    /// `VOCAB_SIZE × D`
    pub embedding: Tensor,
    pub blocks: Vec<TransformerBlock>,
}

#[derive(Debug, Clone)]
pub struct SequenceCache {
    tokens: Vec<usize>,
    blocks: Vec<BlockCache>,
    readout: Readout,
}

impl SequenceEncoder {
    pub fn new<R: Rng + ?Sized>(
        dim: usize,
        heads: usize,
        num_blocks: usize,
        ff_mult: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || dim % heads != 0 {
            return Err(Error::Config(format!(
                "hidden width {dim} is not divisible by {heads} heads"
            )));
        }
        Ok(Self {
            // Unit-variance rows keep token identity on the same scale as the
            // sinusoidal positions (norm ~ sqrt(dim / 2)).
            embedding: Tensor::randn(&[VOCAB_SIZE, dim], 1.0, rng),
            blocks: (0..num_blocks)
                .map(|_| TransformerBlock::new(dim, heads, ff_mult, rng))
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.embedding.cols()
    }

    /// Returns `(per-residue n×D, pooled D)` and the backward cache.
    pub fn forward(
        &self,
        tokens: &[usize],
        readout: Readout,
    ) -> Result<(Tensor, Tensor, SequenceCache)> {
        if tokens.is_empty() {
            return Err(Error::Data("empty token sequence".into()));
        }
        if let Some(&t) = tokens.iter().find(|&&t| t >= VOCAB_SIZE) {
            return Err(Error::Data(format!(
                "token {t} outside the {VOCAB_SIZE}-symbol vocabulary"
            )));
        }
        let d = self.dim();
        let mut x = sinusoidal_positions(tokens.len(), d);
        for (i, &t) in tokens.iter().enumerate() {
            for (v, e) in x.row_mut(i).iter_mut().zip(self.embedding.row(t)) {
                *v += e;
            }
        }
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (next, cache) = block.forward(&x)?;
            caches.push(cache);
            x = next;
        }
        let pooled = readout.pool(&x);
        Ok((
            x,
            pooled,
            SequenceCache {
                tokens: tokens.to_vec(),
                blocks: caches,
                readout,
            },
        ))
    }

    pub fn encode(&self, tokens: &[usize], readout: Readout) -> Result<(Tensor, Tensor)> {
        self.forward(tokens, readout)
            .map(|(per, pooled, _)| (per, pooled))
    }

    /// Backpropagate a per-residue gradient (`n×D`).
    pub fn backward_residues(
        &self,
        cache: &SequenceCache,
        d_per_residue: &Tensor,
        grad: &mut SequenceEncoder,
    ) {
        let mut dx = d_per_residue.clone();
        for (b, block) in self.blocks.iter().enumerate().rev() {
            dx = block.backward(&cache.blocks[b], &dx, &mut grad.blocks[b]);
        }
        for (i, &t) in cache.tokens.iter().enumerate() {
            for (g, d) in grad.embedding.row_mut(t).iter_mut().zip(dx.row(i)) {
                *g += d;
            }
        }
    }

    /// Backpropagate a gradient of the pooled vector.
    pub fn backward_pooled(
        &self,
        cache: &SequenceCache,
        d_pooled: &[f64],
        grad: &mut SequenceEncoder,
    ) {
        let n = cache.tokens.len();
        let scale = cache.readout.backward_scale(n);
        let mut d = Tensor::zeros(&[n, self.dim()]);
        for i in 0..n {
            for (v, g) in d.row_mut(i).iter_mut().zip(d_pooled) {
                *v = g * scale;
            }
        }
        self.backward_residues(cache, &d, grad);
    }
}

impl Parameters for SequenceEncoder {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        f(
            &join(prefix, "embedding"),
            &self.embedding,
            ParamKind::Trainable,
        );
        self.blocks.visit(&join(prefix, "block"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        f(
            &join(prefix, "embedding"),
            &mut self.embedding,
            ParamKind::Trainable,
        );
        self.blocks.visit_mut(&join(prefix, "block"), f);
    }
}
