//! Relational graph convolution over typed residue edges.
//!
//! One layer computes, for every node `i`,
//!
//! ```text
//! u_i = ReLU(BN(Σ_r (Σ_{j ∈ N_r(i)} h_j) · W_r)),   h_i' = h_i + u_i
//! ```
//!
//! with `N_r(i) = { j : (j, i, r) ∈ E }` (incoming edges of type `r`) and one
//! `D×D` kernel per edge type. Batch norm statistics are taken over all
//! nodes passed in, so a disjoint union of graphs normalizes across the batch.

use std::ops::Range;

use rand::Rng;

use super::Readout;
use crate::error::{Error, Result};
use crate::graph::{ResidueGraph, NUM_EDGE_TYPES};
use crate::nn::{
    join, relu_backward, relu_forward, BatchNorm, BatchNormCache, BatchNormConfig, Linear, Mode,
    ParamKind, Parameters,
};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct RgcnLayer {
    /// Indexed by [`EdgeType::index`](crate::graph::EdgeType::index).
    pub kernels: Vec<Tensor>,
    pub bn: BatchNorm,
}

#[derive(Debug, Clone)]
pub struct RgcnCache {
    aggregates: Vec<Tensor>,
    bn: BatchNormCache,
    normalized: Tensor,
}

impl RgcnCache {
    /// Smallest |pre-activation| at the ReLU; how far the point is from a kink.
    pub fn relu_margin(&self) -> f64 {
        self.normalized
            .data()
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

impl RgcnLayer {
    pub fn new<R: Rng + ?Sized>(dim: usize, bn: BatchNormConfig, rng: &mut R) -> Self {
        let std = (1.0 / dim as f64).sqrt();
        Self {
            kernels: (0..NUM_EDGE_TYPES)
                .map(|_| Tensor::randn(&[dim, dim], std, rng))
                .collect(),
            bn: BatchNorm::new(dim, bn),
        }
    }

    pub fn dim(&self) -> usize {
        self.bn.dim()
    }

    /// Per-type sums of incoming neighbour states.
    fn aggregate(h: &Tensor, graph: &ResidueGraph) -> Vec<Tensor> {
        let d = h.cols();
        let mut agg = vec![Tensor::zeros(&[graph.n, d]); NUM_EDGE_TYPES];
        for e in &graph.edges {
            let src = h.row(e.src).to_vec();
            for (a, s) in agg[e.kind.index()].row_mut(e.dst).iter_mut().zip(&src) {
                *a += s;
            }
        }
        agg
    }

    pub fn forward(
        &self,
        h: &Tensor,
        graph: &ResidueGraph,
        mode: Mode,
    ) -> Result<(Tensor, RgcnCache)> {
        if h.rows() != graph.n || h.cols() != self.dim() {
            return Err(Error::Shape {
                left: h.shape().to_vec(),
                right: vec![graph.n, self.dim()],
                context: "rgcn input vs graph nodes × width",
            });
        }
        let aggregates = Self::aggregate(h, graph);
        let mut pre = Tensor::zeros(&[graph.n, self.dim()]);
        for (agg, w) in aggregates.iter().zip(&self.kernels) {
            pre.add_assign(&agg.matmul(w));
        }
        let (normalized, bn) = self.bn.forward(&pre, mode)?;
        let mut out = relu_forward(&normalized);
        out.add_assign(h);
        Ok((
            out,
            RgcnCache {
                aggregates,
                bn,
                normalized,
            },
        ))
    }

    pub fn backward(
        &self,
        graph: &ResidueGraph,
        cache: &RgcnCache,
        d_out: &Tensor,
        grad: &mut RgcnLayer,
    ) -> Tensor {
        let d_norm = relu_backward(&cache.normalized, d_out);
        let d_pre = self.bn.backward(&cache.bn, &d_norm, &mut grad.bn);
        let mut dh = d_out.clone();
        let mut d_agg = Vec::with_capacity(NUM_EDGE_TYPES);
        for (r, (agg, w)) in cache.aggregates.iter().zip(&self.kernels).enumerate() {
            grad.kernels[r].add_assign(&agg.t_matmul(&d_pre));
            d_agg.push(d_pre.matmul_t(w));
        }
        for e in &graph.edges {
            let g = d_agg[e.kind.index()].row(e.dst).to_vec();
            for (a, s) in dh.row_mut(e.src).iter_mut().zip(&g) {
                *a += s;
            }
        }
        dh
    }
}

impl Parameters for RgcnLayer {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        self.kernels.visit(&join(prefix, "kernel"), f);
        self.bn.visit(&join(prefix, "bn"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        self.kernels.visit_mut(&join(prefix, "kernel"), f);
        self.bn.visit_mut(&join(prefix, "bn"), f);
    }
}

/// Stand-alone layer application (no cache).
pub fn rgcn_layer(
    h: &Tensor,
    graph: &ResidueGraph,
    layer: &RgcnLayer,
    mode: Mode,
) -> Result<Tensor> {
    layer.forward(h, graph, mode).map(|(out, _)| out)
}

/// Input projection followed by a stack of relational convolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureEncoder {
    pub input: Linear,
    pub layers: Vec<RgcnLayer>,
}

#[derive(Debug, Clone)]
pub struct StructureCache {
    graph: ResidueGraph,
    ranges: Vec<Range<usize>>,
    layers: Vec<RgcnCache>,
    readout: Readout,
}

/// Per-residue states of a batch of graphs, plus pooled per-graph rows.
#[derive(Debug, Clone)]
pub struct StructureOutput {
    pub per_residue: Vec<Tensor>,
    pub pooled: Tensor,
}

impl StructureEncoder {
    pub fn new<R: Rng + ?Sized>(
        node_dim: usize,
        dim: usize,
        num_layers: usize,
        bn: BatchNormConfig,
        rng: &mut R,
    ) -> Self {
        Self {
            input: Linear::new(node_dim, dim, rng),
            layers: (0..num_layers)
                .map(|_| RgcnLayer::new(dim, bn, rng))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.input.out_dim()
    }

    /// Encode several graphs at once; batch norm sees all of their nodes.
    pub fn forward_batch(
        &self,
        graphs: &[&ResidueGraph],
        readout: Readout,
        mode: Mode,
    ) -> Result<(StructureOutput, StructureCache)> {
        if let Some(g) = graphs
            .iter()
            .find(|g| g.node_features.cols() != self.input.in_dim())
        {
            return Err(Error::Config(format!(
                "graph {} has node feature width {}, encoder expects {}",
                g.id,
                g.node_features.cols(),
                self.input.in_dim()
            )));
        }
        let (graph, ranges) = ResidueGraph::disjoint_union(graphs);
        let mut h = self.input.forward(&graph.node_features)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = layer.forward(&h, &graph, mode)?;
            caches.push(cache);
            h = next;
        }
        let per_residue: Vec<Tensor> = ranges
            .iter()
            .map(|r| h.slice_rows(r.start, r.end))
            .collect();
        let pooled = Tensor::stack_rows(
            &per_residue
                .iter()
                .map(|t| readout.pool(t))
                .collect::<Vec<_>>(),
        );
        Ok((
            StructureOutput {
                per_residue,
                pooled,
            },
            StructureCache {
                graph,
                ranges,
                layers: caches,
                readout,
            },
        ))
    }

    /// `(per-residue n×D, pooled D)` for a single graph.
    pub fn encode(
        &self,
        graph: &ResidueGraph,
        readout: Readout,
        mode: Mode,
    ) -> Result<(Tensor, Tensor)> {
        let (mut out, _) = self.forward_batch(&[graph], readout, mode)?;
        let pooled = Tensor::vector(out.pooled.row(0).to_vec());
        Ok((out.per_residue.remove(0), pooled))
    }

    /// Backpropagate gradients of the pooled rows (`B×D`).
    pub fn backward(&self, cache: &StructureCache, d_pooled: &Tensor, grad: &mut StructureEncoder) {
        let mut dh = Tensor::zeros(&[cache.graph.n, self.dim()]);
        for (b, range) in cache.ranges.iter().enumerate() {
            let scale = cache.readout.backward_scale(range.len());
            for i in range.clone() {
                for (d, g) in dh.row_mut(i).iter_mut().zip(d_pooled.row(b)) {
                    *d = g * scale;
                }
            }
        }
        for (l, layer) in self.layers.iter().enumerate().rev() {
            dh = layer.backward(&cache.graph, &cache.layers[l], &dh, &mut grad.layers[l]);
        }
        let _ = self
            .input
            .backward(&cache.graph.node_features, &dh, &mut grad.input);
    }

    /// Fold train-mode batch statistics into running estimates.
    pub fn commit(&mut self, cache: &StructureCache) {
        for (layer, c) in self.layers.iter_mut().zip(&cache.layers) {
            layer.bn.commit(&c.bn);
        }
    }
}

impl Parameters for StructureEncoder {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor, ParamKind)) {
        self.input.visit(&join(prefix, "input"), f);
        self.layers.visit(&join(prefix, "layer"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor, ParamKind)) {
        self.input.visit_mut(&join(prefix, "input"), f);
        self.layers.visit_mut(&join(prefix, "layer"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_residue_graph, Edge, EdgeType, GraphConfig};
    use crate::ingest::record_of_len;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_node_graph() -> ResidueGraph {
        build_residue_graph(&record_of_len("a", 1), &GraphConfig::default()).unwrap()
    }

    #[test]
    fn hand_evaluated_single_node() {
        let g = single_node_graph();
        assert_eq!(g.edges, vec![Edge::new(0, 0, EdgeType::Seq0)]);
        let mut layer = RgcnLayer::new(
            1,
            BatchNormConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        for k in &mut layer.kernels {
            k.fill(0.0);
        }
        layer.kernels[EdgeType::Seq0.index()] = Tensor::matrix(1, 1, vec![2.0]);
        let out = rgcn_layer(&Tensor::matrix(1, 1, vec![1.0]), &g, &layer, Mode::Eval).unwrap();
        let expected = 1.0 + 2.0 / (1.0 + crate::nn::BN_EPS).sqrt();
        assert!((out.get(0, 0) - expected).abs() < 1e-15);
        assert!((out.get(0, 0) - 3.0).abs() < 1e-4);
    }

    #[test]
    fn zero_kernels_leave_input_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = build_residue_graph(&record_of_len("a", 5), &GraphConfig::default()).unwrap();
        let mut layer = RgcnLayer::new(4, BatchNormConfig::default(), &mut rng);
        layer.kernels.iter_mut().for_each(|k| k.fill(0.0));
        let h = Tensor::randn(&[5, 4], 1.0, &mut rng);
        for mode in [Mode::Train, Mode::Eval] {
            let out = rgcn_layer(&h, &g, &layer, mode).unwrap();
            assert_eq!(out, h);
        }
    }

    #[test]
    fn width_mismatch_is_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let enc = StructureEncoder::new(5, 8, 1, BatchNormConfig::default(), &mut rng);
        let g = single_node_graph();
        assert!(matches!(
            enc.encode(&g, Readout::Mean, Mode::Eval),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn output_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = StructureEncoder::new(
            crate::graph::NODE_FEATURE_DIM,
            8,
            2,
            BatchNormConfig::default(),
            &mut rng,
        );
        let g = build_residue_graph(&record_of_len("a", 6), &GraphConfig::default()).unwrap();
        let (per, pooled) = enc.encode(&g, Readout::Mean, Mode::Eval).unwrap();
        assert_eq!(per.shape(), &[6, 8]);
        assert_eq!(pooled.shape(), &[8]);
    }
}
