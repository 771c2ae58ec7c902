//! Residue-level relational graphs built from Cα traces.
//!
//! Node and edge features are functions of residue types, sequence indices
//! and pairwise distances only, so graphs are unchanged by rigid motions and
//! reflections of the input coordinates.

mod edges;

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{PeptideRecord, VOCAB_SIZE};
use crate::tensor::Tensor;

pub use edges::{
    distance, knn_edges, knn_rank_key, radius_edges, sequential_edges, Edge, EdgeType,
    MAX_SEQ_OFFSET, NUM_EDGE_TYPES,
};

/// One-hot residue type plus normalized sequence position.
pub const NODE_FEATURE_DIM: usize = VOCAB_SIZE + 1;
/// Edge type, source residue, target residue one-hots, then scaled
/// sequence separation and scaled distance.
pub const EDGE_FEATURE_DIM: usize = NUM_EDGE_TYPES + 2 * VOCAB_SIZE + 2;
const SEQ_SEPARATION_CLAMP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Ångström; pairs strictly closer than this get radius edges.
    pub radius_cutoff: f64,
    pub knn_k: usize,
    pub mask_residue_identity: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            radius_cutoff: 10.0,
            knn_k: 10,
            mask_residue_identity: false,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_cutoff > 0.0 && self.radius_cutoff.is_finite()) {
            return Err(Error::Config(format!(
                "radius cutoff must be positive, got {}",
                self.radius_cutoff
            )));
        }
        if self.knn_k == 0 {
            return Err(Error::Config("knn k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidueGraph {
    pub id: String,
    pub n: usize,
    /// Deduplicated, sorted by `(type, src, dst)`.
    pub edges: Vec<Edge>,
    pub node_features: Tensor,
    pub edge_features: Tensor,
    /// Kept for target construction; never read by the encoder.
    pub coords: Vec<[f64; 3]>,
}

impl ResidueGraph {
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn count(&self, kind: EdgeType) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    /// Block-diagonal union; returns the node range of each input graph.
    pub fn disjoint_union(graphs: &[&ResidueGraph]) -> (ResidueGraph, Vec<Range<usize>>) {
        let mut ranges = Vec::with_capacity(graphs.len());
        let mut edges = Vec::new();
        let mut coords = Vec::new();
        let mut offset = 0;
        for g in graphs {
            ranges.push(offset..offset + g.n);
            edges.extend(
                g.edges
                    .iter()
                    .map(|e| Edge::new(e.src + offset, e.dst + offset, e.kind)),
            );
            coords.extend_from_slice(&g.coords);
            offset += g.n;
        }
        edges.sort_by_key(Edge::sort_key);
        let node_features =
            Tensor::vcat(&graphs.iter().map(|g| &g.node_features).collect::<Vec<_>>());
        let edge_features =
            Tensor::vcat(&graphs.iter().map(|g| &g.edge_features).collect::<Vec<_>>());
        let ids: Vec<&str> = graphs.iter().map(|g| g.id.as_str()).collect();
        (
            ResidueGraph {
                id: ids.join("+"),
                n: offset,
                edges,
                node_features,
                edge_features,
                coords,
            },
            ranges,
        )
    }
}

/// Build the graph for one record: sequential, radius and KNN edges, their
/// deduplicated union, and the invariant node/edge features.
///
/// `knn_k` is clamped to `n − 1`, so single-residue peptides get no KNN edges.
pub fn build_residue_graph(record: &PeptideRecord, config: &GraphConfig) -> Result<ResidueGraph> {
    config.validate()?;
    record.validate()?;
    let tokens = record.tokens()?;
    let n = record.len();

    let mut set: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    let mut all = sequential_edges(n);
    all.extend(radius_edges(&record.coords, config.radius_cutoff));
    let k = config.knn_k.min(n - 1);
    if k >= 1 {
        all.extend(knn_edges(&record.coords, k)?);
    }
    for e in &all {
        set.insert(e.sort_key());
    }
    let edges: Vec<Edge> = set
        .into_iter()
        .map(|(r, i, j)| Edge::new(i, j, EdgeType::from_index(r).expect("valid type")))
        .collect();

    let mask = config.mask_residue_identity;
    let mut node_features = Tensor::zeros(&[n, NODE_FEATURE_DIM]);
    for (i, &t) in tokens.iter().enumerate() {
        if !mask {
            node_features.set(i, t, 1.0);
        }
        let pos = if n > 1 {
            i as f64 / (n - 1) as f64
        } else {
            0.0
        };
        node_features.set(i, VOCAB_SIZE, pos);
    }

    let mut edge_features = Tensor::zeros(&[edges.len(), EDGE_FEATURE_DIM]);
    for (row, e) in edges.iter().enumerate() {
        edge_features.set(row, e.kind.index(), 1.0);
        if !mask {
            edge_features.set(row, NUM_EDGE_TYPES + tokens[e.src], 1.0);
            edge_features.set(row, NUM_EDGE_TYPES + VOCAB_SIZE + tokens[e.dst], 1.0);
        }
        let sep = e.src.abs_diff(e.dst).min(SEQ_SEPARATION_CLAMP) as f64 * 0.1;
        edge_features.set(row, NUM_EDGE_TYPES + 2 * VOCAB_SIZE, sep);
        let d = distance(&record.coords[e.src], &record.coords[e.dst]) / config.radius_cutoff;
        edge_features.set(row, NUM_EDGE_TYPES + 2 * VOCAB_SIZE + 1, d);
    }

    Ok(ResidueGraph {
        id: record.id.clone(),
        n,
        edges,
        node_features,
        edge_features,
        coords: record.coords.clone(),
    })
}
