use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relation types of the residue graph. The discriminant is the kernel index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    SeqMinus2 = 0,
    SeqMinus1 = 1,
    Seq0 = 2,
    SeqPlus1 = 3,
    SeqPlus2 = 4,
    Radius = 5,
    Knn = 6,
}

pub const NUM_EDGE_TYPES: usize = 7;
pub const MAX_SEQ_OFFSET: i64 = 2;

impl EdgeType {
    pub const ALL: [EdgeType; NUM_EDGE_TYPES] = [
        EdgeType::SeqMinus2,
        EdgeType::SeqMinus1,
        EdgeType::Seq0,
        EdgeType::SeqPlus1,
        EdgeType::SeqPlus2,
        EdgeType::Radius,
        EdgeType::Knn,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Sequential type for offset `d = j − i`, `d ∈ {−2..2}`.
    pub fn sequential(d: i64) -> Option<Self> {
        match d {
            -2 => Some(EdgeType::SeqMinus2),
            -1 => Some(EdgeType::SeqMinus1),
            0 => Some(EdgeType::Seq0),
            1 => Some(EdgeType::SeqPlus1),
            2 => Some(EdgeType::SeqPlus2),
            _ => None,
        }
    }

    pub fn seq_offset(self) -> Option<i64> {
        match self {
            EdgeType::Radius | EdgeType::Knn => None,
            seq => Some(seq as i64 - 2),
        }
    }
}

/// Directed edge `src → dst` of relation `kind`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeType,
}

impl Edge {
    pub fn new(src: usize, dst: usize, kind: EdgeType) -> Self {
        Self { src, dst, kind }
    }

    pub fn sort_key(&self) -> (usize, usize, usize) {
        (self.kind.index(), self.src, self.dst)
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Every `(i, j, Seq(j − i))` with `|j − i| ≤ 2`, self-edges included.
pub fn sequential_edges(n: usize) -> Vec<Edge> {
    let mut edges = Vec::new();
    for d in -MAX_SEQ_OFFSET..=MAX_SEQ_OFFSET {
        let kind = EdgeType::sequential(d).expect("offset in range");
        for i in 0..n as i64 {
            let j = i + d;
            if (0..n as i64).contains(&j) {
                edges.push(Edge::new(i as usize, j as usize, kind));
            }
        }
    }
    edges
}

/// Both directions for every pair closer than `cutoff` (strict).
pub fn radius_edges(coords: &[[f64; 3]], cutoff: f64) -> Vec<Edge> {
    let n = coords.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if distance(&coords[i], &coords[j]) < cutoff {
                edges.push(Edge::new(i, j, EdgeType::Radius));
                edges.push(Edge::new(j, i, EdgeType::Radius));
            }
        }
    }
    edges
}

/// Distances closer than this rank as tied in neighbour selection. Far below
/// coordinate precision, but above the ~1e-15 Å jitter a rotation adds, so
/// regular geometries (helices) pick the same neighbours in every pose.
pub const KNN_RESOLUTION: f64 = 1e-9;

/// Ranking key for neighbour selection: distance in units of [`KNN_RESOLUTION`].
pub fn knn_rank_key(d: f64) -> u64 {
    (d / KNN_RESOLUTION).round() as u64
}

/// For each node `i`, edges `(j, i)` from its `k` nearest other nodes.
/// Distance ties (at [`KNN_RESOLUTION`]) go to the lower index.
pub fn knn_edges(coords: &[[f64; 3]], k: usize) -> Result<Vec<Edge>> {
    let n = coords.len();
    if k == 0 || k >= n {
        return Err(Error::Config(format!(
            "knn needs 1 <= k < n, got k={k} for n={n}"
        )));
    }
    let mut edges = Vec::with_capacity(n * k);
    let mut cand: Vec<(u64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        cand.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (knn_rank_key(distance(&coords[i], &coords[j])), j)),
        );
        cand.sort_unstable();
        edges.extend(
            cand[..k]
                .iter()
                .map(|&(_, j)| Edge::new(j, i, EdgeType::Knn)),
        );
    }
    Ok(edges)
}
