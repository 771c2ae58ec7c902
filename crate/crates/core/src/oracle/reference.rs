//! Slow, literal reference implementations used to cross-check the
//! production code. Each one is written from the definition, deliberately
//! avoiding the data layout and loop structure of the fast path.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::encoders::RgcnLayer;
use crate::graph::{distance, knn_rank_key, Edge, EdgeType, ResidueGraph};
use crate::nn::Mode;
use crate::tensor::Tensor;

/// Edges sorted the way the graph builder stores them.
pub fn sorted(mut edges: Vec<Edge>) -> Vec<Edge> {
    edges.sort_by_key(Edge::sort_key);
    edges.dedup();
    edges
}

/// `j → i` is a KNN edge iff fewer than `k` other nodes precede `j` in the
/// order (ranked distance to `i`, index).
pub fn knn_brute(coords: &[[f64; 3]], k: usize) -> Vec<Edge> {
    let n = coords.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let dj = knn_rank_key(distance(&coords[i], &coords[j]));
            let ahead = (0..n)
                .filter(|&m| m != i && m != j)
                .filter(|&m| {
                    let dm = knn_rank_key(distance(&coords[i], &coords[m]));
                    dm < dj || (dm == dj && m < j)
                })
                .count();
            if ahead < k {
                edges.push(Edge::new(j, i, EdgeType::Knn));
            }
        }
    }
    sorted(edges)
}

pub fn radius_brute(coords: &[[f64; 3]], cutoff: f64) -> Vec<Edge> {
    let n = coords.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && distance(&coords[i], &coords[j]) < cutoff {
                edges.push(Edge::new(i, j, EdgeType::Radius));
            }
        }
    }
    sorted(edges)
}

/// Expected number of sequential edges at offset `d`.
pub fn sequential_count(n: usize, d: i64) -> usize {
    n.saturating_sub(d.unsigned_abs() as usize)
}

/// Per-node, per-relation, per-neighbour sum followed by batch norm, ReLU and
/// the residual, all as explicit loops.
pub fn rgcn_triple_loop(h: &Tensor, graph: &ResidueGraph, layer: &RgcnLayer, mode: Mode) -> Tensor {
    let (n, d) = (graph.n, h.cols());
    let mut pre = vec![vec![0.0; d]; n];
    for (i, row) in pre.iter_mut().enumerate() {
        for kind in EdgeType::ALL {
            let w = &layer.kernels[kind.index()];
            for e in graph.edges.iter().filter(|e| e.dst == i && e.kind == kind) {
                for b in 0..d {
                    for a in 0..d {
                        row[b] += h.get(e.src, a) * w.get(a, b);
                    }
                }
            }
        }
    }
    let bn = &layer.bn;
    let mut out = Tensor::zeros(&[n, d]);
    for b in 0..d {
        let (mean, var) = match mode {
            Mode::Train => {
                let mean = (0..n).map(|i| pre[i][b]).sum::<f64>() / n as f64;
                let var = (0..n).map(|i| (pre[i][b] - mean).powi(2)).sum::<f64>() / n as f64;
                (mean, var)
            }
            Mode::Eval => (bn.running_mean.data()[b], bn.running_var.data()[b]),
        };
        for i in 0..n {
            let y = bn.gamma.data()[b] * (pre[i][b] - mean) / (var + bn.config.eps).sqrt()
                + bn.beta.data()[b];
            out.set(i, b, y.max(0.0) + h.get(i, b));
        }
    }
    out
}

pub fn accuracy(scores: &[f64], labels: &[f64]) -> f64 {
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(s, y)| (**s >= 0.5) == (**y >= 0.5))
        .count();
    hits as f64 / scores.len() as f64
}

/// `2TP / (2TP + FP + FN)`, zero when there are no true positives.
pub fn f1(scores: &[f64], labels: &[f64]) -> f64 {
    let count = |p: bool, y: bool| {
        scores
            .iter()
            .zip(labels)
            .filter(|(s, l)| (**s >= 0.5) == p && (**l >= 0.5) == y)
            .count() as f64
    };
    let (tp, fp, fneg) = (count(true, true), count(true, false), count(false, true));
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fneg)
    }
}

/// Probability a random positive outscores a random negative, ties half.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Option<f64> {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, y)| **y >= 0.5)
        .map(|(s, _)| *s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, y)| **y < 0.5)
        .map(|(s, _)| *s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for q in &neg {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

pub fn rmse(preds: &[f64], labels: &[f64]) -> f64 {
    let n = preds.len() as f64;
    (preds
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Population covariance over the product of population standard deviations.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / n;
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n).sqrt();
    if sx == 0.0 || sy == 0.0 || x.len() < 2 {
        return None;
    }
    Some(cov / (sx * sy))
}

/// Rank = 1 + #smaller + (#equal − 1)/2.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let smaller = values.iter().filter(|w| *w < v).count() as f64;
            let equal = values.iter().filter(|w| *w == v).count() as f64;
            1.0 + smaller + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&ranks(x), &ranks(y))
}

/// Proper or improper rigid motion `x ↦ Rx + t`.
#[derive(Debug, Clone, Copy)]
pub struct Isometry {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl Isometry {
    /// Uniform rotation from a normalized Gaussian quaternion, a reflection
    /// through the x = 0 plane half the time, and a translation up to 50 Å.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let [w, x, y, z] = q.map(|v| v / norm);
        let mut rotation = [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ];
        if rng.random_bool(0.5) {
            for row in &mut rotation {
                row[0] = -row[0];
            }
        }
        Self {
            rotation,
            translation: std::array::from_fn(|_| rng.random_range(-50.0..50.0)),
        }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.rotation;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn apply(&self, p: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|r| {
            (0..3).map(|c| self.rotation[r][c] * p[c]).sum::<f64>() + self.translation[r]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn isometries_preserve_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut reflections = 0;
        for _ in 0..50 {
            let t = Isometry::random(&mut rng);
            let det = t.determinant();
            assert!((det.abs() - 1.0).abs() < 1e-12);
            reflections += usize::from(det < 0.0);
            let (a, b) = ([1.0, 2.0, 3.0], [-4.0, 0.5, 2.0]);
            assert!((distance(&t.apply(&a), &t.apply(&b)) - distance(&a, &b)).abs() < 1e-12);
        }
        assert!(reflections > 10 && reflections < 40);
    }

    #[test]
    fn brute_ranks_average_ties() {
        assert_eq!(ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }
}
