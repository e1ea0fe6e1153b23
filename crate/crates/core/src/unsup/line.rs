//! First- and second-order proximity embeddings via edge sampling.
//!
//! First order: one vector per node, maximise `ln σ(u_i·u_j)` over sampled
//! edges. Second order: separate context vectors, maximise `ln σ(u'_j·u_i)`.
//! Both draw negatives from `degree^0.75` and sample edges in proportion to
//! their weight, each undirected edge in both directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embedding::{EmbeddingTable, NegativeSampler, SkipGram};
use crate::graph::HetGraph;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProximityParams {
    pub dim: usize,
    pub negatives: usize,
    /// Number of edge samples per edge (times the edge count).
    pub samples_per_edge: usize,
    pub lr: f64,
}

impl Default for ProximityParams {
    fn default() -> Self {
        Self {
            dim: 32,
            negatives: 5,
            samples_per_edge: 200,
            lr: 0.025,
        }
    }
}

/// Edge list in both directions with cumulative weights.
struct EdgeSampler {
    edges: Vec<(usize, usize)>,
    cumulative: Vec<f64>,
}

impl EdgeSampler {
    fn new(graph: &HetGraph) -> Self {
        let mut edges = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (a, b, w) in graph.edges() {
            for e in [(a, b), (b, a)] {
                acc += w;
                edges.push(e);
                cumulative.push(acc);
            }
        }
        Self { edges, cumulative }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let x = rng.random::<f64>() * self.cumulative.last().unwrap();
        let i = self.cumulative.partition_point(|&c| c <= x).min(self.edges.len() - 1);
        self.edges[i]
    }
}

pub fn train_proximity(graph: &HetGraph, order: Order, p: &ProximityParams, seed: u64) -> Result<EmbeddingTable> {
    graph.ensure_no_isolated()?;
    if p.dim == 0 || p.samples_per_edge == 0 {
        return Err(Error::invalid("proximity embedding needs positive dim and samples"));
    }
    let n = graph.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = SkipGram::new(n, p.dim, &mut rng);
    if order == Order::First {
        // a single table: seed both sides identically and keep them tied
        model.output = model.input.clone();
    }
    let degrees: Vec<f64> = (0..n).map(|v| graph.weighted_degree(v)).collect();
    let negatives = NegativeSampler::from_counts(&degrees);
    let edges = EdgeSampler::new(graph);
    let total = p.samples_per_edge * graph.num_edges();
    let mut negs = vec![0usize; p.negatives];
    for step in 0..total {
        let lr = p.lr * (1.0 - step as f64 / total as f64).max(1e-4);
        let (src, dst) = edges.sample(&mut rng);
        for slot in negs.iter_mut() {
            *slot = negatives.sample(&mut rng);
        }
        match order {
            Order::Second => model.update(src, dst, &negs, lr),
            Order::First => first_order_update(&mut model.input, p.dim, src, dst, &negs, lr),
        }
    }
    if model.input.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("proximity embedding".into()));
    }
    let ids = (0..n).map(|v| graph.name(v).to_string()).collect();
    EmbeddingTable::new(p.dim, ids, model.input)
}

fn first_order_update(table: &mut [f64], d: usize, src: usize, dst: usize, negs: &[usize], lr: f64) {
    let mut grad_src = vec![0.0; d];
    for (target, label) in std::iter::once((dst, 1.0)).chain(negs.iter().map(|&n| (n, 0.0))) {
        if target == src {
            continue;
        }
        let (s, t) = (src * d, target * d);
        let score: f64 = (0..d).map(|k| table[s + k] * table[t + k]).sum();
        let g = lr * (label - crate::nn::sigmoid(score));
        for k in 0..d {
            grad_src[k] += g * table[t + k];
            table[t + k] += g * table[s + k];
        }
    }
    for k in 0..d {
        table[src * d + k] += grad_src[k];
    }
}
