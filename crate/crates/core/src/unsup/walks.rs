//! Weighted and second-order biased random walks on the heterogeneous graph.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::HetGraph;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub walks_per_node: usize,
    pub walk_length: usize,
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            walks_per_node: 10,
            walk_length: 40,
            p: 1.0,
            q: 1.0,
        }
    }
}

/// Next-node distribution from `curr`, having arrived from `prev`.
///
/// Unnormalised weight of neighbour `x` is `w(curr, x) * a(prev, x)` with
/// `a = 1/p` when `x == prev`, `1` when `x` is adjacent to `prev` and `1/q`
/// otherwise. Without a previous node the law is proportional to edge
/// weight alone.
pub fn transition_probs(graph: &HetGraph, prev: Option<usize>, curr: usize, p: f64, q: f64) -> Vec<(usize, f64)> {
    let weights: Vec<(usize, f64)> = graph
        .neighbors(curr)
        .iter()
        .map(|&(x, w)| {
            let x = x as usize;
            let bias = match prev {
                None => 1.0,
                Some(t) if x == t => 1.0 / p,
                Some(t) if graph.has_edge(t, x) => 1.0,
                Some(_) => 1.0 / q,
            };
            (x, w * bias)
        })
        .collect();
    let total: f64 = weights.iter().map(|&(_, w)| w).sum();
    weights.into_iter().map(|(x, w)| (x, w / total)).collect()
}

fn draw<R: Rng + ?Sized>(probs: &[(usize, f64)], rng: &mut R) -> usize {
    let mut x = rng.random::<f64>();
    for &(node, p) in probs {
        if x < p {
            return node;
        }
        x -= p;
    }
    probs.last().expect("non-empty neighbourhood").0
}

/// One walk of `length` nodes starting at `start`.
pub fn walk_from<R: Rng + ?Sized>(graph: &HetGraph, start: usize, params: &WalkParams, rng: &mut R) -> Vec<u32> {
    let mut walk = Vec::with_capacity(params.walk_length);
    walk.push(start as u32);
    let mut prev = None;
    let mut curr = start;
    while walk.len() < params.walk_length {
        if graph.degree(curr) == 0 {
            break;
        }
        let next = draw(&transition_probs(graph, prev, curr, params.p, params.q), rng);
        walk.push(next as u32);
        prev = Some(curr);
        curr = next;
    }
    walk
}

/// `walks_per_node` rounds; each round visits every node once in a seeded
/// shuffled order.
pub fn generate_walks(graph: &HetGraph, params: &WalkParams, seed: u64) -> Result<Vec<Vec<u32>>> {
    graph.ensure_no_isolated()?;
    if !(params.p > 0.0 && params.q > 0.0) {
        return Err(Error::invalid("walk parameters p and q must be positive"));
    }
    if params.walk_length < 2 {
        return Err(Error::invalid("walk length must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..graph.num_nodes()).collect();
    let mut walks = Vec::with_capacity(params.walks_per_node * order.len());
    for _ in 0..params.walks_per_node {
        order.shuffle(&mut rng);
        for &start in &order {
            walks.push(walk_from(graph, start, params, &mut rng));
        }
    }
    Ok(walks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, RawDocument, Role};
    use crate::graph::build_graph;

    fn graph() -> HetGraph {
        let c = build_corpus(
            &[
                RawDocument::new("q1", Role::Query, "ml ml python data"),
                RawDocument::new("q2", Role::Query, "python web"),
                RawDocument::new("c1", Role::Candidate, "ml data data"),
                RawDocument::new("c2", Role::Candidate, "web python"),
            ],
            10,
            10,
        )
        .unwrap();
        build_graph(&c)
    }

    #[test]
    fn unit_bias_matches_weighted_walk() {
        let g = graph();
        for curr in 0..g.num_nodes() {
            let base = transition_probs(&g, None, curr, 1.0, 1.0);
            for &(prev, _) in g.neighbors(curr) {
                let biased = transition_probs(&g, Some(prev as usize), curr, 1.0, 1.0);
                for (a, b) in base.iter().zip(&biased) {
                    assert_eq!(a.0, b.0);
                    assert!((a.1 - b.1).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn return_parameter_scales_backtracking() {
        let g = graph();
        let q1 = g.query_node(0);
        let python = g
            .neighbors(q1)
            .iter()
            .map(|&(n, _)| n as usize)
            .find(|&n| g.name(n) == "w:python")
            .unwrap();
        let probs = transition_probs(&g, Some(q1), python, 0.5, 1.0);
        // python links q1 (w=1), q2 (w=1), c2 (w=1); back to q1 has weight 2
        let back = probs.iter().find(|&&(n, _)| n == q1).unwrap().1;
        assert!((back - 0.5).abs() < 1e-12);
    }

    #[test]
    fn walks_are_seeded_and_follow_edges() {
        let g = graph();
        let params = WalkParams {
            walks_per_node: 3,
            walk_length: 12,
            p: 0.7,
            q: 2.0,
        };
        let a = generate_walks(&g, &params, 5).unwrap();
        assert_eq!(a, generate_walks(&g, &params, 5).unwrap());
        assert_eq!(a.len(), 3 * g.num_nodes());
        for w in &a {
            assert_eq!(w.len(), 12);
            for pair in w.windows(2) {
                assert!(g.has_edge(pair[0] as usize, pair[1] as usize));
            }
        }
    }
}
