//! Neighbour-aggregation encoder over the heterogeneous graph.
//!
//! Layer `l` computes `h_v = act(W_l · [h_v^{l-1} ; mean_{u in S_l(v)} h_u^{l-1}] + b_l)`
//! where `S_l(v)` is a fixed-size uniform neighbour sample. Samples are a
//! pure function of `(seed, salt, layer, node)`, so encoding the same node
//! twice with the same salt is bit-identical. Hidden layers use ReLU; the
//! last layer is linear.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::graph::HetGraph;
use crate::nn::{Activation, Dense, DenseCache, ParamTensor};
use crate::unsup::embedding::{doc_vector, EmbeddingTable};
use crate::{Error, Result};

/// Input features for every graph node, row-major `[num_nodes, dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFeatures {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl NodeFeatures {
    /// Word nodes take their word vector; document nodes the mean of their
    /// word vectors. Words missing from the table get a zero vector.
    pub fn from_text_embeddings(graph: &HetGraph, corpus: &Corpus, table: &EmbeddingTable) -> Result<Self> {
        let dim = table.dim();
        let mut data = vec![0.0; graph.num_nodes() * dim];
        for (i, doc) in corpus.queries().iter().enumerate() {
            let n = graph.query_node(i);
            data[n * dim..(n + 1) * dim].copy_from_slice(&doc_vector(table, corpus, doc)?);
        }
        for (i, doc) in corpus.candidates().iter().enumerate() {
            let n = graph.candidate_node(i);
            data[n * dim..(n + 1) * dim].copy_from_slice(&doc_vector(table, corpus, doc)?);
        }
        for (t, word) in corpus.vocab().words().iter().enumerate() {
            if let Some(v) = table.get(word) {
                let n = graph.word_node(t as u32);
                data[n * dim..(n + 1) * dim].copy_from_slice(v);
            }
        }
        Ok(Self { dim, data })
    }

    pub fn row(&self, node: usize) -> &[f64] {
        &self.data[node * self.dim..(node + 1) * self.dim]
    }

    pub fn num_nodes(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }
}

fn mix(parts: [u64; 4]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

#[derive(Clone, Debug, PartialEq)]
pub struct SageEncoder {
    pub layers: Vec<Dense>,
    pub sample_size: usize,
    pub seed: u64,
    input_dim: usize,
}

struct Level {
    nodes: Vec<usize>,
    /// Index into the level below, per node.
    samples: Vec<Vec<usize>>,
    caches: Vec<DenseCache>,
}

/// Forward state kept for the backward pass.
pub struct SagePass {
    pub outputs: Vec<Vec<f64>>,
    target_slots: Vec<usize>,
    levels: Vec<Level>,
    level0_len: usize,
}

impl SageEncoder {
    /// `dims[l]` is the output width of layer `l`; an empty list gives the
    /// identity encoder (output = input features).
    pub fn new(input_dim: usize, dims: &[usize], sample_size: usize, seed: u64, init_scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut prev = input_dim;
        let layers = dims
            .iter()
            .enumerate()
            .map(|(l, &d)| {
                let act = if l + 1 == dims.len() {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                let layer = Dense::new(&format!("sage.{l}"), 2 * prev, d, act, init_scale, &mut rng);
                prev = d;
                layer
            })
            .collect();
        Self {
            layers,
            sample_size,
            seed,
            input_dim,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, Dense::output_dim)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Uniform sample without replacement; the full sorted neighbourhood
    /// when the degree does not exceed the sample size.
    pub fn sample_neighbors(&self, graph: &HetGraph, node: usize, layer: usize, salt: u64) -> Result<Vec<usize>> {
        let nbrs = graph.neighbors(node);
        if nbrs.is_empty() {
            return Err(Error::IsolatedNode(graph.name(node).to_string()));
        }
        if nbrs.len() <= self.sample_size {
            return Ok(nbrs.iter().map(|&(n, _)| n as usize).collect());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix([self.seed, salt, layer as u64, node as u64]));
        let mut idx = rand::seq::index::sample(&mut rng, nbrs.len(), self.sample_size).into_vec();
        idx.sort_unstable();
        Ok(idx.into_iter().map(|i| nbrs[i].0 as usize).collect())
    }

    pub fn forward(&self, graph: &HetGraph, feats: &NodeFeatures, targets: &[usize], salt: u64) -> Result<SagePass> {
        if feats.dim != self.input_dim {
            return Err(Error::Shape(format!(
                "node features have dimension {} but the encoder expects {}",
                feats.dim, self.input_dim
            )));
        }
        let n = graph.num_nodes();
        let depth = self.layers.len();
        // node sets, top level first
        let mut slot = vec![usize::MAX; n];
        let mut top = Vec::new();
        let target_slots_raw: Vec<usize> = targets
            .iter()
            .map(|&t| {
                if slot[t] == usize::MAX {
                    slot[t] = top.len();
                    top.push(t);
                }
                slot[t]
            })
            .collect();
        let mut sets = vec![top];
        let mut raw_samples: Vec<Vec<Vec<usize>>> = Vec::with_capacity(depth);
        for l in (1..=depth).rev() {
            let upper = sets.last().unwrap().clone();
            let mut lower_slot = vec![usize::MAX; n];
            let mut lower = Vec::new();
            let mut add = |v: usize, lower: &mut Vec<usize>| {
                if lower_slot[v] == usize::MAX {
                    lower_slot[v] = lower.len();
                    lower.push(v);
                }
                lower_slot[v]
            };
            let mut samples = Vec::with_capacity(upper.len());
            for &v in &upper {
                add(v, &mut lower);
                let s = self.sample_neighbors(graph, v, l, salt)?;
                samples.push(s.into_iter().map(|u| add(u, &mut lower)).collect::<Vec<_>>());
            }
            raw_samples.push(samples);
            sets.push(lower);
        }
        sets.reverse();
        raw_samples.reverse();

        // h at level 0 = features
        let mut h: Vec<Vec<f64>> = sets[0].iter().map(|&v| feats.row(v).to_vec()).collect();
        let mut levels = Vec::with_capacity(depth);
        for l in 1..=depth {
            let layer = &self.layers[l - 1];
            let lower_pos: std::collections::HashMap<usize, usize> =
                sets[l - 1].iter().enumerate().map(|(i, &v)| (v, i)).collect();
            let d_prev = h.first().map_or(0, Vec::len);
            let mut caches = Vec::with_capacity(sets[l].len());
            let mut next_h = Vec::with_capacity(sets[l].len());
            for (i, &v) in sets[l].iter().enumerate() {
                let mut input = Vec::with_capacity(2 * d_prev);
                input.extend_from_slice(&h[lower_pos[&v]]);
                let s = &raw_samples[l - 1][i];
                let mut agg = vec![0.0; d_prev];
                for &u in s {
                    crate::nn::axpy(1.0, &h[u], &mut agg);
                }
                let inv = 1.0 / s.len() as f64;
                input.extend(agg.iter().map(|a| a * inv));
                let cache = layer.forward(&input)?;
                next_h.push(cache.output.clone());
                caches.push(cache);
            }
            levels.push(Level {
                nodes: sets[l].clone(),
                samples: raw_samples[l - 1].clone(),
                caches,
            });
            h = next_h;
        }
        let outputs = target_slots_raw.iter().map(|&s| h[s].clone()).collect();
        Ok(SagePass {
            outputs,
            target_slots: target_slots_raw,
            level0_len: sets[0].len(),
            levels,
        })
    }

    /// Accumulate parameter gradients given `dL/d output` per target.
    pub fn backward(&mut self, pass: &SagePass, d_out: &[Vec<f64>]) {
        let depth = self.layers.len();
        if depth == 0 {
            return;
        }
        let top_len = pass.levels[depth - 1].nodes.len();
        let out_dim = self.output_dim();
        let mut dh = vec![vec![0.0; out_dim]; top_len];
        for (&s, g) in pass.target_slots.iter().zip(d_out) {
            crate::nn::axpy(1.0, g, &mut dh[s]);
        }
        for l in (1..=depth).rev() {
            let level = &pass.levels[l - 1];
            let lower_len = if l == 1 {
                pass.level0_len
            } else {
                pass.levels[l - 2].nodes.len()
            };
            let lower_nodes: &[usize] = if l == 1 { &[] } else { &pass.levels[l - 2].nodes };
            let d_prev = self.layers[l - 1].input_dim() / 2;
            let mut dlower = vec![vec![0.0; d_prev]; if l == 1 { 0 } else { lower_len }];
            let pos: std::collections::HashMap<usize, usize> =
                lower_nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
            for (i, &v) in level.nodes.iter().enumerate() {
                if dh[i].iter().all(|&g| g == 0.0) {
                    continue;
                }
                let dx = self.layers[l - 1].backward(&level.caches[i], &dh[i]);
                if l == 1 {
                    continue;
                }
                crate::nn::axpy(1.0, &dx[..d_prev], &mut dlower[pos[&v]]);
                let inv = 1.0 / level.samples[i].len() as f64;
                for &u in &level.samples[i] {
                    crate::nn::axpy(inv, &dx[d_prev..], &mut dlower[u]);
                }
            }
            dh = dlower;
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    /// Encode every node (salt 0), row-major.
    pub fn encode_all(&self, graph: &HetGraph, feats: &NodeFeatures) -> Result<Vec<Vec<f64>>> {
        let nodes: Vec<usize> = (0..graph.num_nodes()).collect();
        Ok(self.forward(graph, feats, &nodes, 0)?.outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, RawDocument, Role};
    use crate::graph::build_graph;
    use crate::nn::gradcheck::{max_relative_error, STEP};

    fn setup() -> (HetGraph, NodeFeatures) {
        let c = build_corpus(
            &[
                RawDocument::new("q1", Role::Query, "aa bb cc"),
                RawDocument::new("q2", Role::Query, "cc dd"),
                RawDocument::new("c1", Role::Candidate, "aa bb"),
                RawDocument::new("c2", Role::Candidate, "aa bb"),
                RawDocument::new("c3", Role::Candidate, "dd ee aa"),
            ],
            10,
            10,
        )
        .unwrap();
        let g = build_graph(&c);
        let dim = 3;
        let data = (0..g.num_nodes() * dim)
            .map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0)
            .collect();
        (g, NodeFeatures { dim, data })
    }

    #[test]
    fn depth_zero_is_identity() {
        let (g, f) = setup();
        let enc = SageEncoder::new(3, &[], 10, 0, 0.1);
        let out = enc.forward(&g, &f, &[0, 4], 0).unwrap().outputs;
        assert_eq!(out[0], f.row(0));
        assert_eq!(out[1], f.row(4));
    }

    #[test]
    fn identical_neighbourhoods_give_identical_embeddings() {
        let (g, mut f) = setup();
        // c1 and c2 share words {aa, bb}; give them equal features
        let (c1, c2) = (g.candidate_node(0), g.candidate_node(1));
        let row = f.row(c1).to_vec();
        f.data[c2 * 3..c2 * 3 + 3].copy_from_slice(&row);
        let enc = SageEncoder::new(3, &[4, 4], 10, 1, 0.5);
        let out = enc.forward(&g, &f, &[c1, c2], 0).unwrap().outputs;
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn full_neighbourhood_sampling_is_deterministic() {
        let (g, _) = setup();
        let enc = SageEncoder::new(3, &[4], 100, 0, 0.1);
        for v in 0..g.num_nodes() {
            let a = enc.sample_neighbors(&g, v, 1, 0).unwrap();
            let b = enc.sample_neighbors(&g, v, 1, 99).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), g.degree(v));
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (g, f) = setup();
        let base = SageEncoder::new(3, &[4, 2], 2, 7, 0.5);
        let targets = [0usize, 2, 3, 0];
        let upstream: Vec<Vec<f64>> = (0..targets.len())
            .map(|i| vec![0.3 + i as f64, -0.7 * i as f64 + 0.1])
            .collect();
        let loss = |enc: &SageEncoder| -> f64 {
            let out = enc.forward(&g, &f, &targets, 3).unwrap().outputs;
            out.iter()
                .zip(&upstream)
                .map(|(o, u)| crate::nn::dot(o, u))
                .sum()
        };
        let mut enc = base.clone();
        let pass = enc.forward(&g, &f, &targets, 3).unwrap();
        enc.backward(&pass, &upstream);
        for (pi, p) in enc.params().iter().enumerate() {
            let err = max_relative_error(
                |x| {
                    let mut e = base.clone();
                    e.params_mut()[pi].values.copy_from_slice(x);
                    loss(&e)
                },
                &p.values,
                &p.grad,
                STEP,
            );
            assert!(err < 1e-4, "{} rel err {err}", p.name);
        }
    }
}
