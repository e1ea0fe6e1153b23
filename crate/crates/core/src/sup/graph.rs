//! Graph-aggregation ranker: a trainable neighbour-aggregation encoder
//! over the heterogeneous graph, compared by cosine.

use serde::{Deserialize, Serialize};

use super::{pair_loss, pair_loss_grad, SupInputs};
use crate::nn::{cosine_backward, cosine_or_zero, ParamTensor};
use crate::sage::SageEncoder;
use crate::unsup::ScoreMatrix;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub dims: Vec<usize>,
    pub sample_size: usize,
    pub init_scale: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            dims: vec![32, 32],
            sample_size: 10,
            init_scale: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphModel {
    pub encoder: SageEncoder,
}

impl GraphModel {
    pub fn new(p: &GraphParams, input: usize, seed: u64) -> Self {
        let mut encoder = SageEncoder::new(input, &p.dims, p.sample_size, seed, p.init_scale);
        for (l, layer) in encoder.layers.iter_mut().enumerate() {
            layer.weight.name = format!("graph.{l}.w");
            layer.bias.name = format!("graph.{l}.b");
        }
        Self { encoder }
    }

    pub fn score_pair(&self, inputs: &SupInputs, q: usize, c: usize) -> Result<f64> {
        let g = &inputs.graph;
        let pass = self
            .encoder
            .forward(g, &inputs.features, &[g.query_node(q), g.candidate_node(c)], 0)?;
        Ok(cosine_or_zero(&pass.outputs[0], &pass.outputs[1]))
    }

    pub fn score_matrix(&self, name: &str, inputs: &SupInputs) -> Result<ScoreMatrix> {
        let g = &inputs.graph;
        let nq = inputs.corpus.num_queries();
        let nc = inputs.corpus.num_candidates();
        let nodes: Vec<usize> = (0..nq)
            .map(|q| g.query_node(q))
            .chain((0..nc).map(|c| g.candidate_node(c)))
            .collect();
        let out = self.encoder.forward(g, &inputs.features, &nodes, 0)?.outputs;
        ScoreMatrix::from_fn(name, &inputs.corpus, |q, c| Ok(cosine_or_zero(&out[q], &out[nq + c])))
    }

    pub fn accumulate(&mut self, inputs: &SupInputs, pairs: &[(usize, usize)], targets: &[f64], salt: u64) -> Result<f64> {
        let g = &inputs.graph;
        let nodes: Vec<usize> = pairs
            .iter()
            .flat_map(|&(q, c)| [g.query_node(q), g.candidate_node(c)])
            .collect();
        let pass = self.encoder.forward(g, &inputs.features, &nodes, salt)?;
        let mut d_out = Vec::with_capacity(nodes.len());
        let mut loss = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let (u, v) = (&pass.outputs[2 * i], &pass.outputs[2 * i + 1]);
            let r = cosine_or_zero(u, v);
            loss += pair_loss(r, t);
            let (du, dv) = cosine_backward(u, v, pair_loss_grad(r, t));
            d_out.push(du);
            d_out.push(dv);
        }
        self.encoder.backward(&pass, &d_out);
        Ok(loss)
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        self.encoder.params()
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.encoder.params_mut()
    }
}
