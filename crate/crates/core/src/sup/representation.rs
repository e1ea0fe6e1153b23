//! Representation-based ranker: two towers over mean word embeddings,
//! compared by cosine.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{pair_loss, pair_loss_grad, SupInputs};
use crate::nn::{cosine_backward, cosine_or_zero, Activation, Dense, DenseCache, ParamTensor};
use crate::unsup::ScoreMatrix;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationParams {
    pub hidden: usize,
    pub layers: usize,
    /// Share one tower between queries and candidates.
    pub tied: bool,
    pub init_scale: f64,
}

impl Default for RepresentationParams {
    fn default() -> Self {
        Self {
            hidden: 32,
            layers: 2,
            tied: false,
            init_scale: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationModel {
    pub query_tower: Vec<Dense>,
    /// `None` when tied to the query tower.
    pub candidate_tower: Option<Vec<Dense>>,
}

fn tower(prefix: &str, input: usize, p: &RepresentationParams, rng: &mut ChaCha8Rng) -> Vec<Dense> {
    let mut prev = input;
    (0..p.layers)
        .map(|l| {
            let d = Dense::new(&format!("{prefix}.{l}"), prev, p.hidden, Activation::Tanh, p.init_scale, rng);
            prev = p.hidden;
            d
        })
        .collect()
}

fn tower_forward(layers: &[Dense], x: &[f64]) -> Result<(Vec<DenseCache>, Vec<f64>)> {
    let mut caches = Vec::with_capacity(layers.len());
    let mut h = x.to_vec();
    for layer in layers {
        let c = layer.forward(&h)?;
        h = c.output.clone();
        caches.push(c);
    }
    Ok((caches, h))
}

fn tower_backward(layers: &mut [Dense], caches: &[DenseCache], dy: &[f64]) {
    let mut g = dy.to_vec();
    for (layer, cache) in layers.iter_mut().zip(caches).rev() {
        g = layer.backward(cache, &g);
    }
}

impl RepresentationModel {
    pub fn new(p: &RepresentationParams, input: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let query_tower = tower("rep.q", input, p, &mut rng);
        let candidate_tower = (!p.tied).then(|| tower("rep.c", input, p, &mut rng));
        Self {
            query_tower,
            candidate_tower,
        }
    }

    fn cand_tower(&self) -> &[Dense] {
        self.candidate_tower.as_deref().unwrap_or(&self.query_tower)
    }

    pub fn embed_query(&self, inputs: &SupInputs, q: usize) -> Result<Vec<f64>> {
        Ok(tower_forward(&self.query_tower, &inputs.query_means[q])?.1)
    }

    pub fn embed_candidate(&self, inputs: &SupInputs, c: usize) -> Result<Vec<f64>> {
        Ok(tower_forward(self.cand_tower(), &inputs.candidate_means[c])?.1)
    }

    pub fn score_pair(&self, inputs: &SupInputs, q: usize, c: usize) -> Result<f64> {
        Ok(cosine_or_zero(&self.embed_query(inputs, q)?, &self.embed_candidate(inputs, c)?))
    }

    pub fn score_matrix(&self, name: &str, inputs: &SupInputs) -> Result<ScoreMatrix> {
        let qe: Vec<Vec<f64>> = (0..inputs.corpus.num_queries())
            .map(|q| self.embed_query(inputs, q))
            .collect::<Result<_>>()?;
        let ce: Vec<Vec<f64>> = (0..inputs.corpus.num_candidates())
            .map(|c| self.embed_candidate(inputs, c))
            .collect::<Result<_>>()?;
        ScoreMatrix::from_fn(name, &inputs.corpus, |q, c| Ok(cosine_or_zero(&qe[q], &ce[c])))
    }

    pub fn accumulate(&mut self, inputs: &SupInputs, pairs: &[(usize, usize)], targets: &[f64]) -> Result<f64> {
        let mut qs: HashMap<usize, (Vec<DenseCache>, Vec<f64>, Vec<f64>)> = HashMap::new();
        let mut cs: HashMap<usize, (Vec<DenseCache>, Vec<f64>, Vec<f64>)> = HashMap::new();
        let mut q_order = Vec::new();
        let mut c_order = Vec::new();
        for &(q, c) in pairs {
            if !qs.contains_key(&q) {
                let (caches, out) = tower_forward(&self.query_tower, &inputs.query_means[q])?;
                let zero = vec![0.0; out.len()];
                qs.insert(q, (caches, out, zero));
                q_order.push(q);
            }
            if !cs.contains_key(&c) {
                let (caches, out) = tower_forward(self.cand_tower(), &inputs.candidate_means[c])?;
                let zero = vec![0.0; out.len()];
                cs.insert(c, (caches, out, zero));
                c_order.push(c);
            }
        }
        let mut loss = 0.0;
        for (&(q, c), &t) in pairs.iter().zip(targets) {
            let (u, v) = (&qs[&q].1, &cs[&c].1);
            let r = cosine_or_zero(u, v);
            loss += pair_loss(r, t);
            let (du, dv) = cosine_backward(u, v, pair_loss_grad(r, t));
            crate::nn::axpy(1.0, &du, &mut qs.get_mut(&q).unwrap().2);
            crate::nn::axpy(1.0, &dv, &mut cs.get_mut(&c).unwrap().2);
        }
        for q in q_order {
            let (caches, _, g) = &qs[&q];
            tower_backward(&mut self.query_tower, caches, g);
        }
        for c in c_order {
            let (caches, _, g) = &cs[&c];
            match self.candidate_tower.as_mut() {
                Some(t) => tower_backward(t, caches, g),
                None => tower_backward(&mut self.query_tower, caches, g),
            }
        }
        Ok(loss)
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        self.query_tower
            .iter()
            .chain(self.candidate_tower.iter().flatten())
            .flat_map(|d| d.params())
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.query_tower
            .iter_mut()
            .chain(self.candidate_tower.iter_mut().flatten())
            .flat_map(|d| d.params_mut())
            .collect()
    }
}
