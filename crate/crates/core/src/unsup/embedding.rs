//! Embedding tables and a skip-gram trainer with negative sampling.
//!
//! The same trainer serves word sequences (documents) and node sequences
//! (random walks). Updates follow the classic word2vec recipe: plain SGD on
//! `-ln σ(v_c·u_o) - Σ ln σ(-v_c·u_n)` with a linearly decaying learning rate.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::nn::{dot, log_sigmoid, sigmoid};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * ids.len() {
            return Err(Error::Shape(format!(
                "{} ids of dimension {dim} need {} values, got {}",
                ids.len(),
                dim * ids.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding `{}`", ids[i / dim.max(1)])));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate embedding id `{id}`")));
            }
        }
        Ok(Self {
            dim,
            ids,
            index,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.position(id).map(|i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Unweighted mean of the document's token vectors. Tokens missing from the
/// table are skipped; a document with no known token is an error.
pub fn doc_vector(table: &EmbeddingTable, corpus: &Corpus, doc: &Document) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; table.dim()];
    let mut n = 0usize;
    for &t in &doc.tokens {
        if let Some(v) = table.get(corpus.vocab().word(t)) {
            crate::nn::axpy(1.0, v, &mut sum);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::UnknownId(format!(
            "{} (no token of the document is in the embedding table)",
            doc.id
        )));
    }
    sum.iter_mut().for_each(|v| *v /= n as f64);
    Ok(sum)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkipGramParams {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipGramParams {
    fn default() -> Self {
        Self {
            dim: 32,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 0,
        }
    }
}

/// Cumulative unigram^0.75 distribution for negative draws.
#[derive(Clone, Debug)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    pub fn from_counts(counts: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += c.powf(0.75);
                acc
            })
            .collect();
        Self { cumulative }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty sampler");
        let x = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= x)
            .min(self.cumulative.len() - 1)
    }
}

/// Input ("center") and output ("context") vectors of a skip-gram model.
#[derive(Clone, Debug)]
pub struct SkipGram {
    pub dim: usize,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl SkipGram {
    pub fn new<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Self {
        let input = (0..n * dim)
            .map(|_| rng.random_range(-0.5..0.5) / dim as f64)
            .collect();
        Self {
            dim,
            input,
            output: vec![0.0; n * dim],
        }
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_row(&self, i: usize) -> &[f64] {
        &self.output[i * self.dim..(i + 1) * self.dim]
    }

    /// Mean negative-sampling loss of `(center, context, negatives)` examples.
    pub fn loss(&self, examples: &[(usize, usize, Vec<usize>)]) -> f64 {
        let total: f64 = examples
            .iter()
            .map(|(c, o, negs)| {
                let v = self.input_row(*c);
                -log_sigmoid(dot(v, self.output_row(*o)))
                    - negs
                        .iter()
                        .map(|&n| log_sigmoid(-dot(v, self.output_row(n))))
                        .sum::<f64>()
            })
            .sum();
        total / examples.len().max(1) as f64
    }

    /// One SGD update on a (center, context) pair with the given negatives.
    pub fn update(&mut self, center: usize, context: usize, negatives: &[usize], lr: f64) {
        let d = self.dim;
        let mut grad_center = vec![0.0; d];
        let targets = std::iter::once((context, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
        for (target, label) in targets {
            let v = &self.input[center * d..(center + 1) * d];
            let u = &mut self.output[target * d..(target + 1) * d];
            let g = lr * (label - sigmoid(dot(v, u)));
            for k in 0..d {
                grad_center[k] += g * u[k];
                u[k] += g * v[k];
            }
        }
        for (x, g) in self.input[center * d..(center + 1) * d].iter_mut().zip(&grad_center) {
            *x += g;
        }
    }

    pub fn into_table(self, ids: Vec<String>) -> Result<EmbeddingTable> {
        EmbeddingTable::new(self.dim, ids, self.input)
    }
}

/// `(center, context)` pairs from a sequence using a symmetric window.
pub fn window_pairs(seq: &[u32], window: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..seq.len()).flat_map(move |i| {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(seq.len());
        (lo..hi)
            .filter(move |&j| j != i)
            .map(move |j| (seq[i] as usize, seq[j] as usize))
    })
}

/// Train skip-gram on integer sequences over `n` entities.
pub fn train_skipgram(sequences: &[Vec<u32>], n: usize, p: &SkipGramParams) -> Result<SkipGram> {
    if p.dim == 0 || p.epochs == 0 || p.window == 0 {
        return Err(Error::invalid("skip-gram needs positive dim, window and epochs"));
    }
    let mut counts = vec![0.0; n];
    for s in sequences {
        for &t in s {
            counts[t as usize] += 1.0;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut model = SkipGram::new(n, p.dim, &mut rng);
    let sampler = NegativeSampler::from_counts(&counts);
    let total_pairs: usize = sequences
        .iter()
        .map(|s| window_pairs(s, p.window).count())
        .sum::<usize>()
        * p.epochs;
    let mut seen = 0usize;
    let mut negs = vec![0usize; p.negatives];
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    for _ in 0..p.epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        for &si in &order {
            for (c, o) in window_pairs(&sequences[si], p.window) {
                let lr = p.lr * (1.0 - seen as f64 / total_pairs as f64).max(1e-4);
                for slot in negs.iter_mut() {
                    *slot = sampler.sample(&mut rng);
                }
                model.update(c, o, &negs, lr);
                seen += 1;
            }
        }
    }
    if model.input.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("skip-gram vectors".into()));
    }
    Ok(model)
}

/// Skip-gram over token windows inside each document of the corpus.
pub fn train_text_embeddings(corpus: &Corpus, p: &SkipGramParams) -> Result<EmbeddingTable> {
    let n = corpus.vocab().len();
    if n < p.negatives + 1 {
        return Err(Error::invalid(format!(
            "vocabulary of {n} words is too small for {} negatives",
            p.negatives
        )));
    }
    let sequences: Vec<Vec<u32>> = corpus
        .queries()
        .iter()
        .chain(corpus.candidates())
        .map(|d| {
            if d.tokens.len() < 2 {
                Err(Error::invalid(format!(
                    "document `{}` has fewer than 2 tokens",
                    d.id
                )))
            } else {
                Ok(d.tokens.clone())
            }
        })
        .collect::<Result<_>>()?;
    let model = train_skipgram(&sequences, n, p)?;
    model.into_table(corpus.vocab().words().to_vec())
}
