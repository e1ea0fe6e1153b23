//! Okapi BM25 over candidate documents.

use std::collections::HashMap;

use super::ScoreMatrix;
use crate::corpus::{Corpus, Role};
use crate::{Error, Result};

/// `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))` over candidates.
pub fn idf(n_docs: usize, df: u32) -> f64 {
    let n = n_docs as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Every query token (duplicates included) contributes
/// `idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |c| / avgdl))`.
pub fn bm25_matrix(model: &str, corpus: &Corpus, k1: f64, b: f64) -> Result<ScoreMatrix> {
    let avgdl = corpus.avg_len(Role::Candidate);
    if !(avgdl > 0.0) {
        return Err(Error::invalid("candidates must have positive average length"));
    }
    let n_c = corpus.num_candidates();
    let tfs: Vec<HashMap<u32, f64>> = corpus
        .candidates()
        .iter()
        .map(|d| {
            let mut tf = HashMap::new();
            for &t in &d.tokens {
                *tf.entry(t).or_insert(0.0) += 1.0;
            }
            tf
        })
        .collect();
    let norms: Vec<f64> = corpus
        .candidates()
        .iter()
        .map(|d| k1 * (1.0 - b + b * d.tokens.len() as f64 / avgdl))
        .collect();
    ScoreMatrix::from_fn(model, corpus, |q, c| {
        let mut score = 0.0;
        for &t in &corpus.queries()[q].tokens {
            if let Some(&tf) = tfs[c].get(&t) {
                let w = idf(n_c, corpus.df(Role::Candidate, t));
                score += w * tf * (k1 + 1.0) / (tf + norms[c]);
            }
        }
        Ok(score)
    })
}
