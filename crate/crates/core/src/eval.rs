//! Ranking metrics under the 1-positive + 99-negatives protocol.
//!
//! Ranks are 1-based. Candidates are ordered by descending score; equal
//! scores are ordered by ascending candidate id.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotationSet, Corpus};
use crate::unsup::ScoreMatrix;
use crate::{Error, Result};

pub const NEGATIVES_PER_POSITIVE: usize = 99;
pub const CUTOFF: usize = 5;

/// One positive and its sampled negatives for a query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalList {
    pub query: String,
    pub query_pos: usize,
    /// Corpus positions; the positive is first.
    pub candidates: Vec<usize>,
    pub candidate_ids: Vec<String>,
}

impl EvalList {
    pub fn positive(&self) -> &str {
        &self.candidate_ids[0]
    }

    pub fn negatives(&self) -> &[String] {
        &self.candidate_ids[1..]
    }
}

/// One list per (query, positive) pair with `n_negatives` uniform draws
/// from the candidates not annotated positive for that query.
pub fn build_eval_lists(ann: &AnnotationSet, corpus: &Corpus, seed: u64, n_negatives: usize) -> Result<Vec<EvalList>> {
    ann.validate(corpus)?;
    let positives = ann.positives();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lists = Vec::new();
    for query in ann.queries() {
        let pos_ids = &positives[query];
        if pos_ids.is_empty() {
            return Err(Error::invalid(format!("query `{query}` has no positive")));
        }
        let pos_set: HashSet<&str> = pos_ids.iter().copied().collect();
        let eligible: Vec<usize> = (0..corpus.num_candidates())
            .filter(|&c| !pos_set.contains(corpus.candidates()[c].id.as_str()))
            .collect();
        if eligible.len() < n_negatives {
            return Err(Error::invalid(format!(
                "query `{query}` has {} eligible negatives, {n_negatives} needed",
                eligible.len()
            )));
        }
        let query_pos = corpus.query_pos(query).expect("validated");
        for pid in pos_ids {
            let mut candidates = vec![corpus.candidate_pos(pid).expect("validated")];
            let picks = rand::seq::index::sample(&mut rng, eligible.len(), n_negatives);
            candidates.extend(picks.iter().map(|i| eligible[i]));
            let candidate_ids = candidates
                .iter()
                .map(|&c| corpus.candidates()[c].id.clone())
                .collect();
            lists.push(EvalList {
                query: query.to_string(),
                query_pos,
                candidates,
                candidate_ids,
            });
        }
    }
    Ok(lists)
}

/// Rank of `candidate_ids[target]` among all entries.
pub fn rank_of(scores: &[f64], ids: &[String], target: usize) -> Result<usize> {
    if scores.len() != ids.len() || scores.is_empty() {
        return Err(Error::invalid("list is not scored"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("list scores".into()));
    }
    let (ts, tid) = (scores[target], &ids[target]);
    let ahead = scores
        .iter()
        .zip(ids)
        .filter(|&(&s, id)| s > ts || (s == ts && id < tid))
        .count();
    Ok(ahead + 1)
}

pub fn hr_at_k(ranks: &[usize], k: usize) -> f64 {
    mean(ranks.iter().map(|&r| if r <= k { 1.0 } else { 0.0 }))
}

pub fn ndcg_at_k(ranks: &[usize], k: usize) -> f64 {
    mean(ranks.iter().map(|&r| {
        if r <= k {
            1.0 / ((r + 1) as f64).log2()
        } else {
            0.0
        }
    }))
}

pub fn mrr(ranks: &[usize]) -> f64 {
    mean(ranks.iter().map(|&r| 1.0 / r as f64))
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(rename = "hr@5")]
    pub hr5: f64,
    #[serde(rename = "ndcg@5")]
    pub ndcg5: f64,
    pub mrr: f64,
    pub n_lists: usize,
}

impl Metrics {
    pub fn from_ranks(ranks: &[usize]) -> Self {
        Self {
            hr5: hr_at_k(ranks, CUTOFF),
            ndcg5: ndcg_at_k(ranks, CUTOFF),
            mrr: mrr(ranks),
            n_lists: ranks.len(),
        }
    }
}

/// Positive ranks with scores produced per list.
pub fn ranks_with(lists: &[EvalList], mut scorer: impl FnMut(&EvalList) -> Result<Vec<f64>>) -> Result<Vec<usize>> {
    lists
        .iter()
        .map(|l| rank_of(&scorer(l)?, &l.candidate_ids, 0))
        .collect()
}

/// Ranks when every list is scored by looking up a full score matrix.
pub fn ranks_from_matrix(lists: &[EvalList], m: &ScoreMatrix) -> Result<Vec<usize>> {
    ranks_with(lists, |l| {
        Ok(l.candidates.iter().map(|&c| m.get(l.query_pos, c)).collect())
    })
}

pub fn evaluate_matrix(lists: &[EvalList], m: &ScoreMatrix) -> Result<Metrics> {
    Ok(Metrics::from_ranks(&ranks_from_matrix(lists, m)?))
}
