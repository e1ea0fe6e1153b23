//! Pseudo labels from aggregated unsupervised scores.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::unsup::ScoreMatrix;
use crate::{Error, Result, FORMAT_VERSION};

/// How member matrices are put on a common scale before averaging.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Per-query min-max to [0, 1].
    #[default]
    MinMax,
    /// Average raw scores.
    Raw,
}

/// Min-max scale `row` in place; a constant row becomes all 0.5.
pub fn min_max_in_place(row: &mut [f64]) {
    let (lo, hi) = row
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    for v in row.iter_mut() {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.5 };
    }
}

pub fn normalize_per_query(m: &ScoreMatrix) -> ScoreMatrix {
    let nc = m.num_candidates();
    let mut values = m.values().to_vec();
    if nc > 0 {
        values.chunks_mut(nc).for_each(min_max_in_place);
    }
    ScoreMatrix::new(&m.model, m.query_ids.clone(), m.candidate_ids.clone(), values)
        .expect("min-max keeps shape and finiteness")
}

/// Entrywise mean of the selected matrices.
pub fn aggregate(matrices: &[ScoreMatrix], mask: &[bool], mode: Normalization) -> Result<ScoreMatrix> {
    if mask.len() != matrices.len() {
        return Err(Error::Shape(format!(
            "mask has {} entries for {} matrices",
            mask.len(),
            matrices.len()
        )));
    }
    let selected: Vec<&ScoreMatrix> = matrices
        .iter()
        .zip(mask)
        .filter(|(_, &on)| on)
        .map(|(m, _)| m)
        .collect();
    let Some(first) = selected.first() else {
        return Err(Error::invalid("aggregation mask selects no model"));
    };
    if let Some(bad) = selected.iter().find(|m| !m.same_shape(first)) {
        return Err(Error::Shape(format!(
            "score matrix `{}` does not match `{}`",
            bad.model, first.model
        )));
    }
    let mut sum = vec![0.0; first.values().len()];
    for m in &selected {
        let normalized;
        let values = match mode {
            Normalization::MinMax => {
                normalized = normalize_per_query(m);
                normalized.values()
            }
            Normalization::Raw => m.values(),
        };
        for (s, v) in sum.iter_mut().zip(values) {
            *s += v;
        }
    }
    let n = selected.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    let name = selected.iter().map(|m| m.model.as_str()).collect::<Vec<_>>().join("+");
    ScoreMatrix::new(name, first.query_ids.clone(), first.candidate_ids.clone(), sum)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryLabels {
    pub query: usize,
    /// Candidate positions, best first.
    pub positives: Vec<usize>,
    /// Candidate positions in ascending order.
    pub negatives: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabelSet {
    pub k: usize,
    pub query_ids: Vec<String>,
    pub candidate_ids: Vec<String>,
    pub labels: Vec<QueryLabels>,
}

/// Candidate positions ordered by descending score, ties by ascending id.
pub fn ranked_candidates(row: &[f64], ids: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then_with(|| ids[a].cmp(&ids[b])));
    order
}

pub fn top_k_labels(agg: &ScoreMatrix, k: usize) -> Result<PseudoLabelSet> {
    let nc = agg.num_candidates();
    if k == 0 || k >= nc {
        return Err(Error::invalid(format!(
            "k = {k} is outside 1..{nc} (candidate count)"
        )));
    }
    let labels = (0..agg.num_queries())
        .map(|q| {
            let order = ranked_candidates(agg.row(q), &agg.candidate_ids);
            let positives = order[..k].to_vec();
            let mut negatives = order[k..].to_vec();
            negatives.sort_unstable();
            QueryLabels {
                query: q,
                positives,
                negatives,
            }
        })
        .collect();
    Ok(PseudoLabelSet {
        k,
        query_ids: agg.query_ids.clone(),
        candidate_ids: agg.candidate_ids.clone(),
        labels,
    })
}

#[derive(Serialize, Deserialize)]
struct LabelLine<'a> {
    format_version: u32,
    query_id: &'a str,
    positives: Vec<&'a str>,
    k: usize,
}

impl PseudoLabelSet {
    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        for l in &self.labels {
            let line = LabelLine {
                format_version: FORMAT_VERSION,
                query_id: &self.query_ids[l.query],
                positives: l.positives.iter().map(|&c| self.candidate_ids[c].as_str()).collect(),
                k: self.k,
            };
            serde_json::to_writer(&mut out, &line).expect("serializable");
            out.push(b'\n');
        }
        String::from_utf8(out).expect("utf-8")
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// `(query, positive, negative)` corpus positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub query: usize,
    pub positive: usize,
    pub negative: usize,
}

pub fn sample_training_pairs(labels: &PseudoLabelSet, n_neg_per_pos: usize, seed: u64) -> Result<Vec<Triple>> {
    if n_neg_per_pos == 0 {
        return Err(Error::invalid("n_neg_per_pos must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(labels.labels.len() * labels.k * n_neg_per_pos);
    for l in &labels.labels {
        if l.negatives.is_empty() {
            return Err(Error::invalid(format!(
                "query `{}` has an empty negative pool",
                labels.query_ids[l.query]
            )));
        }
        for &p in &l.positives {
            for _ in 0..n_neg_per_pos {
                let negative = l.negatives[rng.random_range(0..l.negatives.len())];
                out.push(Triple {
                    query: l.query,
                    positive: p,
                    negative,
                });
            }
        }
    }
    Ok(out)
}
