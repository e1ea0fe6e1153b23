//! Planted-topic corpus generator.
//!
//! Every document gets one topic. Each token is drawn from that topic's
//! private vocabulary with probability `1 - noise_rate` and from a shared
//! common pool otherwise. Topic vocabularies are disjoint, so the ground
//! truth (same topic = relevant) is known exactly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_corpus, Annotation, Corpus, RawDocument, Role};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_queries: usize,
    pub n_candidates: usize,
    pub n_topics: usize,
    pub vocab_per_topic: usize,
    /// Size of the shared noise pool.
    pub common_vocab: usize,
    pub doc_len: usize,
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_queries: 100,
            n_candidates: 300,
            n_topics: 6,
            vocab_per_topic: 100,
            common_vocab: 40,
            doc_len: 8,
            noise_rate: 0.3,
            seed: 7,
        }
    }
}

pub struct SyntheticData {
    pub corpus: Corpus,
    pub documents: Vec<RawDocument>,
    /// Positive pairs only (label 1); every other pair is irrelevant.
    pub annotations: Vec<Annotation>,
    pub query_topics: Vec<usize>,
    pub candidate_topics: Vec<usize>,
}

pub fn topic_word(topic: usize, j: usize) -> String {
    format!("t{topic}w{j}")
}

pub fn common_word(j: usize) -> String {
    format!("cw{j}")
}

fn assign_topics(n: usize, n_topics: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut topics: Vec<usize> = (0..n).map(|i| i % n_topics).collect();
    topics.shuffle(rng);
    topics
}

pub fn generate_synthetic(p: &SynthParams) -> Result<SyntheticData> {
    if p.n_topics < 2 {
        return Err(Error::invalid("n_topics must be at least 2"));
    }
    if !(0.0..1.0).contains(&p.noise_rate) {
        return Err(Error::invalid("noise_rate must lie in [0, 1)"));
    }
    if (p.doc_len as f64) * (1.0 - p.noise_rate) < 3.0 {
        return Err(Error::invalid(
            "expected topic tokens per document (doc_len * (1 - noise_rate)) is below 3",
        ));
    }
    if p.vocab_per_topic == 0 || (p.noise_rate > 0.0 && p.common_vocab == 0) {
        return Err(Error::invalid("vocabularies must be non-empty"));
    }
    if p.n_queries == 0 || p.n_candidates < p.n_topics {
        return Err(Error::invalid(
            "need at least one query and one candidate per topic",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let query_topics = assign_topics(p.n_queries, p.n_topics, &mut rng);
    let candidate_topics = assign_topics(p.n_candidates, p.n_topics, &mut rng);

    let draw_doc = |topic: usize, rng: &mut ChaCha8Rng| -> String {
        (0..p.doc_len)
            .map(|_| {
                if p.noise_rate > 0.0 && rng.random::<f64>() < p.noise_rate {
                    common_word(rng.random_range(0..p.common_vocab))
                } else {
                    topic_word(topic, rng.random_range(0..p.vocab_per_topic))
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut documents = Vec::with_capacity(p.n_queries + p.n_candidates);
    for (i, &t) in query_topics.iter().enumerate() {
        documents.push(RawDocument::new(
            format!("q{i:04}"),
            Role::Query,
            draw_doc(t, &mut rng),
        ));
    }
    for (i, &t) in candidate_topics.iter().enumerate() {
        documents.push(RawDocument::new(
            format!("c{i:04}"),
            Role::Candidate,
            draw_doc(t, &mut rng),
        ));
    }

    let mut annotations = Vec::new();
    for (qi, &qt) in query_topics.iter().enumerate() {
        for (ci, &ct) in candidate_topics.iter().enumerate() {
            if qt == ct {
                annotations.push(Annotation::new(format!("q{qi:04}"), format!("c{ci:04}"), 1));
            }
        }
    }

    let corpus = build_corpus(&documents, p.doc_len, p.doc_len)?;
    Ok(SyntheticData {
        corpus,
        documents,
        annotations,
        query_topics,
        candidate_topics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small(seed: u64, noise: f64) -> SynthParams {
        SynthParams {
            n_queries: 12,
            n_candidates: 30,
            n_topics: 3,
            vocab_per_topic: 8,
            common_vocab: 8,
            doc_len: 10,
            noise_rate: noise,
            seed,
        }
    }

    #[test]
    fn zero_noise_topics_share_no_tokens() {
        let data = generate_synthetic(&small(1, 0.0)).unwrap();
        let c = &data.corpus;
        let token_sets: Vec<HashSet<u32>> = c
            .candidates()
            .iter()
            .map(|d| d.tokens.iter().copied().collect())
            .collect();
        for i in 0..token_sets.len() {
            for j in 0..token_sets.len() {
                if data.candidate_topics[i] != data.candidate_topics[j] {
                    assert!(token_sets[i].is_disjoint(&token_sets[j]));
                }
            }
        }
    }

    #[test]
    fn positives_match_topic_sizes() {
        let data = generate_synthetic(&small(2, 0.3)).unwrap();
        for (qi, &qt) in data.query_topics.iter().enumerate() {
            let qid = format!("q{qi:04}");
            let n_pos = data.annotations.iter().filter(|a| a.query == qid).count();
            let n_topic = data.candidate_topics.iter().filter(|&&t| t == qt).count();
            assert_eq!(n_pos, n_topic);
        }
    }

    #[test]
    fn seeded_determinism() {
        let a = generate_synthetic(&small(5, 0.3)).unwrap();
        let b = generate_synthetic(&small(5, 0.3)).unwrap();
        assert_eq!(a.documents, b.documents);
        assert_eq!(a.annotations, b.annotations);
        let c = generate_synthetic(&small(6, 0.3)).unwrap();
        assert_ne!(a.candidate_topics, c.candidate_topics);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut p = small(0, 0.3);
        p.n_topics = 1;
        assert!(generate_synthetic(&p).is_err());
        let mut p = small(0, 0.3);
        p.noise_rate = 1.0;
        assert!(generate_synthetic(&p).is_err());
        let mut p = small(0, 0.5);
        p.doc_len = 5; // 2.5 expected topic tokens
        assert!(generate_synthetic(&p).is_err());
    }
}
