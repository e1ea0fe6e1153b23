//! The query-word-candidate heterogeneous graph.
//!
//! Node ids are dense: queries first, then candidates, then words (in
//! vocabulary order). Every edge joins a document node to a word node and
//! carries the word's count in that document.

use crate::corpus::{Corpus, Role};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Query,
    Candidate,
    Word,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HetGraph {
    num_queries: usize,
    num_candidates: usize,
    num_words: usize,
    /// Sorted by neighbour id.
    adj: Vec<Vec<(u32, f64)>>,
    names: Vec<String>,
}

pub fn build_graph(corpus: &Corpus) -> HetGraph {
    let nq = corpus.num_queries();
    let nc = corpus.num_candidates();
    let nw = corpus.vocab().len();
    let word_base = nq + nc;
    let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nq + nc + nw];
    for (doc_node, doc) in corpus
        .queries()
        .iter()
        .chain(corpus.candidates())
        .enumerate()
    {
        let mut counts: Vec<(u32, f64)> = Vec::new();
        let mut toks = doc.tokens.clone();
        toks.sort_unstable();
        for t in toks {
            let w = (word_base + t as usize) as u32;
            match counts.last_mut() {
                Some((last, c)) if *last == w => *c += 1.0,
                _ => counts.push((w, 1.0)),
            }
        }
        for &(w, c) in &counts {
            adj[w as usize].push((doc_node as u32, c));
        }
        adj[doc_node] = counts;
    }
    // word lists were filled in ascending doc order; already sorted
    let names = corpus
        .queries()
        .iter()
        .map(|d| format!("q:{}", d.id))
        .chain(corpus.candidates().iter().map(|d| format!("c:{}", d.id)))
        .chain(corpus.vocab().words().iter().map(|w| format!("w:{w}")))
        .collect();
    HetGraph {
        num_queries: nq,
        num_candidates: nc,
        num_words: nw,
        adj,
        names,
    }
}

impl HetGraph {
    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn num_queries(&self) -> usize {
        self.num_queries
    }

    pub fn num_candidates(&self) -> usize {
        self.num_candidates
    }

    pub fn num_words(&self) -> usize {
        self.num_words
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        if node < self.num_queries {
            NodeKind::Query
        } else if node < self.num_queries + self.num_candidates {
            NodeKind::Candidate
        } else {
            NodeKind::Word
        }
    }

    pub fn query_node(&self, pos: usize) -> usize {
        pos
    }

    pub fn candidate_node(&self, pos: usize) -> usize {
        self.num_queries + pos
    }

    pub fn word_node(&self, token: u32) -> usize {
        self.num_queries + self.num_candidates + token as usize
    }

    pub fn doc_node(&self, role: Role, pos: usize) -> usize {
        match role {
            Role::Query => self.query_node(pos),
            Role::Candidate => self.candidate_node(pos),
        }
    }

    /// `(neighbour, weight)` pairs sorted by neighbour id.
    pub fn neighbors(&self, node: usize) -> &[(u32, f64)] {
        &self.adj[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn weighted_degree(&self, node: usize) -> f64 {
        self.adj[node].iter().map(|&(_, w)| w).sum()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_weight(a, b).is_some()
    }

    pub fn edge_weight(&self, a: usize, b: usize) -> Option<f64> {
        let list = &self.adj[a];
        list.binary_search_by_key(&(b as u32), |&(n, _)| n)
            .ok()
            .map(|i| list[i].1)
    }

    /// Each undirected edge once, as `(doc node, word node, weight)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let docs = self.num_queries + self.num_candidates;
        (0..docs).flat_map(move |d| {
            self.adj[d]
                .iter()
                .map(move |&(w, weight)| (d, w as usize, weight))
        })
    }

    pub fn num_edges(&self) -> usize {
        self.edges().count()
    }

    pub fn name(&self, node: usize) -> &str {
        &self.names[node]
    }

    pub fn ensure_no_isolated(&self) -> Result<()> {
        match (0..self.num_nodes()).find(|&n| self.adj[n].is_empty()) {
            Some(n) => Err(Error::IsolatedNode(self.names[n].clone())),
            None => Ok(()),
        }
    }
}
