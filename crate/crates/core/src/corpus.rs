//! Documents, vocabulary and annotation splits.
//!
//! A [`Corpus`] holds two document populations (queries and candidates)
//! over one shared vocabulary. Token ids are assigned by first occurrence,
//! scanning all queries in input order and then all candidates, so a corpus
//! rebuilt from its persisted documents is identical to the original.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, FORMAT_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Query,
    Candidate,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Query => "query",
            Role::Candidate => "candidate",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the documents JSON-lines file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub role: Role,
    pub text: String,
}

impl RawDocument {
    pub fn new(id: impl Into<String>, role: Role, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            role,
            text: text.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: String,
    pub role: Role,
    pub text: String,
    pub tokens: Vec<u32>,
}

/// Lowercase, split on runs of non-alphanumeric characters and drop tokens
/// shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(word.to_string());
        self.index.insert(word.to_string(), id);
        id
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    queries: Vec<Document>,
    candidates: Vec<Document>,
    vocab: Vocabulary,
    query_df: Vec<u32>,
    candidate_df: Vec<u32>,
    max_query_len: usize,
    max_candidate_len: usize,
    query_index: HashMap<String, usize>,
    candidate_index: HashMap<String, usize>,
}

/// Build a corpus, truncating each document to its role's maximum length.
pub fn build_corpus(
    docs: &[RawDocument],
    max_query_len: usize,
    max_candidate_len: usize,
) -> Result<Corpus> {
    if max_query_len == 0 || max_candidate_len == 0 {
        return Err(Error::invalid("maximum document lengths must be positive"));
    }
    let mut vocab = Vocabulary::default();
    let mut queries = Vec::new();
    let mut candidates = Vec::new();
    let mut query_index = HashMap::new();
    let mut candidate_index = HashMap::new();

    for role in [Role::Query, Role::Candidate] {
        let (max_len, out, index) = match role {
            Role::Query => (max_query_len, &mut queries, &mut query_index),
            Role::Candidate => (max_candidate_len, &mut candidates, &mut candidate_index),
        };
        for doc in docs.iter().filter(|d| d.role == role) {
            let mut words = tokenize(&doc.text);
            words.truncate(max_len);
            if words.is_empty() {
                return Err(Error::EmptyDocument(doc.id.clone()));
            }
            if index.contains_key(&doc.id) {
                return Err(Error::DuplicateDocument {
                    role: role.as_str(),
                    id: doc.id.clone(),
                });
            }
            let tokens = words.iter().map(|w| vocab.intern(w)).collect();
            index.insert(doc.id.clone(), out.len());
            out.push(Document {
                id: doc.id.clone(),
                role,
                text: doc.text.clone(),
                tokens,
            });
        }
    }
    if queries.is_empty() || candidates.is_empty() {
        return Err(Error::invalid(
            "a corpus needs at least one query and one candidate",
        ));
    }

    let query_df = document_frequency(&queries, vocab.len());
    let candidate_df = document_frequency(&candidates, vocab.len());
    Ok(Corpus {
        queries,
        candidates,
        vocab,
        query_df,
        candidate_df,
        max_query_len,
        max_candidate_len,
        query_index,
        candidate_index,
    })
}

fn document_frequency(docs: &[Document], vocab_len: usize) -> Vec<u32> {
    let mut df = vec![0u32; vocab_len];
    for doc in docs {
        let unique: HashSet<u32> = doc.tokens.iter().copied().collect();
        for t in unique {
            df[t as usize] += 1;
        }
    }
    df
}

#[derive(Serialize, Deserialize)]
struct PersistedCorpus {
    format_version: u32,
    max_query_len: usize,
    max_candidate_len: usize,
    documents: Vec<RawDocument>,
}

impl Corpus {
    pub fn queries(&self) -> &[Document] {
        &self.queries
    }

    pub fn candidates(&self) -> &[Document] {
        &self.candidates
    }

    pub fn docs(&self, role: Role) -> &[Document] {
        match role {
            Role::Query => &self.queries,
            Role::Candidate => &self.candidates,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn max_len(&self, role: Role) -> usize {
        match role {
            Role::Query => self.max_query_len,
            Role::Candidate => self.max_candidate_len,
        }
    }

    /// Number of documents of `role` containing token `id`.
    pub fn df(&self, role: Role, id: u32) -> u32 {
        match role {
            Role::Query => self.query_df[id as usize],
            Role::Candidate => self.candidate_df[id as usize],
        }
    }

    pub fn df_word(&self, role: Role, word: &str) -> u32 {
        self.vocab.id(word).map_or(0, |id| self.df(role, id))
    }

    pub fn avg_len(&self, role: Role) -> f64 {
        let docs = self.docs(role);
        let total: usize = docs.iter().map(|d| d.tokens.len()).sum();
        total as f64 / docs.len() as f64
    }

    pub fn query_pos(&self, id: &str) -> Option<usize> {
        self.query_index.get(id).copied()
    }

    pub fn candidate_pos(&self, id: &str) -> Option<usize> {
        self.candidate_index.get(id).copied()
    }

    pub fn raw_documents(&self) -> Vec<RawDocument> {
        self.queries
            .iter()
            .chain(&self.candidates)
            .map(|d| RawDocument::new(d.id.clone(), d.role, d.text.clone()))
            .collect()
    }

    /// Stable content hash (documents and truncation limits).
    pub fn content_hash(&self) -> String {
        crate::hashing::json_hash(&self.persisted())
    }

    fn persisted(&self) -> PersistedCorpus {
        PersistedCorpus {
            format_version: FORMAT_VERSION,
            max_query_len: self.max_query_len,
            max_candidate_len: self.max_candidate_len,
            documents: self.raw_documents(),
        }
    }

    /// Persist as a JSON container `{format_version, max_query_len,
    /// max_candidate_len, documents}`; tokens and statistics are rebuilt on
    /// load.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(&self.persisted())?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let p: PersistedCorpus = serde_json::from_slice(&bytes)?;
        if p.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "corpus format_version {} is not supported (expected {FORMAT_VERSION})",
                p.format_version
            )));
        }
        build_corpus(&p.documents, p.max_query_len, p.max_candidate_len)
    }
}

pub fn read_documents_jsonl(path: &Path) -> Result<Vec<RawDocument>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1)))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_documents_jsonl(path: &Path, docs: &[RawDocument]) -> Result<()> {
    let mut out = Vec::new();
    for d in docs {
        serde_json::to_writer(&mut out, d)?;
        out.push(b'\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Annotation {
    pub query: String,
    pub candidate: String,
    pub label: u8,
}

impl Annotation {
    pub fn new(query: impl Into<String>, candidate: impl Into<String>, label: u8) -> Self {
        Self {
            query: query.into(),
            candidate: candidate.into(),
            label,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Validation,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationSet {
    pub split: Split,
    pub pairs: Vec<Annotation>,
}

impl AnnotationSet {
    pub fn new(split: Split, pairs: Vec<Annotation>) -> Result<Self> {
        check_unique(&pairs)?;
        Ok(Self { split, pairs })
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Distinct query ids in order of first appearance.
    pub fn queries(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.pairs
            .iter()
            .filter(|a| seen.insert(a.query.as_str()))
            .map(|a| a.query.as_str())
            .collect()
    }

    /// Positive candidate ids per query, in annotation order.
    pub fn positives(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for a in &self.pairs {
            let entry = out.entry(a.query.as_str()).or_default();
            if a.label == 1 {
                entry.push(a.candidate.as_str());
            }
        }
        out
    }

    /// Every id must resolve in the corpus.
    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        for a in &self.pairs {
            if corpus.query_pos(&a.query).is_none() {
                return Err(Error::UnknownId(a.query.clone()));
            }
            if corpus.candidate_pos(&a.candidate).is_none() {
                return Err(Error::UnknownId(a.candidate.clone()));
            }
        }
        Ok(())
    }
}

fn check_unique(pairs: &[Annotation]) -> Result<()> {
    let mut seen = HashSet::new();
    for a in pairs {
        if !seen.insert((a.query.as_str(), a.candidate.as_str())) {
            return Err(Error::invalid(format!(
                "annotation pair ({}, {}) appears twice",
                a.query, a.candidate
            )));
        }
    }
    Ok(())
}

/// Partition annotated queries 50/50 by a seeded shuffle. All pairs of a
/// query land in the same split; with an odd count the validation half is
/// the larger one.
pub fn split_annotations(ann: &[Annotation], seed: u64) -> Result<(AnnotationSet, AnnotationSet)> {
    check_unique(ann)?;
    let mut order: Vec<&str> = Vec::new();
    let mut has_positive: HashMap<&str, bool> = HashMap::new();
    for a in ann {
        let e = has_positive.entry(a.query.as_str()).or_insert_with(|| {
            order.push(a.query.as_str());
            false
        });
        *e |= a.label == 1;
    }
    if order.len() < 2 {
        return Err(Error::invalid(
            "need at least two distinct annotated queries to split",
        ));
    }
    if let Some(q) = order.iter().find(|q| !has_positive[*q]) {
        return Err(Error::invalid(format!(
            "annotated query `{q}` has no positive candidate"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_val = order.len().div_ceil(2);
    let val: HashSet<&str> = order[..n_val].iter().copied().collect();
    let (v, t): (Vec<_>, Vec<_>) = ann
        .iter()
        .cloned()
        .partition(|a| val.contains(a.query.as_str()));
    Ok((
        AnnotationSet {
            split: Split::Validation,
            pairs: v,
        },
        AnnotationSet {
            split: Split::Test,
            pairs: t,
        },
    ))
}

/// Read `query_id<TAB>candidate_id<TAB>label` lines.
pub fn read_annotations_tsv(path: &Path) -> Result<Vec<Annotation>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations_tsv(&text).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_annotations_tsv(text: &str) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!(
                "line {}: expected 3 tab-separated fields, found {}",
                n + 1,
                fields.len()
            )));
        }
        let label = match fields[2].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Format(format!(
                    "line {}: label must be 0 or 1, found `{other}`",
                    n + 1
                )))
            }
        };
        out.push(Annotation::new(fields[0], fields[1], label));
    }
    check_unique(&out)?;
    Ok(out)
}

pub fn write_annotations_tsv(path: &Path, ann: &[Annotation]) -> Result<()> {
    let mut out = Vec::new();
    for a in ann {
        writeln!(out, "{}\t{}\t{}", a.query, a.candidate, a.label).expect("write to vec");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(id: &str, text: &str) -> RawDocument {
        RawDocument::new(id, Role::Query, text)
    }

    fn c(id: &str, text: &str) -> RawDocument {
        RawDocument::new(id, Role::Candidate, text)
    }

    #[test]
    fn tokenize_rules() {
        assert_eq!(
            tokenize("Machine Learning, 101!"),
            vec!["machine", "learning", "101"]
        );
        assert!(tokenize("a b").is_empty());
        assert_eq!(tokenize("SQL sql"), vec!["sql", "sql"]);
    }

    #[test]
    fn vocabulary_counts_distinct_tokens() {
        let docs = vec![
            q("q1", "alpha beta"),
            q("q2", "gamma"),
            c("c1", "delta"),
            c("c2", "epsilon zeta"),
            c("c3", "eta"),
        ];
        let corpus = build_corpus(&docs, 100, 100).unwrap();
        assert_eq!(corpus.vocab().len(), 7);
    }

    #[test]
    fn truncation_keeps_prefix() {
        let text: Vec<String> = (0..200).map(|i| format!("w{i}")).collect();
        let docs = vec![q("q", "only query"), c("c", &text.join(" "))];
        let corpus = build_corpus(&docs, 100, 100).unwrap();
        let cand = &corpus.candidates()[0];
        assert_eq!(cand.tokens.len(), 100);
        assert_eq!(corpus.vocab().word(*cand.tokens.last().unwrap()), "w99");
        assert!(corpus.vocab().id("w100").is_none());
    }

    #[test]
    fn document_frequency_per_role() {
        let docs = vec![
            q("q", "python"),
            c("c1", "python python"),
            c("c2", "java"),
            c("c3", "python rust"),
        ];
        let corpus = build_corpus(&docs, 10, 10).unwrap();
        assert_eq!(corpus.df_word(Role::Candidate, "python"), 2);
        assert_eq!(corpus.df_word(Role::Query, "python"), 1);
        assert!((corpus.avg_len(Role::Candidate) - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_and_duplicate_documents() {
        let err = build_corpus(&[q("q", "a b"), c("c", "ok ok")], 10, 10).unwrap_err();
        assert!(matches!(err, Error::EmptyDocument(id) if id == "q"));
        let err = build_corpus(&[q("q", "xx"), c("c", "yy"), c("c", "zz")], 10, 10).unwrap_err();
        assert!(matches!(err, Error::DuplicateDocument { .. }));
        // the same id may be used once per role
        assert!(build_corpus(&[q("x", "xx"), c("x", "yy")], 10, 10).is_ok());
        assert!(build_corpus(&[q("x", "xx")], 10, 10).is_err());
    }

    #[test]
    fn persistence_roundtrip_is_identical() {
        let docs = vec![
            c("c1", "graph neural nets"),
            q("q1", "neural ranking"),
            c("c2", "ranking functions"),
        ];
        let corpus = build_corpus(&docs, 2, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.json");
        corpus.save(&path).unwrap();
        let loaded = Corpus::load(&path).unwrap();
        assert_eq!(loaded, corpus);
        assert_eq!(loaded.content_hash(), corpus.content_hash());
    }

    fn full_annotations(n_queries: usize) -> Vec<Annotation> {
        (0..n_queries)
            .flat_map(|i| {
                [
                    Annotation::new(format!("q{i}"), "c1", 1),
                    Annotation::new(format!("q{i}"), "c2", 0),
                ]
            })
            .collect()
    }

    #[test]
    fn split_halves_queries() {
        let ann = full_annotations(200);
        let (v, t) = split_annotations(&ann, 3).unwrap();
        assert_eq!(v.queries().len(), 100);
        assert_eq!(t.queries().len(), 100);
        let vq: HashSet<_> = v.queries().into_iter().collect();
        assert!(t.queries().iter().all(|q| !vq.contains(q)));
        assert_eq!(v.pairs.len() + t.pairs.len(), ann.len());

        let (v2, t2) = split_annotations(&ann, 3).unwrap();
        assert_eq!(v, v2);
        assert_eq!(t, t2);

        let (v, t) = split_annotations(&full_annotations(3), 9).unwrap();
        assert_eq!((v.queries().len(), t.queries().len()), (2, 1));
    }

    #[test]
    fn split_requires_positive_per_query() {
        let mut ann = full_annotations(4);
        ann.push(Annotation::new("lonely", "c1", 0));
        assert!(split_annotations(&ann, 0).is_err());
        assert!(split_annotations(&full_annotations(1), 0).is_err());
    }

    #[test]
    fn annotation_tsv_parsing() {
        let ann = parse_annotations_tsv("q1\tc1\t1\nq1\tc2\t0\n\n").unwrap();
        assert_eq!(ann.len(), 2);
        assert!(parse_annotations_tsv("q1\tc1\t2\n").is_err());
        assert!(parse_annotations_tsv("q1 c1 1\n").is_err());
        assert!(parse_annotations_tsv("q1\tc1\t1\nq1\tc1\t0\n").is_err());
    }
}
