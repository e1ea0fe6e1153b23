//! Unsupervised rankers.
//!
//! Each registered model is pretrained once and reduced to a dense
//! [`ScoreMatrix`] over every (query, candidate) pair.

pub mod bm25;
pub mod embedding;
pub mod line;
pub mod walks;

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binio::{put_f64s, put_str, ByteReader};
use crate::corpus::{AnnotationSet, Corpus};
use crate::graph::{build_graph, HetGraph};
use crate::hashing::{derive_seed, json_hash, sha256_hex};
use crate::nn::{cosine_or_zero, log_sigmoid, sigmoid, Optimizer};
use crate::sage::{NodeFeatures, SageEncoder};
use crate::{Error, Result, FORMAT_VERSION};

pub use bm25::bm25_matrix;
pub use embedding::{doc_vector, train_text_embeddings, EmbeddingTable, SkipGramParams};
pub use line::{Order, ProximityParams};
pub use walks::WalkParams;

/// Relevance scores of one model, row-major `[query][candidate]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    pub model: String,
    pub query_ids: Vec<String>,
    pub candidate_ids: Vec<String>,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(model: impl Into<String>, query_ids: Vec<String>, candidate_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let model = model.into();
        if values.len() != query_ids.len() * candidate_ids.len() {
            return Err(Error::Shape(format!(
                "score matrix `{model}` has {} values for {}x{} pairs",
                values.len(),
                query_ids.len(),
                candidate_ids.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("score matrix `{model}`")));
        }
        Ok(Self {
            model,
            query_ids,
            candidate_ids,
            values,
        })
    }

    /// Build from a per-pair scoring function over the corpus.
    pub fn from_fn(model: impl Into<String>, corpus: &Corpus, mut f: impl FnMut(usize, usize) -> Result<f64>) -> Result<Self> {
        let nq = corpus.num_queries();
        let nc = corpus.num_candidates();
        let mut values = Vec::with_capacity(nq * nc);
        for q in 0..nq {
            for c in 0..nc {
                values.push(f(q, c)?);
            }
        }
        Self::new(
            model,
            corpus.queries().iter().map(|d| d.id.clone()).collect(),
            corpus.candidates().iter().map(|d| d.id.clone()).collect(),
            values,
        )
    }

    pub fn num_queries(&self) -> usize {
        self.query_ids.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.candidate_ids.len()
    }

    pub fn get(&self, q: usize, c: usize) -> f64 {
        self.values[q * self.num_candidates() + c]
    }

    pub fn row(&self, q: usize) -> &[f64] {
        let nc = self.num_candidates();
        &self.values[q * nc..(q + 1) * nc]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn same_shape(&self, other: &ScoreMatrix) -> bool {
        self.query_ids == other.query_ids && self.candidate_ids == other.candidate_ids
    }

    /// Check the matrix lines up with the corpus ids.
    pub fn check_corpus(&self, corpus: &Corpus) -> Result<()> {
        let ok = self.query_ids.len() == corpus.num_queries()
            && self.candidate_ids.len() == corpus.num_candidates()
            && self.query_ids.iter().zip(corpus.queries()).all(|(a, d)| *a == d.id)
            && self.candidate_ids.iter().zip(corpus.candidates()).all(|(a, d)| *a == d.id);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "score matrix `{}` does not match the corpus ids",
                self.model
            )))
        }
    }

    /// CSV: the first row holds candidate ids (after a `query_id` corner
    /// cell), each further row a query id and its scores.
    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        write!(out, "query_id").unwrap();
        for c in &self.candidate_ids {
            write!(out, ",{c}").unwrap();
        }
        writeln!(out).unwrap();
        for (q, qid) in self.query_ids.iter().enumerate() {
            write!(out, "{qid}").unwrap();
            for v in self.row(q) {
                write!(out, ",{v}").unwrap();
            }
            writeln!(out).unwrap();
        }
        String::from_utf8(out).expect("ascii")
    }

    pub fn from_csv(model: impl Into<String>, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty score matrix CSV".into()))?;
        let candidate_ids: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
        let mut query_ids = Vec::new();
        let mut values = Vec::new();
        for (n, line) in lines.enumerate() {
            let mut fields = line.split(',');
            query_ids.push(fields.next().unwrap_or_default().to_string());
            let row: Vec<f64> = fields
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Format(format!("row {}: `{f}`: {e}", n + 2)))
                })
                .collect::<Result<_>>()?;
            if row.len() != candidate_ids.len() {
                return Err(Error::Format(format!(
                    "row {} has {} scores, header lists {} candidates",
                    n + 2,
                    row.len(),
                    candidate_ids.len()
                )));
            }
            values.extend(row);
        }
        Self::new(model, query_ids, candidate_ids, values)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(model: impl Into<String>, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(model, &text)
    }

    /// Uniform(0, 1) scores, a pure-noise scorer.
    pub fn noise(model: impl Into<String>, corpus: &Corpus, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::from_fn(model, corpus, |_, _| Ok(rng.random::<f64>()))
    }

    /// 1 for annotated positives, 0 elsewhere.
    pub fn oracle(model: impl Into<String>, corpus: &Corpus, annotations: &[&AnnotationSet]) -> Result<Self> {
        let nc = corpus.num_candidates();
        let mut values = vec![0.0; corpus.num_queries() * nc];
        for set in annotations {
            for a in set.pairs.iter().filter(|a| a.label == 1) {
                let q = corpus.query_pos(&a.query).ok_or_else(|| Error::UnknownId(a.query.clone()))?;
                let c = corpus
                    .candidate_pos(&a.candidate)
                    .ok_or_else(|| Error::UnknownId(a.candidate.clone()))?;
                values[q * nc + c] = 1.0;
            }
        }
        Self::new(
            model,
            corpus.queries().iter().map(|d| d.id.clone()).collect(),
            corpus.candidates().iter().map(|d| d.id.clone()).collect(),
            values,
        )
    }
}

/// How query and candidate vectors are looked up in an embedding table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingMode {
    /// Mean of the document's word vectors.
    DocMean,
    /// The document's own graph node (`q:<id>` / `c:<id>`).
    Node,
}

/// Cosine of query and candidate vectors; zero-norm pairs score 0.
pub fn score_matrix_from_embeddings(model: &str, table: &EmbeddingTable, corpus: &Corpus, mode: EmbeddingMode) -> Result<ScoreMatrix> {
    let lookup = |role_prefix: &str, doc: &crate::corpus::Document| -> Result<Vec<f64>> {
        match mode {
            EmbeddingMode::DocMean => doc_vector(table, corpus, doc),
            EmbeddingMode::Node => table
                .get(&format!("{role_prefix}:{}", doc.id))
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::UnknownId(format!("{role_prefix}:{}", doc.id))),
        }
    };
    let qv: Vec<Vec<f64>> = corpus.queries().iter().map(|d| lookup("q", d)).collect::<Result<_>>()?;
    let cv: Vec<Vec<f64>> = corpus.candidates().iter().map(|d| lookup("c", d)).collect::<Result<_>>()?;
    ScoreMatrix::from_fn(model, corpus, |q, c| Ok(cosine_or_zero(&qv[q], &cv[c])))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationParams {
    /// Input node features come from skip-gram text embeddings.
    pub features: SkipGramParams,
    pub dims: Vec<usize>,
    pub sample_size: usize,
    pub walk: WalkParams,
    pub window: usize,
    pub negatives: usize,
    pub max_pairs: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
}

impl Default for AggregationParams {
    fn default() -> Self {
        Self {
            features: SkipGramParams {
                epochs: 20,
                ..SkipGramParams::default()
            },
            dims: vec![32, 32],
            sample_size: 10,
            walk: WalkParams {
                walks_per_node: 2,
                walk_length: 10,
                ..WalkParams::default()
            },
            window: 2,
            negatives: 5,
            max_pairs: 8000,
            epochs: 1,
            batch: 64,
            lr: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkEmbeddingParams {
    pub walk: WalkParams,
    pub skipgram: SkipGramParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphMethod {
    Walk,
    BiasedWalk,
    Proximity1,
    Proximity2,
    Aggregation,
}

/// Graph-embedding hyperparameters, one variant per method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum GraphHp {
    Walk(WalkEmbeddingParams),
    BiasedWalk(WalkEmbeddingParams),
    Proximity1(ProximityParams),
    Proximity2(ProximityParams),
    Aggregation(AggregationParams),
}

impl GraphHp {
    pub fn method(&self) -> GraphMethod {
        match self {
            GraphHp::Walk(_) => GraphMethod::Walk,
            GraphHp::BiasedWalk(_) => GraphMethod::BiasedWalk,
            GraphHp::Proximity1(_) => GraphMethod::Proximity1,
            GraphHp::Proximity2(_) => GraphMethod::Proximity2,
            GraphHp::Aggregation(_) => GraphMethod::Aggregation,
        }
    }

    pub fn default_for(method: GraphMethod) -> Self {
        let walk = WalkEmbeddingParams {
            walk: WalkParams::default(),
            skipgram: SkipGramParams {
                epochs: 1,
                ..SkipGramParams::default()
            },
        };
        match method {
            GraphMethod::Walk => GraphHp::Walk(walk),
            GraphMethod::BiasedWalk => GraphHp::BiasedWalk(WalkEmbeddingParams {
                walk: WalkParams {
                    p: 1.0,
                    q: 0.5,
                    ..walk.walk
                },
                ..walk
            }),
            GraphMethod::Proximity1 => GraphHp::Proximity1(ProximityParams::default()),
            GraphMethod::Proximity2 => GraphHp::Proximity2(ProximityParams::default()),
            GraphMethod::Aggregation => GraphHp::Aggregation(AggregationParams::default()),
        }
    }
}

/// Train node embeddings on the graph. Aggregation needs the corpus for its
/// text-derived input features.
pub fn train_graph_embeddings(graph: &HetGraph, corpus: &Corpus, hp: &GraphHp, seed: u64) -> Result<EmbeddingTable> {
    graph.ensure_no_isolated()?;
    let ids: Vec<String> = (0..graph.num_nodes()).map(|v| graph.name(v).to_string()).collect();
    match hp {
        GraphHp::Walk(p) | GraphHp::BiasedWalk(p) => {
            let walk = match hp {
                GraphHp::Walk(_) => WalkParams {
                    p: 1.0,
                    q: 1.0,
                    ..p.walk.clone()
                },
                _ => p.walk.clone(),
            };
            let walks = walks::generate_walks(graph, &walk, derive_seed(seed, "walks"))?;
            let sg = SkipGramParams {
                seed: derive_seed(seed, "skipgram"),
                ..p.skipgram.clone()
            };
            embedding::train_skipgram(&walks, graph.num_nodes(), &sg)?.into_table(ids)
        }
        GraphHp::Proximity1(p) => line::train_proximity(graph, Order::First, p, seed),
        GraphHp::Proximity2(p) => line::train_proximity(graph, Order::Second, p, seed),
        GraphHp::Aggregation(p) => {
            let encoder = train_aggregation(graph, corpus, p, seed)?;
            let feats = aggregation_features(graph, corpus, p, seed)?;
            let out = encoder.encode_all(graph, &feats)?;
            EmbeddingTable::new(encoder.output_dim(), ids, out.concat())
        }
    }
}

fn aggregation_features(graph: &HetGraph, corpus: &Corpus, p: &AggregationParams, seed: u64) -> Result<NodeFeatures> {
    let sg = SkipGramParams {
        seed: derive_seed(seed, "features"),
        ..p.features.clone()
    };
    let table = train_text_embeddings(corpus, &sg)?;
    NodeFeatures::from_text_embeddings(graph, corpus, &table)
}

/// Unsupervised aggregation encoder: walk co-occurrence positives against
/// `degree^0.75` negatives, optimised with Adam.
pub fn train_aggregation(graph: &HetGraph, corpus: &Corpus, p: &AggregationParams, seed: u64) -> Result<SageEncoder> {
    let feats = aggregation_features(graph, corpus, p, seed)?;
    let mut encoder = SageEncoder::new(feats.dim, &p.dims, p.sample_size, derive_seed(seed, "encoder"), 0.1);
    let walks = walks::generate_walks(graph, &p.walk, derive_seed(seed, "walks"))?;
    let mut pairs: Vec<(usize, usize)> = walks
        .iter()
        .flat_map(|w| embedding::window_pairs(w, p.window).collect::<Vec<_>>())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "pairs"));
    rand::seq::SliceRandom::shuffle(pairs.as_mut_slice(), &mut rng);
    pairs.truncate(p.max_pairs);
    let degrees: Vec<f64> = (0..graph.num_nodes()).map(|v| graph.weighted_degree(v)).collect();
    let sampler = embedding::NegativeSampler::from_counts(&degrees);
    let mut opt = Optimizer::adam(p.lr);
    let mut salt = 1u64;
    for _ in 0..p.epochs {
        for batch in pairs.chunks(p.batch.max(1)) {
            let b = batch.len();
            let mut targets = Vec::with_capacity(b * (2 + p.negatives));
            targets.extend(batch.iter().map(|&(u, _)| u));
            targets.extend(batch.iter().map(|&(_, v)| v));
            for _ in 0..b * p.negatives {
                targets.push(sampler.sample(&mut rng));
            }
            let pass = encoder.forward(graph, &feats, &targets, salt)?;
            salt += 1;
            let z = &pass.outputs;
            let mut grads = vec![vec![0.0; encoder.output_dim()]; targets.len()];
            for i in 0..b {
                let (zu, zv) = (&z[i], &z[b + i]);
                // -ln σ(zu·zv): d/dzu = -(1 - σ) zv
                let g = -(1.0 - sigmoid(crate::nn::dot(zu, zv))) / b as f64;
                crate::nn::axpy(g, zv, &mut grads[i]);
                crate::nn::axpy(g, zu, &mut grads[b + i]);
                for k in 0..p.negatives {
                    let ni = 2 * b + i * p.negatives + k;
                    let zn = &z[ni];
                    // -ln σ(-zu·zn): d/dzu = σ(zu·zn) zn
                    let g = sigmoid(crate::nn::dot(zu, zn)) / b as f64;
                    crate::nn::axpy(g, zn, &mut grads[i]);
                    crate::nn::axpy(g, zu, &mut grads[ni]);
                }
            }
            encoder.backward(&pass, &grads);
            opt.step(&mut encoder.params_mut())?;
        }
    }
    Ok(encoder)
}

/// Mean aggregation loss on fixed examples `(u, v, negatives)`.
pub fn aggregation_loss(encoder: &SageEncoder, graph: &HetGraph, feats: &NodeFeatures, examples: &[(usize, usize, Vec<usize>)]) -> Result<f64> {
    let mut total = 0.0;
    for (u, v, negs) in examples {
        let mut targets = vec![*u, *v];
        targets.extend(negs);
        let z = encoder.forward(graph, feats, &targets, 0)?.outputs;
        total -= log_sigmoid(crate::nn::dot(&z[0], &z[1]));
        for zn in &z[2..] {
            total -= log_sigmoid(-crate::nn::dot(&z[0], zn));
        }
    }
    Ok(total / examples.len().max(1) as f64)
}

/// One entry of the unsupervised registry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UnsupKind {
    Bm25 { k1: f64, b: f64 },
    TextEmbedding(SkipGramParams),
    Graph(GraphHp),
    /// Uniform random scores; a deliberately useless scorer.
    Noise,
    /// Scores supplied from a CSV file.
    External { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnsupModelSpec {
    pub name: String,
    pub kind: UnsupKind,
}

/// Ordered list of unsupervised models; the order defines step-1 indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnsupModelRegistry {
    models: Vec<UnsupModelSpec>,
}

/// Names of the built-in unsupervised models, in registry order.
pub const BUILTIN_UNSUP: [&str; 7] = [
    "bm25",
    "word2vec",
    "deepwalk",
    "node2vec",
    "line1",
    "line2",
    "graphsage",
];

impl UnsupModelRegistry {
    pub fn new(models: Vec<UnsupModelSpec>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::invalid("unsupervised registry is empty"));
        }
        let mut seen = std::collections::HashSet::new();
        for m in &models {
            if !seen.insert(m.name.as_str()) {
                return Err(Error::invalid(format!("duplicate model name `{}`", m.name)));
            }
        }
        Ok(Self { models })
    }

    /// Default hyperparameters for a built-in name (see [`BUILTIN_UNSUP`])
    /// or `noise`.
    pub fn builtin(name: &str) -> Result<UnsupModelSpec> {
        let kind = match name {
            "bm25" => UnsupKind::Bm25 { k1: 1.2, b: 0.75 },
            "word2vec" => UnsupKind::TextEmbedding(SkipGramParams {
                epochs: 20,
                ..SkipGramParams::default()
            }),
            "deepwalk" => UnsupKind::Graph(GraphHp::default_for(GraphMethod::Walk)),
            "node2vec" => UnsupKind::Graph(GraphHp::default_for(GraphMethod::BiasedWalk)),
            "line1" => UnsupKind::Graph(GraphHp::default_for(GraphMethod::Proximity1)),
            "line2" => UnsupKind::Graph(GraphHp::default_for(GraphMethod::Proximity2)),
            "graphsage" => UnsupKind::Graph(GraphHp::default_for(GraphMethod::Aggregation)),
            "noise" => UnsupKind::Noise,
            other => return Err(Error::Config(format!("unknown unsupervised model `{other}`"))),
        };
        Ok(UnsupModelSpec {
            name: name.to_string(),
            kind,
        })
    }

    pub fn from_names(names: &[&str]) -> Result<Self> {
        Self::new(names.iter().map(|n| Self::builtin(n)).collect::<Result<_>>()?)
    }

    pub fn default_builtin() -> Self {
        Self::from_names(&BUILTIN_UNSUP).expect("built-in names are valid")
    }

    pub fn models(&self) -> &[UnsupModelSpec] {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.models.iter().map(|m| m.name.as_str()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.models.iter().position(|m| m.name == name)
    }
}

impl UnsupModelSpec {
    /// Hash of everything that determines this model's scores besides the
    /// corpus.
    pub fn hp_hash(&self, seed: u64) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        v["seed"] = serde_json::json!(seed);
        if let UnsupKind::External { path } = &self.kind {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            v["content"] = serde_json::json!(sha256_hex(&bytes));
        }
        Ok(json_hash(&v))
    }

    /// Pretrain the model and emit its score matrix.
    pub fn compute(&self, corpus: &Corpus, graph: &HetGraph, seed: u64) -> Result<ScoreMatrix> {
        let run = || -> Result<ScoreMatrix> {
            match &self.kind {
                UnsupKind::Bm25 { k1, b } => bm25_matrix(&self.name, corpus, *k1, *b),
                UnsupKind::TextEmbedding(p) => {
                    let p = SkipGramParams {
                        seed,
                        ..p.clone()
                    };
                    let table = train_text_embeddings(corpus, &p)?;
                    score_matrix_from_embeddings(&self.name, &table, corpus, EmbeddingMode::DocMean)
                }
                UnsupKind::Graph(hp) => {
                    let table = train_graph_embeddings(graph, corpus, hp, seed)?;
                    score_matrix_from_embeddings(&self.name, &table, corpus, EmbeddingMode::Node)
                }
                UnsupKind::Noise => ScoreMatrix::noise(&self.name, corpus, seed),
                UnsupKind::External { path } => {
                    let m = ScoreMatrix::load_csv(&self.name, path)?;
                    m.check_corpus(corpus)?;
                    Ok(m)
                }
            }
        };
        run().map_err(|e| Error::Model {
            model: self.name.clone(),
            source: Box::new(e),
        })
    }
}

/// Convenience: build the graph and compute one model.
pub fn compute_model(spec: &UnsupModelSpec, corpus: &Corpus, seed: u64) -> Result<ScoreMatrix> {
    spec.compute(corpus, &build_graph(corpus), seed)
}

const CACHE_MAGIC: &[u8; 8] = b"AWKSCOR\0";

/// Binary score cache keyed by (model name, corpus hash, hyperparameter hash).
///
/// Layout (little-endian): magic `AWKSCOR\0`, u32 format_version, then
/// length-prefixed (u32) UTF-8 strings model/corpus_hash/hp_hash, u32 query
/// count, u32 candidate count, length-prefixed ids, and the f64 scores
/// row-major.
pub struct ScoreCache {
    dir: PathBuf,
}

impl ScoreCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path(&self, model: &str, corpus_hash: &str, hp_hash: &str) -> PathBuf {
        let key = sha256_hex(format!("{model}\n{corpus_hash}\n{hp_hash}").as_bytes());
        self.dir.join(format!("{model}-{}.bin", &key[..16]))
    }

    pub fn load(&self, model: &str, corpus_hash: &str, hp_hash: &str) -> Result<Option<ScoreMatrix>> {
        let path = self.path(model, corpus_hash, hp_hash);
        if !path.exists() {
            return Ok(None);
        }
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let (keys, m) = decode_scores(&bytes)?;
        if keys != [model, corpus_hash, hp_hash] {
            return Ok(None);
        }
        Ok(Some(m))
    }

    pub fn store(&self, m: &ScoreMatrix, corpus_hash: &str, hp_hash: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path(&m.model, corpus_hash, hp_hash);
        std::fs::write(&path, encode_scores(m, corpus_hash, hp_hash)).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

fn encode_scores(m: &ScoreMatrix, corpus_hash: &str, hp_hash: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + m.values.len() * 8);
    out.extend(CACHE_MAGIC);
    out.extend(FORMAT_VERSION.to_le_bytes());
    put_str(&mut out, &m.model);
    put_str(&mut out, corpus_hash);
    put_str(&mut out, hp_hash);
    out.extend((m.num_queries() as u32).to_le_bytes());
    out.extend((m.num_candidates() as u32).to_le_bytes());
    for id in m.query_ids.iter().chain(&m.candidate_ids) {
        put_str(&mut out, id);
    }
    put_f64s(&mut out, &m.values);
    out
}

fn decode_scores(buf: &[u8]) -> Result<([String; 3], ScoreMatrix)> {
    let mut r = ByteReader::new(buf, "score cache");
    if r.take(8)? != CACHE_MAGIC {
        return Err(Error::Format("not a score cache file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("score cache format_version {version}")));
    }
    let model = r.string()?;
    let corpus_hash = r.string()?;
    let hp_hash = r.string()?;
    let nq = r.u32()? as usize;
    let nc = r.u32()? as usize;
    let query_ids = (0..nq).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    let candidate_ids = (0..nc).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    let values = r.f64s(nq * nc)?;
    r.finish()?;
    let m = ScoreMatrix::new(model.clone(), query_ids, candidate_ids, values)?;
    Ok(([model, corpus_hash, hp_hash], m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, RawDocument, Role};

    fn corpus() -> Corpus {
        build_corpus(
            &[
                RawDocument::new("q1", Role::Query, "aa bb"),
                RawDocument::new("q2", Role::Query, "cc"),
                RawDocument::new("c1", Role::Candidate, "aa"),
                RawDocument::new("c2", Role::Candidate, "bb cc"),
                RawDocument::new("c3", Role::Candidate, "dd"),
            ],
            10,
            10,
        )
        .unwrap()
    }

    fn table(rows: &[(&str, Vec<f64>)]) -> EmbeddingTable {
        EmbeddingTable::new(
            rows[0].1.len(),
            rows.iter().map(|(id, _)| id.to_string()).collect(),
            rows.iter().flat_map(|(_, v)| v.clone()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn cosine_matrix_from_node_vectors() {
        let c = corpus();
        let t = table(&[
            ("q:q1", vec![1.0, 0.0]),
            ("q:q2", vec![0.0, 0.0]),
            ("c:c1", vec![3.0, 0.0]),
            ("c:c2", vec![0.0, 1.0]),
            ("c:c3", vec![-1.0, 0.0]),
        ]);
        let m = score_matrix_from_embeddings("m", &t, &c, EmbeddingMode::Node).unwrap();
        assert!((m.get(0, 0) - 1.0).abs() < 1e-12); // parallel (scaled)
        assert!(m.get(0, 1).abs() < 1e-12); // orthogonal
        assert!((m.get(0, 2) + 1.0).abs() < 1e-12);
        assert!(m.row(1).iter().all(|&v| v == 0.0)); // zero vector
        assert!(m.values().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn unresolvable_node_is_named() {
        let c = corpus();
        let t = table(&[("q:q1", vec![1.0])]);
        let err = score_matrix_from_embeddings("m", &t, &c, EmbeddingMode::Node).unwrap_err();
        assert!(err.to_string().contains("q:q2"));
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let c = corpus();
        let m = ScoreMatrix::noise("noise", &c, 3).unwrap();
        let back = ScoreMatrix::from_csv("noise", &m.to_csv()).unwrap();
        assert_eq!(back, m);
        assert!(m.to_csv().starts_with("query_id,c1,c2,c3\nq1,"));
    }

    #[test]
    fn binary_cache_roundtrip_and_keying() {
        let c = corpus();
        let dir = tempfile::tempdir().unwrap();
        let cache = ScoreCache::new(dir.path());
        let m = ScoreMatrix::noise("noise", &c, 3).unwrap();
        assert!(cache.load("noise", "h1", "p1").unwrap().is_none());
        cache.store(&m, "h1", "p1").unwrap();
        assert_eq!(cache.load("noise", "h1", "p1").unwrap(), Some(m));
        assert!(cache.load("noise", "h2", "p1").unwrap().is_none());
    }

    #[test]
    fn registry_rejects_duplicates() {
        let spec = UnsupModelRegistry::builtin("bm25").unwrap();
        assert!(UnsupModelRegistry::new(vec![spec.clone(), spec]).is_err());
        assert_eq!(UnsupModelRegistry::default_builtin().len(), 7);
        assert!(UnsupModelRegistry::builtin("bert").is_err());
    }
}
