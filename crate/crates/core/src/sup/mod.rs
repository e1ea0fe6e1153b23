//! Supervised rankers trained on pseudo labels.
//!
//! All three rankers read frozen inputs (skip-gram word vectors, the
//! heterogeneous graph and its node features) from a shared [`SupInputs`]
//! and learn only their own parameters.

pub mod graph;
pub mod interaction;
pub mod representation;

use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::eval::{rank_of, EvalList};
use crate::graph::{build_graph, HetGraph};
use crate::hashing::derive_seed;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::{log_sigmoid, sigmoid, KernelBank, Optimizer, ParamTensor};
use crate::pseudo::{min_max_in_place, Triple};
use crate::sage::NodeFeatures;
use crate::unsup::{doc_vector, EmbeddingTable, ScoreMatrix};
use crate::{Error, Result};

pub use graph::{GraphModel, GraphParams};
pub use interaction::{InteractionModel, InteractionParams};
pub use representation::{RepresentationModel, RepresentationParams};

/// Frozen inputs shared by every supervised model of a run.
pub struct SupInputs {
    pub corpus: Corpus,
    pub graph: HetGraph,
    /// Indexed by token id; zero for words missing from the table.
    pub word_vectors: Vec<Vec<f64>>,
    pub features: NodeFeatures,
    pub query_means: Vec<Vec<f64>>,
    pub candidate_means: Vec<Vec<f64>>,
    kernel_features: Mutex<Vec<(KernelBank, Arc<Vec<f64>>)>>,
}

impl SupInputs {
    pub fn new(corpus: Corpus, table: &EmbeddingTable) -> Result<Self> {
        let graph = build_graph(&corpus);
        let word_vectors = corpus
            .vocab()
            .words()
            .iter()
            .map(|w| table.get(w).map_or_else(|| vec![0.0; table.dim()], <[f64]>::to_vec))
            .collect();
        let features = NodeFeatures::from_text_embeddings(&graph, &corpus, table)?;
        let query_means = corpus
            .queries()
            .iter()
            .map(|d| doc_vector(table, &corpus, d))
            .collect::<Result<_>>()?;
        let candidate_means = corpus
            .candidates()
            .iter()
            .map(|d| doc_vector(table, &corpus, d))
            .collect::<Result<_>>()?;
        Ok(Self {
            corpus,
            graph,
            word_vectors,
            features,
            query_means,
            candidate_means,
            kernel_features: Mutex::new(Vec::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.features.dim
    }

    pub fn query_vectors(&self, q: usize) -> Vec<&[f64]> {
        self.corpus.queries()[q]
            .tokens
            .iter()
            .map(|&t| self.word_vectors[t as usize].as_slice())
            .collect()
    }

    pub fn candidate_vectors(&self, c: usize) -> Vec<&[f64]> {
        self.corpus.candidates()[c]
            .tokens
            .iter()
            .map(|&t| self.word_vectors[t as usize].as_slice())
            .collect()
    }

    /// Pooled match features for every pair, row-major `[q][c][kernel]`.
    /// The word vectors are frozen, so each bank is computed once.
    pub fn kernel_features(&self, bank: &KernelBank) -> Result<Arc<Vec<f64>>> {
        let mut cache = self.kernel_features.lock().expect("kernel cache poisoned");
        if let Some((_, f)) = cache.iter().find(|(b, _)| b == bank) {
            return Ok(Arc::clone(f));
        }
        let nq = self.corpus.num_queries();
        let nc = self.corpus.num_candidates();
        let h = bank.len();
        let mut out = Vec::with_capacity(nq * nc * h);
        let cand: Vec<Vec<&[f64]>> = (0..nc).map(|c| self.candidate_vectors(c)).collect();
        for q in 0..nq {
            let qv = self.query_vectors(q);
            for cv in &cand {
                out.extend(interaction::match_features(&qv, cv, bank)?);
            }
        }
        let f = Arc::new(out);
        cache.push((bank.clone(), Arc::clone(&f)));
        Ok(f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SupKind {
    Representation(RepresentationParams),
    Interaction(InteractionParams),
    Graph(GraphParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupModelSpec {
    pub name: String,
    pub kind: SupKind,
}

/// Names of the built-in supervised models, in registry order.
pub const BUILTIN_SUP: [&str; 3] = ["representation", "interaction", "graph"];

/// Ordered list of supervised models; the order defines step-3 indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupModelRegistry {
    models: Vec<SupModelSpec>,
}

impl SupModelRegistry {
    pub fn new(models: Vec<SupModelSpec>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::invalid("supervised registry is empty"));
        }
        let mut seen = std::collections::HashSet::new();
        for m in &models {
            if !seen.insert(m.name.as_str()) {
                return Err(Error::invalid(format!("duplicate model name `{}`", m.name)));
            }
        }
        Ok(Self { models })
    }

    pub fn builtin(name: &str) -> Result<SupModelSpec> {
        let kind = match name {
            "representation" => SupKind::Representation(RepresentationParams::default()),
            "interaction" => SupKind::Interaction(InteractionParams::default()),
            "graph" => SupKind::Graph(GraphParams::default()),
            other => return Err(Error::Config(format!("unknown supervised model `{other}`"))),
        };
        Ok(SupModelSpec {
            name: name.to_string(),
            kind,
        })
    }

    pub fn from_names(names: &[&str]) -> Result<Self> {
        Self::new(names.iter().map(|n| Self::builtin(n)).collect::<Result<_>>()?)
    }

    pub fn default_builtin() -> Self {
        Self::from_names(&BUILTIN_SUP).expect("built-in names are valid")
    }

    pub fn models(&self) -> &[SupModelSpec] {
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
}

/// A trained or freshly initialized supervised ranker.
#[derive(Clone, Debug, PartialEq)]
pub enum SupModel {
    Representation(RepresentationModel),
    Interaction(InteractionModel),
    Graph(GraphModel),
}

impl SupModel {
    pub fn init(spec: &SupModelSpec, inputs: &SupInputs, seed: u64) -> Result<Self> {
        Ok(match &spec.kind {
            SupKind::Representation(p) => Self::Representation(RepresentationModel::new(p, inputs.dim(), seed)),
            SupKind::Interaction(p) => Self::Interaction(InteractionModel::new(p, seed)?),
            SupKind::Graph(p) => Self::Graph(GraphModel::new(p, inputs.dim(), seed)),
        })
    }

    pub fn score_pair(&self, inputs: &SupInputs, q: usize, c: usize) -> Result<f64> {
        match self {
            Self::Representation(m) => m.score_pair(inputs, q, c),
            Self::Interaction(m) => m.score_pair(inputs, q, c),
            Self::Graph(m) => m.score_pair(inputs, q, c),
        }
    }

    /// Scores for every (query, candidate) pair of the corpus.
    pub fn score_matrix(&self, name: &str, inputs: &SupInputs) -> Result<ScoreMatrix> {
        match self {
            Self::Representation(m) => m.score_matrix(name, inputs),
            Self::Interaction(m) => m.score_matrix(name, inputs),
            Self::Graph(m) => m.score_matrix(name, inputs),
        }
    }

    /// Accumulate gradients of `-L` over labelled pairs and return its value.
    pub fn accumulate(&mut self, inputs: &SupInputs, pairs: &[(usize, usize)], targets: &[f64], salt: u64) -> Result<f64> {
        match self {
            Self::Representation(m) => m.accumulate(inputs, pairs, targets),
            Self::Interaction(m) => m.accumulate(inputs, pairs, targets),
            Self::Graph(m) => m.accumulate(inputs, pairs, targets, salt),
        }
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        match self {
            Self::Representation(m) => m.params(),
            Self::Interaction(m) => m.params(),
            Self::Graph(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        match self {
            Self::Representation(m) => m.params_mut(),
            Self::Interaction(m) => m.params_mut(),
            Self::Graph(m) => m.params_mut(),
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        self.params().iter().try_for_each(|p| p.check_finite())
    }

    /// `seed` must be the one passed to [`Self::init`]; the graph model's
    /// neighbour sampling depends on it.
    pub fn to_checkpoint(&self, spec: &SupModelSpec, seed: u64, config_hash: &str) -> Result<Checkpoint> {
        Ok(Checkpoint {
            config_hash: config_hash.to_string(),
            metadata: serde_json::to_string(&CheckpointMeta { spec: spec.clone(), seed })?,
            tensors: self.params().into_iter().cloned().collect(),
            optimizer: None,
        })
    }

    /// Rebuild a model from a checkpoint written by [`Self::to_checkpoint`].
    pub fn from_checkpoint(ckpt: &Checkpoint, inputs: &SupInputs) -> Result<(SupModelSpec, Self)> {
        let CheckpointMeta { spec, seed } = serde_json::from_str(&ckpt.metadata)?;
        let mut model = Self::init(&spec, inputs, seed)?;
        for p in model.params_mut() {
            let saved = ckpt.tensor(&p.name)?;
            if saved.shape != p.shape {
                return Err(Error::Shape(format!(
                    "checkpoint tensor `{}` has shape {:?}, expected {:?}",
                    p.name, saved.shape, p.shape
                )));
            }
            p.values.clone_from(&saved.values);
        }
        model.check_finite()?;
        Ok((spec, model))
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    spec: SupModelSpec,
    seed: u64,
}

/// `-L` for one pair: `-ln σ(r)` for a positive, `-ln(1 - σ(r))` otherwise.
pub fn pair_loss(r: f64, target: f64) -> f64 {
    -(target * log_sigmoid(r) + (1.0 - target) * log_sigmoid(-r))
}

/// `d(-L)/dr`.
pub fn pair_loss_grad(r: f64, target: f64) -> f64 {
    sigmoid(r) - target
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Triples visited per epoch; `None` for a full pass.
    pub max_triples_per_epoch: Option<usize>,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            epochs: 5,
            lr: 0.01,
            batch_size: 32,
            seed: 0,
            max_triples_per_epoch: None,
        }
    }
}

fn expand(batch: &[Triple]) -> (Vec<(usize, usize)>, Vec<f64>) {
    let mut pairs = Vec::with_capacity(2 * batch.len());
    let mut targets = Vec::with_capacity(2 * batch.len());
    for t in batch {
        pairs.push((t.query, t.positive));
        targets.push(1.0);
        pairs.push((t.query, t.negative));
        targets.push(0.0);
    }
    (pairs, targets)
}

/// Mean `-L` per triple, without touching gradients.
pub fn objective(model: &SupModel, inputs: &SupInputs, triples: &[Triple]) -> Result<f64> {
    if triples.is_empty() {
        return Err(Error::invalid("empty triple set"));
    }
    let mut total = 0.0;
    for t in triples {
        total += pair_loss(model.score_pair(inputs, t.query, t.positive)?, 1.0);
        total += pair_loss(model.score_pair(inputs, t.query, t.negative)?, 0.0);
    }
    Ok(total / triples.len() as f64)
}

/// One epoch of shuffled minibatch Adam; returns mean `-L` per triple.
fn run_epoch(model: &mut SupModel, inputs: &SupInputs, triples: &[Triple], p: &TrainParams, opt: &mut Optimizer, epoch: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(p.seed, &format!("epoch{epoch}")));
    let mut order: Vec<usize> = (0..triples.len()).collect();
    order.shuffle(&mut rng);
    if let Some(cap) = p.max_triples_per_epoch {
        order.truncate(cap.max(1));
    }
    let mut total = 0.0;
    for (b, chunk) in order.chunks(p.batch_size.max(1)).enumerate() {
        let batch: Vec<Triple> = chunk.iter().map(|&i| triples[i]).collect();
        let (pairs, targets) = expand(&batch);
        let salt = derive_seed(p.seed, &format!("batch{epoch}.{b}"));
        let loss = model.accumulate(inputs, &pairs, &targets, salt)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss at epoch {epoch}, batch {b}"
            )));
        }
        total += loss;
        opt.step(&mut model.params_mut())?;
    }
    Ok(total / order.len() as f64)
}

/// Train on a triple stream; returns the per-epoch mean `-L` per triple.
pub fn train_supervised(model: &mut SupModel, inputs: &SupInputs, triples: &[Triple], p: &TrainParams) -> Result<Vec<f64>> {
    if triples.is_empty() {
        return Err(Error::invalid("empty training stream"));
    }
    let mut opt = Optimizer::adam(p.lr);
    (0..p.epochs)
        .map(|e| run_epoch(model, inputs, triples, p, &mut opt, e))
        .collect()
}

/// Train and keep the parameters of the epoch with the best `validate`
/// score; stop after `patience` epochs without improvement.
pub fn train_with_early_stopping(
    model: &mut SupModel,
    inputs: &SupInputs,
    triples: &[Triple],
    p: &TrainParams,
    patience: usize,
    mut validate: impl FnMut(&SupModel) -> Result<f64>,
) -> Result<Vec<f64>> {
    if triples.is_empty() {
        return Err(Error::invalid("empty training stream"));
    }
    let mut opt = Optimizer::adam(p.lr);
    let mut best = (validate(model)?, model.clone());
    let mut stale = 0;
    let mut curve = Vec::new();
    for e in 0..p.epochs {
        curve.push(run_epoch(model, inputs, triples, p, &mut opt, e)?);
        let score = validate(model)?;
        if score > best.0 {
            best = (score, model.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= patience {
                break;
            }
        }
    }
    *model = best.1;
    Ok(curve)
}

/// Member scores for one list, min-max normalized within the list and
/// averaged.
pub fn ensemble_list_scores(members: &[&ScoreMatrix], list: &EvalList) -> Result<Vec<f64>> {
    if members.is_empty() {
        return Err(Error::invalid("ensemble has no member"));
    }
    let mut out = vec![0.0; list.candidates.len()];
    for m in members {
        let mut s: Vec<f64> = list.candidates.iter().map(|&c| m.get(list.query_pos, c)).collect();
        min_max_in_place(&mut s);
        for (o, v) in out.iter_mut().zip(s) {
            *o += v;
        }
    }
    let n = members.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}

pub fn ensemble_ranks(members: &[&ScoreMatrix], lists: &[EvalList]) -> Result<Vec<usize>> {
    lists
        .iter()
        .map(|l| rank_of(&ensemble_list_scores(members, l)?, &l.candidate_ids, 0))
        .collect()
}

/// Candidate-set normalization for a full score matrix: each query row is
/// min-max scaled before averaging.
pub fn ensemble_matrix(members: &[&ScoreMatrix]) -> Result<ScoreMatrix> {
    let owned: Vec<ScoreMatrix> = members.iter().map(|m| (*m).clone()).collect();
    crate::pseudo::aggregate(&owned, &vec![true; owned.len()], crate::pseudo::Normalization::MinMax)
}
