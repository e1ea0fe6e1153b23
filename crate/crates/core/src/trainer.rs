//! Joint training: pretrain the unsupervised rankers once, then alternate
//! between training the sampled pipeline and updating the controller.
//!
//! Supervised members are seeded from their pipeline choice (unsupervised
//! mask, k, model name), so the reward is a deterministic function of the
//! configuration and repeated configurations are served from a memo.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{Baseline, BaselineKind, Clamp, Configuration, ControllerParams, EpisodeLog, Reinforce, ReinforceParams, DEFAULT_INIT_SCALE};
use crate::corpus::{AnnotationSet, Corpus};
use crate::eval::{build_eval_lists, mrr, ranks_from_matrix, EvalList, Metrics, NEGATIVES_PER_POSITIVE};
use crate::graph::build_graph;
use crate::hashing::derive_seed;
use crate::pseudo::{aggregate, sample_training_pairs, top_k_labels, Normalization, Triple};
use crate::sup::{ensemble_ranks, train_supervised, train_with_early_stopping, SupInputs, SupModel, SupModelRegistry, SupModelSpec, TrainParams};
use crate::unsup::{train_text_embeddings, ScoreCache, ScoreMatrix, SkipGramParams, UnsupModelRegistry};
use crate::{Error, Result};

/// How the reported configuration is chosen after the search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Highest observed reward; earliest episode on ties.
    #[default]
    BestReward,
    /// Most likely configuration under the final policy.
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub unsup: UnsupModelRegistry,
    pub sup: SupModelRegistry,
    pub k_values: Vec<usize>,
    pub episodes: usize,
    /// Stop when the best reward has not improved for this many episodes.
    pub stall_patience: Option<usize>,
    /// Configurations sampled per episode.
    pub samples_per_episode: usize,
    pub episode_train: TrainParams,
    pub final_epochs: usize,
    pub final_patience: usize,
    pub n_neg_per_pos: usize,
    pub normalization: Normalization,
    pub controller_hidden: usize,
    pub controller_init_scale: f64,
    pub reinforce: ReinforceParams,
    pub baseline: BaselineKind,
    pub baseline_decay: f64,
    pub selection: Selection,
    /// Word vectors feeding the supervised rankers.
    pub sup_embeddings: SkipGramParams,
    pub seed: u64,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            unsup: UnsupModelRegistry::default_builtin(),
            sup: SupModelRegistry::default_builtin(),
            k_values: vec![10, 20, 30, 40, 50],
            episodes: 200,
            stall_patience: None,
            samples_per_episode: 1,
            episode_train: TrainParams::default(),
            final_epochs: 30,
            final_patience: 5,
            n_neg_per_pos: 1,
            normalization: Normalization::MinMax,
            controller_hidden: 32,
            controller_init_scale: DEFAULT_INIT_SCALE,
            reinforce: ReinforceParams::default(),
            baseline: BaselineKind::Ema,
            baseline_decay: 0.9,
            selection: Selection::BestReward,
            sup_embeddings: SkipGramParams {
                epochs: 20,
                ..SkipGramParams::default()
            },
            seed: 0,
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.episode_train.epochs == 0 || self.final_epochs == 0 {
            return Err(Error::Config("episode and training budgets must be at least 1".into()));
        }
        if self.samples_per_episode == 0 {
            return Err(Error::Config("samples_per_episode must be at least 1".into()));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::Config("K_VALUES must be a non-empty list of positive integers".into()));
        }
        if self.n_neg_per_pos == 0 || self.workers == 0 {
            return Err(Error::Config("n_neg_per_pos and workers must be at least 1".into()));
        }
        Ok(())
    }

    fn baseline_state(&self) -> Baseline {
        match self.baseline {
            BaselineKind::Ema => Baseline::ema(self.baseline_decay),
            BaselineKind::None => Baseline::none(),
        }
    }
}

/// Unsupervised score matrices in registry order.
pub struct Pretrained {
    pub matrices: Vec<ScoreMatrix>,
    pub cache_hits: Vec<bool>,
}

/// Compute (or fetch from `cache`) one matrix per registered model.
pub fn pretrain_all(corpus: &Corpus, registry: &UnsupModelRegistry, seed: u64, cache: Option<&ScoreCache>, workers: usize) -> Result<Pretrained> {
    let graph = build_graph(corpus);
    let corpus_hash = corpus.content_hash();
    let run = |spec: &crate::unsup::UnsupModelSpec| -> Result<(ScoreMatrix, bool)> {
        let model_seed = derive_seed(seed, &format!("unsup:{}", spec.name));
        let hp = spec.hp_hash(model_seed)?;
        if let Some(c) = cache {
            if let Some(m) = c.load(&spec.name, &corpus_hash, &hp)? {
                return Ok((m, true));
            }
        }
        let m = spec.compute(corpus, &graph, model_seed)?;
        if let Some(c) = cache {
            c.store(&m, &corpus_hash, &hp)?;
        }
        Ok((m, false))
    };
    let results: Vec<(ScoreMatrix, bool)> = with_workers(workers, || {
        if workers > 1 {
            registry.models().par_iter().map(run).collect::<Result<_>>()
        } else {
            registry.models().iter().map(run).collect::<Result<_>>()
        }
    })?;
    let (matrices, cache_hits) = results.into_iter().unzip();
    Ok(Pretrained { matrices, cache_hits })
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn mask_key(mask: &[bool]) -> String {
    mask.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// A trained supervised member and its full score matrix.
#[derive(Clone, Debug)]
pub struct Member {
    pub spec: SupModelSpec,
    /// Initialization seed, needed to restore the model from a checkpoint.
    pub seed: u64,
    pub model: SupModel,
    pub scores: ScoreMatrix,
    pub loss_curve: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rewards {
    pub ru: f64,
    pub rs: f64,
}

#[derive(Clone, Debug)]
pub struct FinalModel {
    pub config: Configuration,
    pub members: Vec<Member>,
    pub validation: Metrics,
    pub test: Option<Metrics>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub logs: Vec<EpisodeLog>,
    pub best: Configuration,
    pub best_reward: f64,
    pub final_model: FinalModel,
    pub controller: ControllerParams,
}

/// The weak-supervision baseline: every model, each k tried, k chosen on
/// validation.
#[derive(Clone, Debug)]
pub struct FixedResult {
    pub per_k_validation: Vec<(usize, Metrics)>,
    pub final_model: FinalModel,
}

/// Word vectors and graph features for the supervised rankers; depends only
/// on the corpus and the run seed.
pub fn sup_inputs(config: &RunConfig, corpus: Corpus) -> Result<SupInputs> {
    let emb = SkipGramParams {
        seed: derive_seed(config.seed, "sup-embeddings"),
        ..config.sup_embeddings.clone()
    };
    let table = train_text_embeddings(&corpus, &emb)?;
    SupInputs::new(corpus, &table)
}

/// Everything an episode needs, built once per run.
pub struct Pipeline {
    pub config: RunConfig,
    pub inputs: SupInputs,
    pub matrices: Vec<ScoreMatrix>,
    pub validation: Vec<EvalList>,
    memo: Mutex<HashMap<Configuration, Rewards>>,
}

impl Pipeline {
    pub fn new(config: RunConfig, corpus: Corpus, matrices: Vec<ScoreMatrix>, validation: &AnnotationSet) -> Result<Self> {
        config.validate()?;
        if validation.is_empty() {
            return Err(Error::invalid("validation split is empty"));
        }
        if matrices.len() != config.unsup.len() {
            return Err(Error::Shape("one score matrix per unsupervised model is required".into()));
        }
        for m in &matrices {
            m.check_corpus(&corpus)?;
        }
        if let Some(&k) = config.k_values.iter().find(|&&k| k >= corpus.num_candidates()) {
            return Err(Error::Config(format!(
                "k = {k} is not below the candidate count {}",
                corpus.num_candidates()
            )));
        }
        let validation = build_eval_lists(validation, &corpus, derive_seed(config.seed, "validation-lists"), NEGATIVES_PER_POSITIVE)?;
        let inputs = sup_inputs(&config, corpus)?;
        Ok(Self {
            config,
            inputs,
            matrices,
            validation,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.inputs.corpus
    }

    pub fn test_lists(&self, test: &AnnotationSet) -> Result<Vec<EvalList>> {
        build_eval_lists(test, self.corpus(), derive_seed(self.config.seed, "test-lists"), NEGATIVES_PER_POSITIVE)
    }

    pub fn controller(&self, clamp: Clamp) -> Result<ControllerParams> {
        ControllerParams::with_init_scale(
            self.config.unsup.len(),
            self.config.k_values.clone(),
            self.config.sup.len(),
            self.config.controller_hidden,
            derive_seed(self.config.seed, "controller"),
            self.config.controller_init_scale,
        )?
        .with_clamp(clamp)
    }

    pub fn aggregate(&self, mask: &[bool]) -> Result<ScoreMatrix> {
        aggregate(&self.matrices, mask, self.config.normalization)
    }

    pub fn triples(&self, agg: &ScoreMatrix, unsup: &[bool], k: usize) -> Result<Vec<Triple>> {
        let labels = top_k_labels(agg, k)?;
        sample_training_pairs(&labels, self.config.n_neg_per_pos, derive_seed(self.config.seed, &format!("triples:{}:{k}", mask_key(unsup))))
    }

    fn member_seed(&self, tag: &str, unsup: &[bool], k: usize, name: &str) -> u64 {
        derive_seed(self.config.seed, &format!("{tag}:{}:{k}:{name}", mask_key(unsup)))
    }

    fn validation_mrr(&self, m: &ScoreMatrix) -> Result<f64> {
        Ok(mrr(&ranks_from_matrix(&self.validation, m)?))
    }

    /// Train the selected supervised models of `cfg` on its pseudo labels.
    /// `final_fit` switches to the final budget with early stopping.
    pub fn train_members(&self, cfg: &Configuration, final_fit: bool) -> Result<Vec<Member>> {
        let agg = self.aggregate(&cfg.unsup)?;
        let triples = self.triples(&agg, &cfg.unsup, cfg.k)?;
        let specs: Vec<&SupModelSpec> = self
            .config
            .sup
            .models()
            .iter()
            .zip(&cfg.sup)
            .filter(|(_, &on)| on)
            .map(|(s, _)| s)
            .collect();
        let tag = if final_fit { "final" } else { "member" };
        let train = |spec: &&SupModelSpec| -> Result<Member> {
            let seed = self.member_seed(tag, &cfg.unsup, cfg.k, &spec.name);
            let mut model = SupModel::init(spec, &self.inputs, seed)?;
            let loss_curve = if final_fit {
                let p = TrainParams {
                    epochs: self.config.final_epochs,
                    seed,
                    ..self.config.episode_train.clone()
                };
                train_with_early_stopping(&mut model, &self.inputs, &triples, &p, self.config.final_patience, |m| {
                    self.validation_mrr(&m.score_matrix(&spec.name, &self.inputs)?)
                })
            } else {
                let p = TrainParams {
                    seed,
                    ..self.config.episode_train.clone()
                };
                train_supervised(&mut model, &self.inputs, &triples, &p)
            }
            .map_err(|e| Error::Model {
                model: spec.name.clone(),
                source: Box::new(e),
            })?;
            let scores = model.score_matrix(&spec.name, &self.inputs)?;
            Ok(Member {
                spec: (*spec).clone(),
                seed,
                model,
                scores,
                loss_curve,
            })
        };
        let workers = self.config.workers;
        with_workers(workers, || {
            if workers > 1 {
                specs.par_iter().map(train).collect()
            } else {
                specs.iter().map(train).collect()
            }
        })
    }

    /// `(R^u, R^s)` for a configuration; memoized.
    pub fn rewards(&self, cfg: &Configuration) -> Result<Rewards> {
        if let Some(r) = self.memo.lock().expect("memo poisoned").get(cfg) {
            return Ok(r.clone());
        }
        let ru = self.validation_mrr(&self.aggregate(&cfg.unsup)?)?;
        let members = self.train_members(cfg, false)?;
        let refs: Vec<&ScoreMatrix> = members.iter().map(|m| &m.scores).collect();
        let rs = mrr(&ensemble_ranks(&refs, &self.validation)?);
        let r = Rewards { ru, rs };
        self.memo.lock().expect("memo poisoned").insert(cfg.clone(), r.clone());
        Ok(r)
    }

    /// Sample configuration(s), compute rewards and update the controller.
    pub fn run_episode(&self, controller: &mut ControllerParams, learner: &mut Reinforce, episode: usize) -> Result<Vec<EpisodeLog>> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, &format!("episode:{episode}")));
        let mut drawn = Vec::with_capacity(self.config.samples_per_episode);
        for _ in 0..self.config.samples_per_episode {
            let s = controller.sample(&mut rng)?;
            let r = self.rewards(&s.config)?;
            drawn.push((s, r));
        }
        let batch: Vec<(Configuration, f64)> = drawn.iter().map(|(s, r)| (s.config.clone(), r.ru + r.rs)).collect();
        let b = learner.update_batch(controller, &batch)?;
        Ok(drawn
            .into_iter()
            .map(|(s, r)| EpisodeLog {
                episode,
                i1: s.config.unsup_indicator(),
                k_index: s.config.k_index,
                k: s.config.k,
                i3: s.config.sup_indicator(),
                ru: r.ru,
                rs: r.rs,
                r: r.ru + r.rs,
                baseline: b,
                log_prob: s.log_prob,
                forced: s.forced,
            })
            .collect())
    }

    /// The episode loop only; returns logs and the final controller.
    pub fn search(&self, clamp: Clamp, mut on_episode: impl FnMut(&EpisodeLog)) -> Result<(Vec<EpisodeLog>, ControllerParams)> {
        let mut controller = self.controller(clamp)?;
        let mut learner = Reinforce::new(self.config.reinforce.clone(), self.config.baseline_state());
        let mut logs = Vec::new();
        let mut best = f64::NEG_INFINITY;
        let mut stale = 0;
        for e in 0..self.config.episodes {
            let ep = self.run_episode(&mut controller, &mut learner, e)?;
            let top = ep.iter().map(|l| l.r).fold(f64::NEG_INFINITY, f64::max);
            ep.iter().for_each(&mut on_episode);
            logs.extend(ep);
            if top > best {
                best = top;
                stale = 0;
            } else {
                stale += 1;
                if self.config.stall_patience.is_some_and(|p| stale >= p) {
                    break;
                }
            }
        }
        Ok((logs, controller))
    }

    pub fn select(&self, logs: &[EpisodeLog], controller: &ControllerParams) -> Result<(Configuration, f64)> {
        let best = best_log(logs).ok_or_else(|| Error::invalid("no episode was run"))?;
        match self.config.selection {
            Selection::BestReward => Ok((best.config(), best.r)),
            Selection::Greedy => {
                let cfg = controller.greedy()?;
                let r = self.rewards(&cfg)?;
                Ok((cfg, r.ru + r.rs))
            }
        }
    }

    /// Retrain the members of `cfg` at the final budget and evaluate.
    pub fn final_fit(&self, cfg: &Configuration, test: Option<&[EvalList]>) -> Result<FinalModel> {
        let members = self.train_members(cfg, true)?;
        let refs: Vec<&ScoreMatrix> = members.iter().map(|m| &m.scores).collect();
        let validation = Metrics::from_ranks(&ensemble_ranks(&refs, &self.validation)?);
        let test = match test {
            Some(lists) if !lists.is_empty() => Some(Metrics::from_ranks(&ensemble_ranks(&refs, lists)?)),
            _ => None,
        };
        Ok(FinalModel {
            config: cfg.clone(),
            members,
            validation,
            test,
        })
    }

    /// Search, select and retrain. `test` lists are touched only by the
    /// final evaluation.
    pub fn joint_train(&self, clamp: Clamp, test: Option<&[EvalList]>, on_episode: impl FnMut(&EpisodeLog)) -> Result<RunResult> {
        let (logs, controller) = self.search(clamp, on_episode)?;
        let (best, best_reward) = self.select(&logs, &controller)?;
        let final_model = self.final_fit(&best, test)?;
        Ok(RunResult {
            logs,
            best,
            best_reward,
            final_model,
            controller,
        })
    }

    /// All unsupervised and supervised models; k chosen by validation MRR.
    pub fn all_models_baseline(&self, test: Option<&[EvalList]>) -> Result<FixedResult> {
        let all_u = vec![true; self.config.unsup.len()];
        let all_s = vec![true; self.config.sup.len()];
        let mut per_k = Vec::new();
        let mut best: Option<FinalModel> = None;
        for (k_index, &k) in self.config.k_values.iter().enumerate() {
            let cfg = Configuration {
                unsup: all_u.clone(),
                k_index,
                k,
                sup: all_s.clone(),
            };
            let fm = self.final_fit(&cfg, test)?;
            per_k.push((k, fm.validation.clone()));
            if best.as_ref().is_none_or(|b| fm.validation.mrr > b.validation.mrr) {
                best = Some(fm);
            }
        }
        Ok(FixedResult {
            per_k_validation: per_k,
            final_model: best.expect("K_VALUES is non-empty"),
        })
    }

    /// Validation and test metrics of each unsupervised matrix alone.
    pub fn unsup_metrics(&self, test: Option<&[EvalList]>) -> Result<Vec<(String, Metrics, Option<Metrics>)>> {
        self.matrices
            .iter()
            .map(|m| {
                let v = Metrics::from_ranks(&ranks_from_matrix(&self.validation, m)?);
                let t = match test {
                    Some(lists) if !lists.is_empty() => Some(Metrics::from_ranks(&ranks_from_matrix(lists, m)?)),
                    _ => None,
                };
                Ok((m.model.clone(), v, t))
            })
            .collect()
    }
}

/// First log with the highest reward.
pub fn best_log(logs: &[EpisodeLog]) -> Option<&EpisodeLog> {
    logs.iter().fold(None, |best: Option<&EpisodeLog>, l| match best {
        Some(b) if b.r >= l.r => Some(b),
        _ => Some(l),
    })
}

/// Which step an ablation holds fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    FixUnsup(Vec<bool>),
    FixK(usize),
    FixSup(Vec<bool>),
}

impl Ablation {
    pub fn clamp(&self) -> Clamp {
        match self {
            Self::FixUnsup(m) => Clamp {
                unsup: Some(m.clone()),
                ..Clamp::default()
            },
            Self::FixK(t) => Clamp {
                k_index: Some(*t),
                ..Clamp::default()
            },
            Self::FixSup(m) => Clamp {
                sup: Some(m.clone()),
                ..Clamp::default()
            },
        }
    }
}

pub fn ablation_run(p: &Pipeline, ablation: &Ablation, test: Option<&[EvalList]>) -> Result<RunResult> {
    p.joint_train(ablation.clamp(), test, |_| {})
}

/// One fix-k run per entry of K_VALUES.
pub fn fix_k_sweep(p: &Pipeline, test: Option<&[EvalList]>) -> Result<Vec<RunResult>> {
    (0..p.config.k_values.len())
        .map(|t| ablation_run(p, &Ablation::FixK(t), test))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split_annotations, Split};
    use crate::synth::{generate_synthetic, SynthParams};
    use crate::unsup::UnsupModelSpec;

    fn tiny() -> (Corpus, AnnotationSet, AnnotationSet) {
        let data = generate_synthetic(&SynthParams {
            n_queries: 12,
            n_candidates: 150,
            n_topics: 6,
            vocab_per_topic: 15,
            common_vocab: 10,
            doc_len: 10,
            noise_rate: 0.3,
            seed: 3,
        })
        .unwrap();
        let (v, t) = split_annotations(&data.annotations, 1).unwrap();
        (data.corpus, v, t)
    }

    fn config(unsup: &[&str], sup: &[&str], k: Vec<usize>, episodes: usize) -> RunConfig {
        RunConfig {
            unsup: UnsupModelRegistry::new(unsup.iter().map(|n| UnsupModelRegistry::builtin(n).unwrap()).collect()).unwrap(),
            sup: SupModelRegistry::from_names(sup).unwrap(),
            k_values: k,
            episodes,
            episode_train: TrainParams {
                epochs: 2,
                ..TrainParams::default()
            },
            final_epochs: 3,
            sup_embeddings: SkipGramParams {
                dim: 8,
                epochs: 2,
                ..SkipGramParams::default()
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn pretrain_counts_and_cache() {
        let (corpus, _, _) = tiny();
        let reg = UnsupModelRegistry::from_names(&["bm25", "noise"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cache = ScoreCache::new(dir.path());
        let a = pretrain_all(&corpus, &reg, 5, Some(&cache), 1).unwrap();
        assert_eq!(a.matrices.len(), 2);
        assert_eq!(a.cache_hits, vec![false, false]);
        let b = pretrain_all(&corpus, &reg, 5, Some(&cache), 1).unwrap();
        assert_eq!(b.cache_hits, vec![true, true]);
        assert_eq!(a.matrices, b.matrices);
        let fresh = pretrain_all(&corpus, &reg, 5, None, 2).unwrap();
        assert_eq!(fresh.matrices, a.matrices);
    }

    #[test]
    fn degenerate_space_reward_is_that_pipeline() {
        let (corpus, v, _) = tiny();
        let cfg = config(&["bm25"], &["interaction"], vec![10], 2);
        let pre = pretrain_all(&corpus, &cfg.unsup, 0, None, 1).unwrap();
        let p = Pipeline::new(cfg, corpus, pre.matrices, &v).unwrap();
        let (logs, _) = p.search(Clamp::default(), |_| {}).unwrap();
        let only = Configuration {
            unsup: vec![true],
            k_index: 0,
            k: 10,
            sup: vec![true],
        };
        let members = p.train_members(&only, false).unwrap();
        let rs = p.validation_mrr(&members[0].scores).unwrap();
        for l in &logs {
            assert_eq!(l.config(), only);
            assert!((l.rs - rs).abs() < 1e-12);
            assert!((0.0..=2.0).contains(&l.r));
        }
    }

    #[test]
    fn oracle_matrix_gives_full_unsupervised_reward() {
        let (corpus, v, t) = tiny();
        let mut cfg = config(&["bm25"], &["interaction"], vec![40], 1);
        let oracle = ScoreMatrix::oracle("oracle", &corpus, &[&v, &t]).unwrap();
        cfg.unsup = UnsupModelRegistry::new(vec![UnsupModelSpec {
            name: "oracle".into(),
            kind: crate::unsup::UnsupKind::Noise,
        }])
        .unwrap();
        let p = Pipeline::new(cfg, corpus, vec![oracle], &v).unwrap();
        let (logs, _) = p.search(Clamp::default(), |_| {}).unwrap();
        assert_eq!(logs[0].ru, 1.0);
    }

    #[test]
    fn identical_runs_give_identical_logs_and_clamps_hold() {
        let (corpus, v, t) = tiny();
        let cfg = config(&["bm25", "noise"], &["representation", "interaction"], vec![10, 20], 4);
        let pre = pretrain_all(&corpus, &cfg.unsup, 0, None, 1).unwrap();
        let p = Pipeline::new(cfg.clone(), corpus.clone(), pre.matrices.clone(), &v).unwrap();
        let q = Pipeline::new(cfg, corpus, pre.matrices, &v).unwrap();
        let (a, _) = p.search(Clamp::default(), |_| {}).unwrap();
        let (b, _) = q.search(Clamp::default(), |_| {}).unwrap();
        assert_eq!(a, b);
        let test = p.test_lists(&t).unwrap();
        let r = ablation_run(&p, &Ablation::FixK(1), Some(&test)).unwrap();
        assert!(r.logs.iter().all(|l| l.k == 20));
        assert!(r.final_model.test.is_some());
        let mut running = f64::NEG_INFINITY;
        for l in &r.logs {
            let next = running.max(l.r);
            assert!(next >= running);
            running = next;
        }
        assert_eq!(running, r.best_reward);
        assert_eq!(t.split, Split::Test);
    }

    #[test]
    fn single_episode_selects_the_sampled_configuration() {
        let (corpus, v, _) = tiny();
        let cfg = config(&["bm25", "noise"], &["interaction"], vec![10, 20], 1);
        let pre = pretrain_all(&corpus, &cfg.unsup, 0, None, 1).unwrap();
        let p = Pipeline::new(cfg, corpus, pre.matrices, &v).unwrap();
        let r = p.joint_train(Clamp::default(), None, |_| {}).unwrap();
        assert_eq!(r.logs.len(), 1);
        assert_eq!(r.best, r.logs[0].config());
        assert!(r.final_model.test.is_none());
    }
}
