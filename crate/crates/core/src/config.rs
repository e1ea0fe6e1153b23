//! Experiment configuration as plain `key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown and
//! repeated keys are errors. Every key has a default, so an empty file is a
//! valid configuration; [`ExperimentConfig::to_text`] writes the full,
//! commented form that is copied into each run directory.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::controller::{BaselineKind, ReinforceParams, DEFAULT_INIT_SCALE};
use crate::nn::Algorithm;
use crate::pseudo::Normalization;
use crate::sup::{SupModelRegistry, TrainParams, BUILTIN_SUP};
use crate::trainer::{RunConfig, Selection};
use crate::unsup::{SkipGramParams, UnsupKind, UnsupModelRegistry, UnsupModelSpec, BUILTIN_UNSUP};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub documents: PathBuf,
    pub annotations: PathBuf,
    pub output: PathBuf,
    pub max_query_len: usize,
    pub max_candidate_len: usize,
    pub split_seed: u64,
    pub seed: u64,
    /// Unsupervised models; `name` for a built-in, `name:path.csv` for
    /// externally supplied scores.
    pub unsup_models: Vec<String>,
    pub sup_models: Vec<String>,
    pub k_values: Vec<usize>,
    pub episodes: usize,
    pub stall_patience: Option<usize>,
    pub samples_per_episode: usize,
    pub episode_epochs: usize,
    pub final_epochs: usize,
    pub final_patience: usize,
    pub sup_lr: f64,
    pub batch_size: usize,
    pub max_triples_per_epoch: Option<usize>,
    pub n_neg_per_pos: usize,
    pub normalization: Normalization,
    pub controller_hidden: usize,
    pub controller_init_scale: f64,
    pub controller_optimizer: Algorithm,
    pub controller_lr: f64,
    pub entropy_coef: f64,
    pub baseline: BaselineKind,
    pub baseline_decay: f64,
    pub selection: Selection,
    pub word_dim: usize,
    pub word_epochs: usize,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let run = RunConfig::default();
        Self {
            documents: "documents.jsonl".into(),
            annotations: "annotations.tsv".into(),
            output: "run".into(),
            max_query_len: 200,
            max_candidate_len: 200,
            split_seed: 0,
            seed: run.seed,
            unsup_models: BUILTIN_UNSUP.iter().map(|s| s.to_string()).collect(),
            sup_models: BUILTIN_SUP.iter().map(|s| s.to_string()).collect(),
            k_values: run.k_values,
            episodes: run.episodes,
            stall_patience: run.stall_patience,
            samples_per_episode: run.samples_per_episode,
            episode_epochs: run.episode_train.epochs,
            final_epochs: run.final_epochs,
            final_patience: run.final_patience,
            sup_lr: run.episode_train.lr,
            batch_size: run.episode_train.batch_size,
            max_triples_per_epoch: run.episode_train.max_triples_per_epoch,
            n_neg_per_pos: run.n_neg_per_pos,
            normalization: run.normalization,
            controller_hidden: run.controller_hidden,
            controller_init_scale: DEFAULT_INIT_SCALE,
            controller_optimizer: run.reinforce.algorithm,
            controller_lr: run.reinforce.lr,
            entropy_coef: run.reinforce.entropy_coef,
            baseline: run.baseline,
            baseline_decay: run.baseline_decay,
            selection: run.selection,
            word_dim: run.sup_embeddings.dim,
            word_epochs: run.sup_embeddings.epochs,
            workers: run.workers,
        }
    }
}

/// Every key with its one-line description, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("documents", "documents JSONL (id, role, text per line)"),
    ("annotations", "annotation TSV (query, candidate, label)"),
    ("output", "run directory"),
    ("max_query_len", "query tokens kept after truncation"),
    ("max_candidate_len", "candidate tokens kept after truncation"),
    ("split_seed", "seed of the 50/50 validation/test split of annotated queries"),
    ("seed", "master seed of pretraining, search and training"),
    ("unsup_models", "unsupervised models, comma separated; name or name:scores.csv"),
    ("sup_models", "supervised models, comma separated"),
    ("k_values", "candidate pseudo-label sizes k"),
    ("episodes", "search episodes"),
    ("stall_patience", "stop after this many episodes without a better reward; none to disable"),
    ("samples_per_episode", "configurations sampled per controller update"),
    ("episode_epochs", "supervised training epochs inside an episode"),
    ("final_epochs", "epoch budget when retraining the selected configuration"),
    ("final_patience", "early-stopping patience on validation MRR for the final retrain"),
    ("sup_lr", "Adam learning rate of the supervised rankers"),
    ("batch_size", "triples per supervised minibatch"),
    ("max_triples_per_epoch", "cap on triples visited per epoch; none for a full pass"),
    ("n_neg_per_pos", "negatives sampled per pseudo positive"),
    ("normalization", "score aggregation: min-max or raw"),
    ("controller_hidden", "controller LSTM width"),
    ("controller_init_scale", "controller parameters start uniform in [-s, s]"),
    ("controller_optimizer", "adam or sgd"),
    ("controller_lr", "controller learning rate"),
    ("entropy_coef", "entropy bonus weight; 0 disables it"),
    ("baseline", "reward baseline: ema or none"),
    ("baseline_decay", "EMA decay of the baseline"),
    ("selection", "best-reward or greedy"),
    ("word_dim", "word vector size fed to the supervised rankers"),
    ("word_epochs", "skip-gram epochs for those word vectors"),
    ("workers", "worker threads for pretraining and per-episode training"),
];

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse().map_err(|e| Error::Config(format!("{key}: cannot parse `{v}`: {e}")))
}

fn parse_opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>>
where
    T::Err: Display,
{
    if v == "none" {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

fn parse_list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn show_opt<T: Display>(v: &Option<T>) -> String {
    v.as_ref().map_or("none".into(), |x| x.to_string())
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        match key {
            "documents" => self.documents = v.into(),
            "annotations" => self.annotations = v.into(),
            "output" => self.output = v.into(),
            "max_query_len" => self.max_query_len = parse(key, v)?,
            "max_candidate_len" => self.max_candidate_len = parse(key, v)?,
            "split_seed" => self.split_seed = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "unsup_models" => self.unsup_models = parse_list(v),
            "sup_models" => self.sup_models = parse_list(v),
            "k_values" => self.k_values = parse_list(v).iter().map(|s| parse(key, s)).collect::<Result<_>>()?,
            "episodes" => self.episodes = parse(key, v)?,
            "stall_patience" => self.stall_patience = parse_opt(key, v)?,
            "samples_per_episode" => self.samples_per_episode = parse(key, v)?,
            "episode_epochs" => self.episode_epochs = parse(key, v)?,
            "final_epochs" => self.final_epochs = parse(key, v)?,
            "final_patience" => self.final_patience = parse(key, v)?,
            "sup_lr" => self.sup_lr = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "max_triples_per_epoch" => self.max_triples_per_epoch = parse_opt(key, v)?,
            "n_neg_per_pos" => self.n_neg_per_pos = parse(key, v)?,
            "normalization" => {
                self.normalization = match v {
                    "min-max" => Normalization::MinMax,
                    "raw" => Normalization::Raw,
                    _ => return Err(Error::Config(format!("normalization: expected min-max or raw, found `{v}`"))),
                }
            }
            "controller_hidden" => self.controller_hidden = parse(key, v)?,
            "controller_init_scale" => self.controller_init_scale = parse(key, v)?,
            "controller_optimizer" => {
                self.controller_optimizer = match v {
                    "adam" => Algorithm::Adam,
                    "sgd" => Algorithm::Sgd,
                    _ => return Err(Error::Config(format!("controller_optimizer: expected adam or sgd, found `{v}`"))),
                }
            }
            "controller_lr" => self.controller_lr = parse(key, v)?,
            "entropy_coef" => self.entropy_coef = parse(key, v)?,
            "baseline" => {
                self.baseline = match v {
                    "ema" => BaselineKind::Ema,
                    "none" => BaselineKind::None,
                    _ => return Err(Error::Config(format!("baseline: expected ema or none, found `{v}`"))),
                }
            }
            "baseline_decay" => self.baseline_decay = parse(key, v)?,
            "selection" => {
                self.selection = match v {
                    "best-reward" => Selection::BestReward,
                    "greedy" => Selection::Greedy,
                    _ => return Err(Error::Config(format!("selection: expected best-reward or greedy, found `{v}`"))),
                }
            }
            "word_dim" => self.word_dim = parse(key, v)?,
            "word_epochs" => self.word_epochs = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<String> {
        Ok(match key {
            "documents" => self.documents.display().to_string(),
            "annotations" => self.annotations.display().to_string(),
            "output" => self.output.display().to_string(),
            "max_query_len" => self.max_query_len.to_string(),
            "max_candidate_len" => self.max_candidate_len.to_string(),
            "split_seed" => self.split_seed.to_string(),
            "seed" => self.seed.to_string(),
            "unsup_models" => self.unsup_models.join(","),
            "sup_models" => self.sup_models.join(","),
            "k_values" => join(&self.k_values),
            "episodes" => self.episodes.to_string(),
            "stall_patience" => show_opt(&self.stall_patience),
            "samples_per_episode" => self.samples_per_episode.to_string(),
            "episode_epochs" => self.episode_epochs.to_string(),
            "final_epochs" => self.final_epochs.to_string(),
            "final_patience" => self.final_patience.to_string(),
            "sup_lr" => self.sup_lr.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "max_triples_per_epoch" => show_opt(&self.max_triples_per_epoch),
            "n_neg_per_pos" => self.n_neg_per_pos.to_string(),
            "normalization" => match self.normalization {
                Normalization::MinMax => "min-max",
                Normalization::Raw => "raw",
            }
            .into(),
            "controller_hidden" => self.controller_hidden.to_string(),
            "controller_init_scale" => self.controller_init_scale.to_string(),
            "controller_optimizer" => match self.controller_optimizer {
                Algorithm::Adam => "adam",
                Algorithm::Sgd => "sgd",
            }
            .into(),
            "controller_lr" => self.controller_lr.to_string(),
            "entropy_coef" => self.entropy_coef.to_string(),
            "baseline" => match self.baseline {
                BaselineKind::Ema => "ema",
                BaselineKind::None => "none",
            }
            .into(),
            "baseline_decay" => self.baseline_decay.to_string(),
            "selection" => match self.selection {
                Selection::BestReward => "best-reward",
                Selection::Greedy => "greedy",
            }
            .into(),
            "word_dim" => self.word_dim.to_string(),
            "word_epochs" => self.word_epochs.to_string(),
            "workers" => self.workers.to_string(),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        })
    }

    /// Parse `key = value` text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: key `{k}` given twice", n + 1)));
            }
            cfg.set(k, v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Apply `key=value` overrides, e.g. from the command line.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{}` is not key=value", o.as_ref())))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Full commented form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, doc) in KEYS {
            out.push_str(&format!("# {doc}\n{key} = {}\n", self.get(key).expect("listed key")));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn unsup_registry(&self) -> Result<UnsupModelRegistry> {
        let specs = self
            .unsup_models
            .iter()
            .map(|entry| match entry.split_once(':') {
                Some((name, path)) => Ok(UnsupModelSpec {
                    name: name.to_string(),
                    kind: UnsupKind::External { path: path.into() },
                }),
                None => UnsupModelRegistry::builtin(entry),
            })
            .collect::<Result<Vec<_>>>()?;
        UnsupModelRegistry::new(specs).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sup_registry(&self) -> Result<SupModelRegistry> {
        let names: Vec<&str> = self.sup_models.iter().map(String::as_str).collect();
        SupModelRegistry::from_names(&names).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        if !(self.controller_init_scale > 0.0 && self.controller_lr > 0.0 && self.sup_lr > 0.0) {
            return Err(Error::Config("learning rates and controller_init_scale must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(Error::Config("baseline_decay must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 || self.word_dim == 0 || self.controller_hidden == 0 {
            return Err(Error::Config("batch_size, word_dim and controller_hidden must be positive".into()));
        }
        let cfg = RunConfig {
            unsup: self.unsup_registry()?,
            sup: self.sup_registry()?,
            k_values: self.k_values.clone(),
            episodes: self.episodes,
            stall_patience: self.stall_patience,
            samples_per_episode: self.samples_per_episode,
            episode_train: TrainParams {
                epochs: self.episode_epochs,
                lr: self.sup_lr,
                batch_size: self.batch_size,
                seed: 0,
                max_triples_per_epoch: self.max_triples_per_epoch,
            },
            final_epochs: self.final_epochs,
            final_patience: self.final_patience,
            n_neg_per_pos: self.n_neg_per_pos,
            normalization: self.normalization,
            controller_hidden: self.controller_hidden,
            controller_init_scale: self.controller_init_scale,
            reinforce: ReinforceParams {
                algorithm: self.controller_optimizer,
                lr: self.controller_lr,
                entropy_coef: self.entropy_coef,
            },
            baseline: self.baseline,
            baseline_decay: self.baseline_decay,
            selection: self.selection,
            sup_embeddings: SkipGramParams {
                dim: self.word_dim,
                epochs: self.word_epochs,
                ..SkipGramParams::default()
            },
            seed: self.seed,
            workers: self.workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
