//! Run-directory workflow behind the command-line tool.
//!
//! Layout of a run directory:
//!
//! ```text
//! config.txt            full configuration copy
//! corpus.json           ingested corpus
//! validation.tsv        validation annotations
//! test.tsv              test annotations (may be empty)
//! cache/                unsupervised score cache
//! episodes.jsonl        one line per sampled configuration
//! best_config.json      selected configuration, rewards, validation metrics
//! pseudo_labels.jsonl   pseudo labels of the selected configuration
//! checkpoints/          final supervised members
//! manifest.json         versions and hashes of inputs and outputs
//! report.json           test metrics; the only file that reads test.tsv
//! reports/*.csv         time series rendered by `report`
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::controller::{Clamp, EpisodeLog};
use crate::corpus::{build_corpus, read_annotations_tsv, read_documents_jsonl, split_annotations, write_annotations_tsv, write_documents_jsonl, AnnotationSet, Corpus, Split};
use crate::eval::{build_eval_lists, EvalList, Metrics, NEGATIVES_PER_POSITIVE};
use crate::hashing::{derive_seed, sha256_hex};
use crate::nn::checkpoint::Checkpoint;
use crate::pseudo::top_k_labels;
use crate::sup::{ensemble_matrix, ensemble_ranks, SupModel};
use crate::synth::{generate_synthetic, SynthParams};
use crate::trainer::{pretrain_all, sup_inputs, Ablation, FinalModel, Pipeline, RunConfig, RunResult};
use crate::unsup::{ScoreCache, ScoreMatrix};
use crate::{Error, Result, FORMAT_VERSION};

pub const CONFIG_FILE: &str = "config.txt";
pub const CORPUS_FILE: &str = "corpus.json";
pub const VALIDATION_FILE: &str = "validation.tsv";
pub const TEST_FILE: &str = "test.tsv";
pub const CACHE_DIR: &str = "cache";
pub const EPISODES_FILE: &str = "episodes.jsonl";
pub const BEST_CONFIG_FILE: &str = "best_config.json";
pub const PSEUDO_LABELS_FILE: &str = "pseudo_labels.jsonl";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";
pub const REPORTS_DIR: &str = "reports";

/// Trailing window of the selection-frequency series.
pub const FREQUENCY_WINDOW: usize = 50;

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write(path, bytes)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn require(path: &Path, hint: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{} is missing; {hint}", path.display())))
    }
}

/// Write `documents.jsonl`, `annotations.tsv` and `synth.json` into `out`.
pub fn gen_synth(params: &SynthParams, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let data = generate_synthetic(params)?;
    let docs = out.join("documents.jsonl");
    let ann = out.join("annotations.tsv");
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_documents_jsonl(&docs, &data.documents)?;
    write_annotations_tsv(&ann, &data.annotations)?;
    write_json(&out.join("synth.json"), params)?;
    Ok((docs, ann))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub queries: usize,
    pub candidates: usize,
    pub vocabulary: usize,
    pub validation_queries: usize,
    pub test_queries: usize,
}

/// Build the corpus, split the annotations 50/50 by query and write both
/// into the run directory together with the configuration.
pub fn ingest(cfg: &ExperimentConfig) -> Result<IngestSummary> {
    cfg.run_config()?;
    let dir = &cfg.output;
    let docs = read_documents_jsonl(&cfg.documents)?;
    let corpus = build_corpus(&docs, cfg.max_query_len, cfg.max_candidate_len)?;
    let ann = read_annotations_tsv(&cfg.annotations)?;
    let (validation, test) = split_annotations(&ann, cfg.split_seed)?;
    validation.validate(&corpus)?;
    test.validate(&corpus)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    cfg.save(&dir.join(CONFIG_FILE))?;
    corpus.save(&dir.join(CORPUS_FILE))?;
    write_annotations_tsv(&dir.join(VALIDATION_FILE), &validation.pairs)?;
    write_annotations_tsv(&dir.join(TEST_FILE), &test.pairs)?;
    Ok(IngestSummary {
        queries: corpus.num_queries(),
        candidates: corpus.num_candidates(),
        vocabulary: corpus.vocab().len(),
        validation_queries: validation.queries().len(),
        test_queries: test.queries().len(),
    })
}

/// A run directory with its configuration loaded.
pub struct Run {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub run_config: RunConfig,
}

impl Run {
    /// Open an ingested run directory. `overrides` are `key=value` pairs
    /// applied on top of the stored configuration.
    pub fn open<S: AsRef<str>>(dir: &Path, overrides: &[S]) -> Result<Self> {
        let cfg_path = dir.join(CONFIG_FILE);
        require(&cfg_path, "run `ingest` first")?;
        require(&dir.join(CORPUS_FILE), "run `ingest` first")?;
        let mut config = ExperimentConfig::load(&cfg_path)?;
        config.apply_overrides(overrides)?;
        let run_config = config.run_config()?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            run_config,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn corpus(&self) -> Result<Corpus> {
        Corpus::load(&self.path(CORPUS_FILE))
    }

    pub fn annotations(&self, split: Split) -> Result<AnnotationSet> {
        let path = self.path(match split {
            Split::Validation => VALIDATION_FILE,
            Split::Test => TEST_FILE,
        });
        require(&path, "run `ingest` first")?;
        AnnotationSet::new(split, read_annotations_tsv(&path)?)
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(self.config.to_text().as_bytes())
    }

    /// Score matrices of every registered model, through the cache.
    /// Returns the matrices and, per model, whether the cache was hit.
    pub fn pretrain(&self, corpus: &Corpus) -> Result<(Vec<ScoreMatrix>, Vec<(String, bool)>)> {
        let cache = ScoreCache::new(self.path(CACHE_DIR));
        let p = pretrain_all(corpus, &self.run_config.unsup, self.run_config.seed, Some(&cache), self.run_config.workers)?;
        let hits = self.run_config.unsup.names().into_iter().map(String::from).zip(p.cache_hits).collect();
        Ok((p.matrices, hits))
    }

    pub fn pipeline(&self) -> Result<Pipeline> {
        let corpus = self.corpus()?;
        let (matrices, _) = self.pretrain(&corpus)?;
        let validation = self.annotations(Split::Validation)?;
        Pipeline::new(self.run_config.clone(), corpus, matrices, &validation)
    }

    pub fn test_lists(&self, pipeline: &Pipeline) -> Result<Vec<EvalList>> {
        let test = self.annotations(Split::Test)?;
        if test.is_empty() {
            return Ok(Vec::new());
        }
        pipeline.test_lists(&test)
    }
}

/// The selected configuration in readable form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestConfig {
    pub format_version: u32,
    pub unsup_models: Vec<String>,
    #[serde(rename = "I1")]
    pub i1: Vec<u8>,
    pub k_index: usize,
    pub k: usize,
    pub sup_models: Vec<String>,
    #[serde(rename = "I3")]
    pub i3: Vec<u8>,
    pub reward: f64,
    pub validation: Metrics,
}

/// Test metrics; every field is null when the test split is empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub split: String,
    #[serde(rename = "hr@5")]
    pub hr5: Option<f64>,
    #[serde(rename = "ndcg@5")]
    pub ndcg5: Option<f64>,
    pub mrr: Option<f64>,
    pub n_lists: usize,
    pub test_sha256: String,
    /// Reference points on the same test lists, present when requested.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub baselines: BTreeMap<String, Metrics>,
}

impl Report {
    fn new(test: Option<&Metrics>, test_sha256: String) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            split: "test".into(),
            hr5: test.map(|m| m.hr5),
            ndcg5: test.map(|m| m.ndcg5),
            mrr: test.map(|m| m.mrr),
            n_lists: test.map_or(0, |m| m.n_lists),
            test_sha256,
            baselines: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub package: String,
    pub version: String,
    pub command: String,
    pub corpus_hash: String,
    pub validation_sha256: String,
    pub config_sha256: String,
    /// Hash of every output written by the command, keyed by path relative
    /// to the output directory.
    pub files: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default)]
pub struct SearchOptions {
    /// Also evaluate the all-models baseline and each unsupervised model on
    /// the test lists and add them to report.json.
    pub baselines: bool,
}

fn selected<'a>(names: Vec<&'a str>, mask: &[bool]) -> Vec<String> {
    names.into_iter().zip(mask).filter(|(_, &on)| on).map(|(n, _)| n.to_string()).collect()
}

fn write_episodes(path: &Path, logs: &[EpisodeLog]) -> Result<()> {
    let mut out = Vec::new();
    for l in logs {
        serde_json::to_writer(&mut out, l)?;
        out.push(b'\n');
    }
    write(path, out)
}

pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeLog>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1))))
        .collect()
}

/// Persist the outputs of one search under `out` and return the report.
fn write_outputs(run: &Run, p: &Pipeline, out: &Path, command: &str, result: &RunResult, test: &[EvalList], opts: &SearchOptions) -> Result<Report> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files = Vec::new();
    let mut put = |name: &str| files.push(name.to_string());

    run.config.save(&out.join(CONFIG_FILE))?;
    put(CONFIG_FILE);
    write_episodes(&out.join(EPISODES_FILE), &result.logs)?;
    put(EPISODES_FILE);

    let fm: &FinalModel = &result.final_model;
    let best = BestConfig {
        format_version: FORMAT_VERSION,
        unsup_models: selected(p.config.unsup.names(), &fm.config.unsup),
        i1: fm.config.unsup_indicator(),
        k_index: fm.config.k_index,
        k: fm.config.k,
        sup_models: selected(p.config.sup.names(), &fm.config.sup),
        i3: fm.config.sup_indicator(),
        reward: result.best_reward,
        validation: fm.validation.clone(),
    };
    write_json(&out.join(BEST_CONFIG_FILE), &best)?;
    put(BEST_CONFIG_FILE);

    let labels = top_k_labels(&p.aggregate(&fm.config.unsup)?, fm.config.k)?;
    write(&out.join(PSEUDO_LABELS_FILE), labels.to_jsonl())?;
    put(PSEUDO_LABELS_FILE);

    let hash = run.config_hash();
    let ckpt_dir = out.join(CHECKPOINT_DIR);
    std::fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    for m in &fm.members {
        let name = format!("{CHECKPOINT_DIR}/{}.ckpt", m.spec.name);
        m.model.to_checkpoint(&m.spec, m.seed, &hash)?.save(&out.join(&name))?;
        put(&name);
    }

    let corpus_hash = p.corpus().content_hash();
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        corpus_hash,
        validation_sha256: file_hash(&run.path(VALIDATION_FILE))?,
        config_sha256: hash,
        files: files
            .iter()
            .map(|f| Ok((f.clone(), file_hash(&out.join(f))?)))
            .collect::<Result<_>>()?,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;

    // the test split is read from here on
    let mut report = Report::new(fm.test.as_ref(), file_hash(&run.path(TEST_FILE))?);
    if opts.baselines && !test.is_empty() {
        let weak = p.all_models_baseline(Some(test))?;
        if let Some(m) = weak.final_model.test {
            report.baselines.insert("all-models".into(), m);
        }
        for (name, _, t) in p.unsup_metrics(Some(test))? {
            if let Some(m) = t {
                report.baselines.insert(format!("unsup:{name}"), m);
            }
        }
    }
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// Full search: pretrain (cached), episodes, final retrain, outputs.
pub fn search(run: &Run, opts: &SearchOptions, on_episode: impl FnMut(&EpisodeLog)) -> Result<Report> {
    let p = run.pipeline()?;
    let test = run.test_lists(&p)?;
    let result = p.joint_train(Clamp::default(), Some(&test), on_episode)?;
    write_outputs(run, &p, &run.dir, "search", &result, &test, opts)
}

/// Which ablation to run from the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum AblationMode {
    /// Clamp step 1 to the named unsupervised models.
    FixUnsup(Vec<String>),
    /// One run per entry of K_VALUES.
    FixK,
    /// Clamp step 3 to the named supervised models.
    FixSup(Vec<String>),
}

fn mask_of(all: Vec<&str>, chosen: &[String], what: &str) -> Result<Vec<bool>> {
    for c in chosen {
        if !all.contains(&c.as_str()) {
            return Err(Error::Config(format!("`{c}` is not a registered {what} model")));
        }
    }
    Ok(all.iter().map(|n| chosen.iter().any(|c| c == n)).collect())
}

/// Run ablations into `ablations/<name>/` and return one report each.
pub fn ablate(run: &Run, mode: &AblationMode, opts: &SearchOptions) -> Result<Vec<(String, Report)>> {
    let p = run.pipeline()?;
    let test = run.test_lists(&p)?;
    let jobs: Vec<(String, Ablation)> = match mode {
        AblationMode::FixUnsup(names) => vec![(
            format!("fix-unsup-{}", names.join("+")),
            Ablation::FixUnsup(mask_of(p.config.unsup.names(), names, "unsupervised")?),
        )],
        AblationMode::FixSup(names) => vec![(
            format!("fix-sup-{}", names.join("+")),
            Ablation::FixSup(mask_of(p.config.sup.names(), names, "supervised")?),
        )],
        AblationMode::FixK => p.config.k_values.iter().enumerate().map(|(t, k)| (format!("fix-k-{k}"), Ablation::FixK(t))).collect(),
    };
    jobs.into_iter()
        .map(|(name, ab)| {
            let result = p.joint_train(ab.clamp(), Some(&test), |_| {})?;
            let out = run.dir.join("ablations").join(&name);
            let report = write_outputs(run, &p, &out, &format!("ablate {name}"), &result, &test, opts)?;
            Ok((name, report))
        })
        .collect()
}

/// Load the final members saved by `search`.
pub fn load_members(run: &Run, inputs: &crate::sup::SupInputs) -> Result<Vec<(String, SupModel)>> {
    let best: BestConfig = read_json(&run.path(BEST_CONFIG_FILE))?;
    best.sup_models
        .iter()
        .map(|name| {
            let path = run.path(CHECKPOINT_DIR).join(format!("{name}.ckpt"));
            let ckpt = Checkpoint::load(&path)?;
            let (spec, model) = SupModel::from_checkpoint(&ckpt, inputs)?;
            Ok((spec.name, model))
        })
        .collect()
}

/// Ensemble score matrix of the saved final members.
pub fn final_scores(run: &Run) -> Result<ScoreMatrix> {
    require(&run.path(BEST_CONFIG_FILE), "run `search` first")?;
    let inputs = sup_inputs(&run.run_config, run.corpus()?)?;
    let members = load_members(run, &inputs)?;
    let matrices: Vec<ScoreMatrix> = members.iter().map(|(n, m)| m.score_matrix(n, &inputs)).collect::<Result<_>>()?;
    let refs: Vec<&ScoreMatrix> = matrices.iter().collect();
    ensemble_matrix(&refs)
}

/// Metrics of the saved final model on one split. Nothing is written.
pub fn evaluate(run: &Run, split: Split) -> Result<Metrics> {
    require(&run.path(BEST_CONFIG_FILE), "run `search` first")?;
    let corpus = run.corpus()?;
    let ann = run.annotations(split)?;
    if ann.is_empty() {
        return Err(Error::invalid(format!("the {split:?} split has no annotations")));
    }
    let label = match split {
        Split::Validation => "validation-lists",
        Split::Test => "test-lists",
    };
    let lists = build_eval_lists(&ann, &corpus, derive_seed(run.run_config.seed, label), NEGATIVES_PER_POSITIVE)?;
    let inputs = sup_inputs(&run.run_config, corpus)?;
    let members = load_members(run, &inputs)?;
    let matrices: Vec<ScoreMatrix> = members.iter().map(|(n, m)| m.score_matrix(n, &inputs)).collect::<Result<_>>()?;
    let refs: Vec<&ScoreMatrix> = matrices.iter().collect();
    Ok(Metrics::from_ranks(&ensemble_ranks(&refs, &lists)?))
}

/// `query<TAB>candidate<TAB>score` for every pair, queries in corpus order.
pub fn scores_tsv(m: &ScoreMatrix) -> String {
    let mut out = String::from("query_id\tcandidate_id\tscore\n");
    for (q, qid) in m.query_ids.iter().enumerate() {
        for (c, cid) in m.candidate_ids.iter().enumerate() {
            out.push_str(&format!("{qid}\t{cid}\t{}\n", m.get(q, c)));
        }
    }
    out
}

/// Reward series: `episode,R,Ru,Rs,baseline,best_so_far`.
pub fn reward_csv(logs: &[EpisodeLog]) -> String {
    let mut out = String::from("episode,R,Ru,Rs,baseline,best_so_far\n");
    let mut best = f64::NEG_INFINITY;
    for l in logs {
        best = best.max(l.r);
        out.push_str(&format!("{},{},{},{},{},{}\n", l.episode, l.r, l.ru, l.rs, l.baseline, best));
    }
    out
}

/// Selection frequency of every component over the trailing
/// [`FREQUENCY_WINDOW`] logs, one row per log.
pub fn selection_csv(logs: &[EpisodeLog], unsup: &[&str], k_values: &[usize], sup: &[&str]) -> String {
    let mut header = vec!["episode".to_string()];
    header.extend(unsup.iter().map(|n| format!("unsup:{n}")));
    header.extend(k_values.iter().map(|k| format!("k:{k}")));
    header.extend(sup.iter().map(|n| format!("sup:{n}")));
    let mut out = header.join(",") + "\n";
    for (i, l) in logs.iter().enumerate() {
        let window = &logs[(i + 1).saturating_sub(FREQUENCY_WINDOW)..=i];
        let n = window.len() as f64;
        let freq = |f: &dyn Fn(&EpisodeLog) -> bool| window.iter().filter(|w| f(w)).count() as f64 / n;
        let mut row = vec![l.episode.to_string()];
        row.extend((0..unsup.len()).map(|j| freq(&|w| w.i1.get(j) == Some(&1)).to_string()));
        row.extend(k_values.iter().map(|&k| freq(&|w| w.k == k).to_string()));
        row.extend((0..sup.len()).map(|j| freq(&|w| w.i3.get(j) == Some(&1)).to_string()));
        out.push_str(&(row.join(",") + "\n"));
    }
    out
}

/// Render `reports/rewards.csv` and `reports/selection.csv` from the
/// episode log of `dir` (a run or ablation directory).
pub fn report(run: &Run, dir: &Path) -> Result<Vec<PathBuf>> {
    let episodes = dir.join(EPISODES_FILE);
    require(&episodes, "run `search` first")?;
    let logs = read_episodes(&episodes)?;
    let reports = dir.join(REPORTS_DIR);
    let rewards = reports.join("rewards.csv");
    let selection = reports.join("selection.csv");
    write(&rewards, reward_csv(&logs))?;
    let rc = &run.run_config;
    write(&selection, selection_csv(&logs, &rc.unsup.names(), &rc.k_values, &rc.sup.names()))?;
    Ok(vec![rewards, selection])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(episode: usize, i1: Vec<u8>, k: usize, i3: Vec<u8>, r: f64) -> EpisodeLog {
        EpisodeLog {
            episode,
            i1,
            k_index: 0,
            k,
            i3,
            ru: r / 2.0,
            rs: r / 2.0,
            r,
            baseline: 0.0,
            log_prob: -1.0,
            forced: false,
        }
    }

    #[test]
    fn reward_series_tracks_running_best() {
        let logs = vec![log(0, vec![1], 10, vec![1], 0.5), log(1, vec![1], 10, vec![1], 0.3), log(2, vec![1], 10, vec![1], 0.9)];
        let csv = reward_csv(&logs);
        let best: Vec<&str> = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
        assert_eq!(best, vec!["0.5", "0.5", "0.9"]);
    }

    #[test]
    fn selection_frequencies_use_a_trailing_window() {
        let logs: Vec<EpisodeLog> = (0..60).map(|e| log(e, vec![u8::from(e >= 50), 1], if e % 2 == 0 { 10 } else { 20 }, vec![1], 1.0)).collect();
        let csv = selection_csv(&logs, &["a", "b"], &[10, 20], &["s"]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "episode,unsup:a,unsup:b,k:10,k:20,sup:s");
        assert_eq!(lines.len(), 61);
        assert_eq!(lines[1], "0,0,1,1,0,1");
        // window of the last row covers episodes 10..=59, ten of which pick `a`
        assert_eq!(lines[60], "59,0.2,1,0.5,0.5,1");
    }

    #[test]
    fn tsv_lists_every_pair() {
        let m = ScoreMatrix::new("x", vec!["q1".into()], vec!["c1".into(), "c2".into()], vec![0.5, -1.0]).unwrap();
        assert_eq!(scores_tsv(&m), "query_id\tcandidate_id\tscore\nq1\tc1\t0.5\nq1\tc2\t-1\n");
    }

    #[test]
    fn masks_reject_unknown_names() {
        assert_eq!(mask_of(vec!["a", "b"], &["b".into()], "x").unwrap(), vec![false, true]);
        assert!(mask_of(vec!["a"], &["z".into()], "x").is_err());
    }
}
