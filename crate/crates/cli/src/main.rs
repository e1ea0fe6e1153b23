use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use autoweaks::config::ExperimentConfig;
use autoweaks::corpus::Split;
use autoweaks::experiment::{self, AblationMode, Run, SearchOptions, CONFIG_FILE};
use autoweaks::synth::SynthParams;

#[derive(Parser)]
#[command(name = "autoweaks", version, about = "Weakly supervised query/candidate ranking with an automated configuration search")]
struct Cli {
    /// Only print errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-topic corpus and its annotations.
    GenSynth(GenSynthArgs),
    /// Build the corpus and the validation/test split inside a run directory.
    Ingest(ConfigArgs),
    /// Pretrain every unsupervised model (cached).
    Pretrain(ConfigArgs),
    /// Search configurations, retrain the best one and write the report.
    Search(SearchArgs),
    /// Search with one step held fixed.
    Ablate(AblateArgs),
    /// Evaluate the saved final model on a split and print JSON metrics.
    Eval(EvalArgs),
    /// Render episode logs into CSV time series.
    Report(ReportArgs),
    /// Write ensemble scores of the saved final model as TSV.
    Score(ScoreArgs),
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long, default_value_t = 100)]
    queries: usize,
    #[arg(long, default_value_t = 300)]
    candidates: usize,
    #[arg(long, default_value_t = 6)]
    topics: usize,
    #[arg(long)]
    vocab_per_topic: Option<usize>,
    #[arg(long)]
    common_vocab: Option<usize>,
    #[arg(long)]
    doc_len: Option<usize>,
    #[arg(long)]
    noise_rate: Option<f64>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory for documents.jsonl and annotations.tsv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Run directory.
    #[arg(long, default_value = "run")]
    run: PathBuf,
    /// Base key=value configuration (ingest only; later commands read the
    /// copy in the run directory).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    documents: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Comma-separated K_VALUES.
    #[arg(long)]
    k_values: Option<String>,
    /// Comma-separated unsupervised models (name or name:scores.csv).
    #[arg(long)]
    unsup: Option<String>,
    /// Comma-separated supervised models.
    #[arg(long)]
    sup: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Any other key=value override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> Vec<String> {
        let mut o = Vec::new();
        let mut add = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push(format!("{k}={v}"));
            }
        };
        add("documents", self.documents.as_ref().map(|p| p.display().to_string()));
        add("annotations", self.annotations.as_ref().map(|p| p.display().to_string()));
        add("seed", self.seed.map(|s| s.to_string()));
        add("episodes", self.episodes.map(|s| s.to_string()));
        add("k_values", self.k_values.clone());
        add("unsup_models", self.unsup.clone());
        add("sup_models", self.sup.clone());
        add("workers", self.workers.map(|s| s.to_string()));
        o.extend(self.set.iter().cloned());
        o
    }

    fn ingest_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply_overrides(&self.overrides())?;
        cfg.output = self.run.clone();
        Ok(cfg)
    }

    /// Open the run, ingesting first when it does not exist yet.
    fn open(&self, quiet: bool) -> Result<Run> {
        if !self.run.join(CONFIG_FILE).exists() {
            if self.documents.is_none() && self.config.is_none() {
                bail!("{} is not an ingested run directory; pass --documents/--annotations or run `ingest`", self.run.display());
            }
            ingest(self, quiet)?;
        } else if self.config.is_some() {
            bail!("--config applies only when creating a run; use --set to override keys of {}", self.run.display());
        }
        Ok(Run::open(&self.run, &self.overrides())?)
    }
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Also score the all-models baseline and every unsupervised model on
    /// the test split.
    #[arg(long)]
    baselines: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    FixUnsup,
    FixK,
    FixSup,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Comma-separated models to clamp (fix-unsup, fix-sup).
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    baselines: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Validation,
    Test,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, default_value = "run")]
    run: PathBuf,
    #[arg(long, value_enum, default_value = "validation")]
    split: SplitArg,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, default_value = "run")]
    run: PathBuf,
    /// Directory holding episodes.jsonl, e.g. an ablation directory;
    /// defaults to the run directory.
    #[arg(long)]
    dir: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long, default_value = "run")]
    run: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn note(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn ingest(args: &ConfigArgs, quiet: bool) -> Result<()> {
    let cfg = args.ingest_config()?;
    let s = experiment::ingest(&cfg)?;
    note(
        quiet,
        format!(
            "ingested {} queries, {} candidates, {} words; {} validation / {} test queries into {}",
            s.queries,
            s.candidates,
            s.vocabulary,
            s.validation_queries,
            s.test_queries,
            cfg.output.display()
        ),
    );
    Ok(())
}

/// Write to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.context("writing to stdout"),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn split_list(s: &Option<String>) -> Vec<String> {
    s.as_deref()
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn progress(quiet: bool, every: usize) -> impl FnMut(&autoweaks::controller::EpisodeLog) {
    move |l| {
        if !quiet && (l.episode + 1) % every == 0 {
            eprintln!("episode {:>4}  R {:.4}  Ru {:.4}  Rs {:.4}  baseline {:.4}", l.episode + 1, l.r, l.ru, l.rs, l.baseline);
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let quiet = cli.quiet;
    match cli.command {
        Command::GenSynth(a) => {
            let d = SynthParams::default();
            let p = SynthParams {
                n_queries: a.queries,
                n_candidates: a.candidates,
                n_topics: a.topics,
                vocab_per_topic: a.vocab_per_topic.unwrap_or(d.vocab_per_topic),
                common_vocab: a.common_vocab.unwrap_or(d.common_vocab),
                doc_len: a.doc_len.unwrap_or(d.doc_len),
                noise_rate: a.noise_rate.unwrap_or(d.noise_rate),
                seed: a.seed,
            };
            let (docs, ann) = experiment::gen_synth(&p, &a.out)?;
            note(quiet, format!("wrote {} and {}", docs.display(), ann.display()));
        }
        Command::Ingest(a) => ingest(&a, quiet)?,
        Command::Pretrain(a) => {
            let run = a.open(quiet)?;
            let corpus = run.corpus()?;
            let (_, hits) = run.pretrain(&corpus)?;
            for (name, hit) in hits {
                note(quiet, if hit { format!("cache hit: {name}") } else { format!("computed: {name}") });
            }
        }
        Command::Search(a) => {
            let run = a.cfg.open(quiet)?;
            let report = experiment::search(&run, &SearchOptions { baselines: a.baselines }, progress(quiet, 10))?;
            note(quiet, format!("wrote {}", run.path(experiment::REPORT_FILE).display()));
            print_json(&report)?;
        }
        Command::Ablate(a) => {
            let run = a.cfg.open(quiet)?;
            let mode = match a.mode {
                Mode::FixK => AblationMode::FixK,
                Mode::FixUnsup | Mode::FixSup => {
                    let models = split_list(&a.models);
                    if models.is_empty() {
                        bail!("--models is required for this ablation");
                    }
                    if matches!(a.mode, Mode::FixUnsup) {
                        AblationMode::FixUnsup(models)
                    } else {
                        AblationMode::FixSup(models)
                    }
                }
            };
            let reports = experiment::ablate(&run, &mode, &SearchOptions { baselines: a.baselines })?;
            let out: std::collections::BTreeMap<String, experiment::Report> = reports.into_iter().collect();
            print_json(&out)?;
        }
        Command::Eval(a) => {
            let run = Run::open::<&str>(&a.run, &[])?;
            let split = match a.split {
                SplitArg::Validation => Split::Validation,
                SplitArg::Test => Split::Test,
            };
            print_json(&experiment::evaluate(&run, split)?)?;
        }
        Command::Report(a) => {
            let run = Run::open::<&str>(&a.run, &[])?;
            let dir = a.dir.unwrap_or_else(|| a.run.clone());
            for p in experiment::report(&run, &dir)? {
                note(quiet, format!("wrote {}", p.display()));
            }
        }
        Command::Score(a) => {
            let run = Run::open::<&str>(&a.run, &[])?;
            let tsv = experiment::scores_tsv(&experiment::final_scores(&run)?);
            match a.out {
                Some(p) => write_file(&p, &tsv)?,
                None => emit(&tsv)?,
            }
        }
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    e.chain()
        .find_map(|c| c.downcast_ref::<autoweaks::Error>())
        .map_or("usage", |e| e.kind())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": error_kind(&e), "message": e.to_string() });
            eprintln!("{line}");
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
