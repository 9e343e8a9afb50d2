//! The `camf` command line: single-text detection and the experiment grid.

pub mod config;

use std::io::Read;
use std::path::{Path, PathBuf};

use camf_core::agents::TemplateSet;
use camf_core::datasets::{self, Corpus};
use camf_core::eval::{self, render_table, EvalError, EvalReport, Row};
use camf_core::gateway::{BackendRegistry, BackendSettings, LiveSettings, SharedBackend};
use camf_core::model::TextSample;
use camf_core::pipeline::Pipeline;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use config::{RawConfig, Settings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SAMPLE_FAILED: i32 = 2;
pub const EXIT_REPLAY_MISS: i32 = 3;

pub const DEFAULT_SWEEP_ROUNDS: [u32; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Parser)]
#[command(name = "camf", version, about = "Multi-agent detector of machine-generated text")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify one text read from --file or stdin.
    Detect {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        file: Option<PathBuf>,
        /// Write the full detection result as JSON.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Evaluate the configured detector on a corpus.
    Eval(CorpusArgs),
    /// Evaluate the full detector and its five ablations.
    Ablate(CorpusArgs),
    /// Evaluate over several probing round counts (--rounds 1,2,3).
    SweepRounds(CorpusArgs),
    /// Evaluate with several backbone models.
    SweepBackbones {
        #[command(flatten)]
        run: CorpusArgs,
        /// Comma-separated model ids.
        #[arg(long, value_delimiter = ',', required = true)]
        models: Vec<String>,
    },
    /// Write the bundled 20-sample toy corpus.
    MakeToy {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Write the report JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flags shared by every run command; each mirrors a config-file key.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// live | mock:scripted[:rules.json] | mock:counting | replay:<path>
    #[arg(long)]
    pub backend: Option<String>,
    /// Shorthand for --backend replay:<path>.
    #[arg(long)]
    pub replay: Option<String>,
    /// Append every exchange to this cassette; `{model}` expands to the model id.
    #[arg(long)]
    pub record: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<String>,
    #[arg(long)]
    pub rounds: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub include_ls: Option<bool>,
    #[arg(long)]
    pub include_sc: Option<bool>,
    #[arg(long)]
    pub include_rl: Option<bool>,
    #[arg(long)]
    pub enable_probing: Option<bool>,
    #[arg(long)]
    pub enable_judge: Option<bool>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub parse_retry_limit: Option<u32>,
    #[arg(long)]
    pub max_text_chars: Option<usize>,
    /// Per-request timeout in seconds for the live backend.
    #[arg(long)]
    pub timeout: Option<u64>,
    #[arg(long)]
    pub template_dir: Option<String>,
    #[arg(long)]
    pub limit_per_class: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    SampleFailed(String),
    #[error("{0}")]
    ReplayMiss(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::SampleFailed(_) => EXIT_SAMPLE_FAILED,
            CliError::ReplayMiss(_) => EXIT_REPLAY_MISS,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

impl CommonArgs {
    /// Flags as config pairs. `rounds` is left out when `rounds_is_list`.
    fn to_raw(&self, rounds_is_list: bool) -> Result<RawConfig, CliError> {
        let mut raw = RawConfig::default();
        let mut set = |key: &str, value: Option<String>| -> Result<(), CliError> {
            match value {
                Some(v) => raw.set(&format!("--{}", key.replace('_', "-")), key, &v).map_err(usage),
                None => Ok(()),
            }
        };
        fn s<T: ToString>(v: &Option<T>) -> Option<String> {
            v.as_ref().map(ToString::to_string)
        }
        set("backend", s(&self.backend))?;
        set("replay", s(&self.replay))?;
        set("record", s(&self.record))?;
        set("cache_dir", s(&self.cache_dir))?;
        if !rounds_is_list {
            set("rounds", s(&self.rounds))?;
        }
        set("model", s(&self.model))?;
        set("include_ls", s(&self.include_ls))?;
        set("include_sc", s(&self.include_sc))?;
        set("include_rl", s(&self.include_rl))?;
        set("enable_probing", s(&self.enable_probing))?;
        set("enable_judge", s(&self.enable_judge))?;
        set("temperature", s(&self.temperature))?;
        set("top_p", s(&self.top_p))?;
        set("max_tokens", s(&self.max_tokens))?;
        set("concurrency", s(&self.concurrency))?;
        set("parse_retry_limit", s(&self.parse_retry_limit))?;
        set("max_text_chars", s(&self.max_text_chars))?;
        set("timeout", s(&self.timeout))?;
        set("template_dir", s(&self.template_dir))?;
        set("limit_per_class", s(&self.limit_per_class))?;
        set("seed", s(&self.seed))?;
        Ok(raw)
    }

    /// Defaults, overridden by the config file, overridden by flags.
    pub fn settings(&self, rounds_is_list: bool) -> Result<Settings, CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::load(path).map_err(usage)?,
            None => RawConfig::default(),
        };
        raw.merge(self.to_raw(rounds_is_list)?);
        raw.resolve().map_err(usage)
    }
}

fn parse_rounds_list(s: &str) -> Result<Vec<u32>, CliError> {
    s.split(',')
        .map(|r| {
            r.trim()
                .parse::<u32>()
                .ok()
                .filter(|r| *r >= 1)
                .ok_or_else(|| usage(format!("bad round count `{r}` in --rounds")))
        })
        .collect()
}

fn backend_settings(settings: &Settings, model_id: &str) -> BackendSettings {
    let mut live = LiveSettings::from_env();
    live.timeout = settings.timeout();
    BackendSettings {
        live,
        cache_dir: settings.cache_dir.clone(),
        record: settings.record.clone(),
        model_id: Some(model_id.to_string()),
    }
}

fn build_backend(settings: &Settings, model_id: &str) -> Result<SharedBackend, CliError> {
    BackendRegistry::with_builtins()
        .build(&settings.backend, &backend_settings(settings, model_id))
        .map_err(|e| usage(format!("backend `{}`: {e}", settings.backend)))
}

fn templates(settings: &Settings) -> Result<TemplateSet, CliError> {
    let sampling = settings.pipeline.sampling;
    match &settings.template_dir {
        Some(dir) => TemplateSet::from_dir(dir, sampling).map_err(usage),
        None => Ok(TemplateSet::builtin(sampling)),
    }
}

fn load_corpus(path: &Path, settings: &Settings) -> Result<Corpus, CliError> {
    let corpus = datasets::load_corpus(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(match settings.limit_per_class {
        Some(n) => datasets::subsample(&corpus, n, settings.seed),
        None => corpus,
    })
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn rows_json<K: serde::Serialize>(key_name: &str, rows: &[Row<K>]) -> String {
    let items: Vec<_> = rows
        .iter()
        .map(|(k, r)| match r {
            Ok(report) => json!({ key_name: k, "report": report }),
            Err(e) => json!({ key_name: k, "error": e.to_string() }),
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&items).expect("rows serialize");
    s.push('\n');
    s
}

fn check_replay<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> Result<(), CliError> {
    let missed: Vec<&str> = reports
        .into_iter()
        .filter(|r| r.has_replay_miss())
        .map(|r| r.label.as_str())
        .collect();
    if missed.is_empty() {
        Ok(())
    } else {
        Err(CliError::ReplayMiss(format!(
            "replay misses in: {} (cassette does not match the current prompts)",
            missed.join(", ")
        )))
    }
}

fn finish_rows<K: serde::Serialize + ToString>(
    title: &str,
    key_name: &str,
    rows: Vec<Row<K>>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    print!(
        "{}",
        render_table(
            title,
            rows.iter().map(|(k, r)| (k.to_string(), r.as_ref().map_err(EvalError::to_string)))
        )
    );
    if let Some(path) = out {
        write_output(path, &rows_json(key_name, &rows))?;
    }
    check_replay(rows.iter().filter_map(|(_, r)| r.as_ref().ok()))
}

async fn cmd_detect(common: &CommonArgs, file: Option<&Path>, transcript: Option<&Path>) -> Result<(), CliError> {
    let settings = common.settings(false)?;
    let (id, text) = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            let id = path
                .file_stem()
                .map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned());
            (id, text)
        }
        None => {
            let mut text = String::new();
            std::io::stdin()
                .read_to_string(&mut text)
                .map_err(|e| usage(format!("cannot read stdin: {e}")))?;
            ("stdin".to_string(), text)
        }
    };
    let sample = TextSample::new(id, text.replace("\r\n", "\n"), None, None).map_err(usage)?;
    let backend = build_backend(&settings, &settings.pipeline.model_id)?;
    let pipeline = Pipeline::new(settings.pipeline.clone(), templates(&settings)?).map_err(usage)?;
    let result = pipeline
        .detect(&sample, backend.as_ref())
        .await
        .map_err(|e| CliError::SampleFailed(e.to_string()))?;
    let v = &result.verdict;
    println!(
        "LABEL={} CONFIDENCE={} PARSE_FAILED={}",
        v.label,
        v.confidence.map_or_else(|| "-".into(), |c| c.to_string()),
        v.parse_failed
    );
    if let Some(path) = transcript {
        let mut s = serde_json::to_string_pretty(&result).expect("result serializes");
        s.push('\n');
        write_output(path, &s)?;
    }
    Ok(())
}

async fn cmd_eval(args: &CorpusArgs) -> Result<(), CliError> {
    let settings = args.common.settings(false)?;
    let corpus = load_corpus(&args.corpus, &settings)?;
    let backend = build_backend(&settings, &settings.pipeline.model_id)?;
    let pipeline = Pipeline::new(settings.pipeline.clone(), templates(&settings)?).map_err(usage)?;
    let report = eval::evaluate(&corpus, &pipeline, backend.as_ref(), "eval").await;
    print!("{}", render_table(&format!("corpus {}", corpus.name()), [("eval".to_string(), Ok(&report))]));
    if let Some(path) = &args.out {
        write_output(path, &report.to_json())?;
    }
    check_replay([&report])
}

async fn cmd_ablate(args: &CorpusArgs) -> Result<(), CliError> {
    let settings = args.common.settings(false)?;
    let corpus = load_corpus(&args.corpus, &settings)?;
    let backend = build_backend(&settings, &settings.pipeline.model_id)?;
    let rows = eval::run_ablations(&corpus, &settings.pipeline, &templates(&settings)?, backend.as_ref()).await;
    finish_rows(&format!("ablations on {}", corpus.name()), "variant", rows, args.out.as_deref())
}

async fn cmd_sweep_rounds(args: &CorpusArgs) -> Result<(), CliError> {
    let settings = args.common.settings(true)?;
    let rounds = match &args.common.rounds {
        Some(list) => parse_rounds_list(list)?,
        None => DEFAULT_SWEEP_ROUNDS.to_vec(),
    };
    let corpus = load_corpus(&args.corpus, &settings)?;
    let backend = build_backend(&settings, &settings.pipeline.model_id)?;
    let rows = eval::run_round_sweep(&corpus, &settings.pipeline, &templates(&settings)?, &rounds, backend.as_ref())
        .await
        .map_err(usage)?;
    finish_rows(&format!("round sweep on {}", corpus.name()), "rounds", rows, args.out.as_deref())
}

async fn cmd_sweep_backbones(args: &CorpusArgs, models: &[String]) -> Result<(), CliError> {
    let settings = args.common.settings(false)?;
    let corpus = load_corpus(&args.corpus, &settings)?;
    let registry = BackendRegistry::with_builtins();
    let rows = eval::run_backbone_sweep(&corpus, &settings.pipeline, &templates(&settings)?, models, |model| {
        registry.build(&settings.backend, &backend_settings(&settings, model))
    })
    .await;
    finish_rows(&format!("backbone sweep on {}", corpus.name()), "model_id", rows, args.out.as_deref())
}

pub async fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Detect {
            common,
            file,
            transcript,
        } => cmd_detect(common, file.as_deref(), transcript.as_deref()).await,
        Command::Eval(args) => cmd_eval(args).await,
        Command::Ablate(args) => cmd_ablate(args).await,
        Command::SweepRounds(args) => cmd_sweep_rounds(args).await,
        Command::SweepBackbones { run, models } => cmd_sweep_backbones(run, models).await,
        Command::MakeToy { out } => write_output(out, datasets::toy_corpus_source()),
    }
}
