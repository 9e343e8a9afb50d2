//! Batch evaluation and the experiment runners built on it.

mod metrics;
mod report;

use std::time::Instant;

use futures::stream::{self, StreamExt};
use thiserror::Error;

use crate::agents::{AgentError, TemplateSet};
use crate::datasets::Corpus;
use crate::gateway::{ChatBackend, GatewayError, SharedBackend};
use crate::model::{ModelError, PipelineConfig, TokenUsage};
use crate::pipeline::{Pipeline, PipelineError};

pub use metrics::{accuracy, confusion, macro_f1, ConfusionMatrix, MetricError};
pub use report::{
    render_table, strip_volatile, EvalReport, FailureKind, SampleFailure, SampleOutcome,
    VolatileSection, VOLATILE_KEY,
};

pub const VARIANT_FULL: &str = "full";
pub const VARIANT_NO_LS: &str = "w/o LS";
pub const VARIANT_NO_SC: &str = "w/o SC";
pub const VARIANT_NO_RL: &str = "w/o RL";
pub const VARIANT_NO_PROBING: &str = "w/o Adversarial Probing";
pub const VARIANT_NO_JUDGE: &str = "w/o Synthesis Judge";

pub const ABLATION_VARIANTS: [&str; 6] = [
    VARIANT_FULL,
    VARIANT_NO_LS,
    VARIANT_NO_SC,
    VARIANT_NO_RL,
    VARIANT_NO_PROBING,
    VARIANT_NO_JUDGE,
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ModelError),
    #[error("backend unavailable: {0}")]
    Backend(#[from] GatewayError),
    #[error("{0}")]
    Precondition(String),
}

impl From<PipelineError> for EvalError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(m) => EvalError::Config(m),
            other => EvalError::Precondition(other.to_string()),
        }
    }
}

/// One runner row: the variant key and its report, or why it could not run.
pub type Row<K> = (K, Result<EvalReport, EvalError>);

fn failure_of(err: &PipelineError) -> SampleFailure {
    let (sample_id, stage, source) = match err {
        PipelineError::SampleFailed {
            sample_id,
            stage,
            source,
        } => (sample_id.clone(), stage.to_string(), source),
        PipelineError::Config(_) => unreachable!("config is validated before evaluation"),
    };
    let kind = match source {
        AgentError::Gateway(g) => match g {
            GatewayError::ReplayMiss { .. } => FailureKind::ReplayMiss,
            GatewayError::Auth(_) => FailureKind::Auth,
            GatewayError::RateLimited { .. } => FailureKind::RateLimited,
            GatewayError::Transport(_) => FailureKind::Transport,
            GatewayError::Api { .. } => FailureKind::Api,
            GatewayError::MalformedResponse(_) => FailureKind::MalformedResponse,
            _ => FailureKind::Gateway,
        },
        _ => FailureKind::Agent,
    };
    SampleFailure {
        sample_id,
        stage,
        kind,
        message: source.to_string(),
    }
}

/// Runs detection over every sample, at most `concurrency_limit` at a time,
/// and scores the results. Per-sample failures are recorded, not fatal.
pub async fn evaluate(
    corpus: &Corpus,
    pipeline: &Pipeline,
    backend: &dyn ChatBackend,
    label: &str,
) -> EvalReport {
    let started = Instant::now();
    let limit = pipeline.config().concurrency_limit.max(1);
    let mut results: Vec<_> = stream::iter(corpus.samples().iter().enumerate())
        .map(|(i, s)| async move { (i, pipeline.detect(s, backend).await) })
        .buffer_unordered(limit)
        .collect()
        .await;
    let total_seconds = started.elapsed().as_secs_f64();
    results.sort_by_key(|(i, _)| *i);

    let mut cm = ConfusionMatrix::default();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    let mut latencies = Vec::new();
    let mut usage = TokenUsage::default();
    for ((_, result), sample) in results.into_iter().zip(corpus.samples()) {
        match result {
            Ok(r) => {
                let gold = sample.gold_label().expect("corpus samples are labeled");
                cm.record(r.verdict.label, gold);
                usage.prompt += r.token_usage.prompt;
                usage.completion += r.token_usage.completion;
                latencies.push((r.sample_id.clone(), r.latency_seconds));
                outcomes.push(SampleOutcome {
                    sample_id: r.sample_id,
                    gold,
                    predicted: r.verdict.label,
                    confidence: r.verdict.confidence,
                    parse_failed: r.verdict.parse_failed,
                    source: r.verdict.source,
                    llm_calls: r.llm_calls,
                });
            }
            Err(e) => failures.push(failure_of(&e)),
        }
    }

    let n_scored = outcomes.len();
    let mean = |sum: f64| (n_scored > 0).then(|| sum / n_scored as f64);
    EvalReport {
        corpus: corpus.name().to_string(),
        label: label.to_string(),
        config: pipeline.config().clone(),
        template_digest: pipeline.templates().digest(),
        n_samples: corpus.len(),
        n_scored,
        confusion: cm,
        accuracy: accuracy(&cm).ok(),
        macro_f1: macro_f1(&cm).ok(),
        avg_llm_calls: mean(outcomes.iter().map(|o| o.llm_calls as f64).sum()),
        token_usage: usage,
        parse_failure_count: outcomes.iter().filter(|o| o.parse_failed).count(),
        failed_sample_ids: failures.iter().map(|f| f.sample_id.clone()).collect(),
        failures,
        outcomes,
        volatile: VolatileSection {
            note: "wall-clock and backend details; excluded from reproducibility comparisons".into(),
            backend: backend.name().to_string(),
            avg_latency_seconds: mean(latencies.iter().map(|(_, l)| l).sum()),
            total_seconds,
            sample_latency_seconds: latencies,
        },
    }
}

/// The full configuration and its five single-component ablations.
pub fn ablation_configs(base: &PipelineConfig) -> Vec<(&'static str, PipelineConfig)> {
    ABLATION_VARIANTS
        .iter()
        .map(|&name| {
            let mut cfg = base.clone();
            match name {
                VARIANT_NO_LS => cfg.include_ls = false,
                VARIANT_NO_SC => cfg.include_sc = false,
                VARIANT_NO_RL => cfg.include_rl = false,
                VARIANT_NO_PROBING => cfg.enable_probing = false,
                VARIANT_NO_JUDGE => cfg.enable_judge = false,
                _ => {}
            }
            (name, cfg)
        })
        .collect()
}

async fn evaluate_config(
    corpus: &Corpus,
    cfg: PipelineConfig,
    templates: &TemplateSet,
    backend: &dyn ChatBackend,
    label: &str,
) -> Result<EvalReport, EvalError> {
    let pipeline = Pipeline::new(cfg, templates.clone())?;
    Ok(evaluate(corpus, &pipeline, backend, label).await)
}

/// Evaluates the six ablation variants in canonical order.
pub async fn run_ablations(
    corpus: &Corpus,
    base: &PipelineConfig,
    templates: &TemplateSet,
    backend: &dyn ChatBackend,
) -> Vec<Row<String>> {
    let mut rows = Vec::new();
    for (name, cfg) in ablation_configs(base) {
        let report = evaluate_config(corpus, cfg, templates, backend, name).await;
        rows.push((name.to_string(), report));
    }
    rows
}

/// One evaluation per round count, in the given order.
pub async fn run_round_sweep(
    corpus: &Corpus,
    base: &PipelineConfig,
    templates: &TemplateSet,
    rounds_list: &[u32],
    backend: &dyn ChatBackend,
) -> Result<Vec<Row<u32>>, EvalError> {
    if rounds_list.is_empty() || rounds_list.contains(&0) {
        return Err(EvalError::Precondition(
            "rounds list must be nonempty with every entry >= 1".into(),
        ));
    }
    let mut rows = Vec::new();
    for &rounds in rounds_list {
        let cfg = PipelineConfig {
            rounds,
            ..base.clone()
        };
        let label = format!("rounds={rounds}");
        rows.push((rounds, evaluate_config(corpus, cfg, templates, backend, &label).await));
    }
    Ok(rows)
}

/// One evaluation per backbone. `backend_for` builds the backend serving a
/// model id; a failure there is recorded on that row only.
pub async fn run_backbone_sweep<F>(
    corpus: &Corpus,
    base: &PipelineConfig,
    templates: &TemplateSet,
    model_ids: &[String],
    backend_for: F,
) -> Vec<Row<String>>
where
    F: Fn(&str) -> Result<SharedBackend, GatewayError>,
{
    let mut rows = Vec::new();
    for model_id in model_ids {
        let report = match backend_for(model_id) {
            Ok(backend) => {
                let cfg = PipelineConfig {
                    model_id: model_id.clone(),
                    ..base.clone()
                };
                evaluate_config(corpus, cfg, templates, backend.as_ref(), model_id).await
            }
            Err(e) => Err(e.into()),
        };
        rows.push((model_id.clone(), report));
    }
    rows
}
