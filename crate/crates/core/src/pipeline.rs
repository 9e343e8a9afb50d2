//! Three-stage detection: profiling, adversarial probing, judgment.
//!
//! Stage 1 runs the enabled profilers concurrently. Stage 2 runs
//! Generator-Mimic / Detector-Enhancer rounds strictly in sequence. Stage 3
//! hands everything to a [`Judge`]: the Synthesis Judge agent, or a
//! majority-vote heuristic when the judge is ablated.

use std::sync::Arc;
use std::time::Instant;

use async_trait::async_trait;
use futures::future::try_join_all;
use thiserror::Error;
use tracing::debug;

use crate::agents::{self, AgentContext, AgentError, TemplateSet};
use crate::gateway::{ChatBackend, GatewayError, MeteredBackend};
use crate::model::{
    AgentId, AuthorshipLabel, DetectionResult, Leaning, ModelError, PipelineConfig,
    ProbingTranscript, ProfileSet, TextSample, Verdict, VerdictSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Profiling,
    Probing,
    Judgment,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Profiling => "profiling",
            Stage::Probing => "probing",
            Stage::Judgment => "judgment",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ModelError),
    #[error("sample {sample_id} failed during {stage}: {source}")]
    SampleFailed {
        sample_id: String,
        stage: Stage,
        source: AgentError,
    },
}

impl PipelineError {
    pub fn gateway_error(&self) -> Option<&GatewayError> {
        match self {
            PipelineError::SampleFailed {
                source: AgentError::Gateway(g),
                ..
            } => Some(g),
            _ => None,
        }
    }

    pub fn is_replay_miss(&self) -> bool {
        self.gateway_error().is_some_and(GatewayError::is_replay_miss)
    }
}

/// Stage-3 strategy.
#[async_trait]
pub trait Judge: Send + Sync {
    fn source(&self) -> VerdictSource;

    async fn judge(
        &self,
        profiles: &ProfileSet,
        transcript: &ProbingTranscript,
        templates: &TemplateSet,
        ctx: &AgentContext<'_>,
        cfg: &PipelineConfig,
    ) -> Result<Verdict, AgentError>;
}

pub struct SynthesisJudge;

#[async_trait]
impl Judge for SynthesisJudge {
    fn source(&self) -> VerdictSource {
        VerdictSource::SynthesisJudge
    }

    async fn judge(
        &self,
        profiles: &ProfileSet,
        transcript: &ProbingTranscript,
        templates: &TemplateSet,
        ctx: &AgentContext<'_>,
        cfg: &PipelineConfig,
    ) -> Result<Verdict, AgentError> {
        agents::synthesize_judgment(
            profiles,
            transcript,
            templates.get(AgentId::Sj),
            ctx,
            cfg.parse_retry_limit,
        )
        .await
    }
}

pub struct HeuristicJudge;

#[async_trait]
impl Judge for HeuristicJudge {
    fn source(&self) -> VerdictSource {
        VerdictSource::Heuristic
    }

    async fn judge(
        &self,
        profiles: &ProfileSet,
        transcript: &ProbingTranscript,
        _: &TemplateSet,
        _: &AgentContext<'_>,
        _: &PipelineConfig,
    ) -> Result<Verdict, AgentError> {
        Ok(heuristic_judgment(profiles, transcript))
    }
}

/// Majority vote over the decisive leanings of every present profile plus the
/// final refinement. Ties (including no decisive votes) go to the final
/// refinement's leaning when decisive, otherwise to Human.
pub fn heuristic_judgment(profiles: &ProfileSet, transcript: &ProbingTranscript) -> Verdict {
    let final_leaning = transcript.last().map(|r| r.refinement.leaning());
    let leanings: Vec<Leaning> = profiles
        .iter()
        .map(|p| p.leaning())
        .chain(final_leaning)
        .collect();
    let machine = leanings.iter().filter(|l| **l == Leaning::Machine).count();
    let human = leanings.iter().filter(|l| **l == Leaning::Human).count();
    let uncertain = leanings.len() - machine - human;
    let (label, rule) = if machine > human {
        (AuthorshipLabel::Machine, "majority")
    } else if human > machine {
        (AuthorshipLabel::Human, "majority")
    } else if let Some(l) = final_leaning.and_then(Leaning::decisive) {
        (l, "tie broken by final refinement")
    } else {
        (AuthorshipLabel::Human, "tie defaulted to human")
    };
    let rationale = format!(
        "heuristic vote: machine={machine} human={human} uncertain={uncertain}; {rule} -> {label}"
    );
    Verdict::new(label, None, rationale, false, VerdictSource::Heuristic)
        .expect("heuristic verdict has no confidence")
}

/// A configured detector. Cheap to clone and share across tasks.
#[derive(Clone)]
pub struct Pipeline {
    cfg: Arc<PipelineConfig>,
    templates: Arc<TemplateSet>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, templates: TemplateSet) -> Result<Self, PipelineError> {
        cfg.validate()?;
        Ok(Self {
            cfg: Arc::new(cfg),
            templates: Arc::new(templates),
        })
    }

    /// Pipeline with the bundled templates.
    pub fn with_defaults(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        let templates = TemplateSet::builtin(cfg.sampling);
        Self::new(cfg, templates)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    fn judge(&self) -> &'static dyn Judge {
        if self.cfg.enable_judge {
            &SynthesisJudge
        } else {
            &HeuristicJudge
        }
    }

    fn context<'a>(&'a self, backend: &'a dyn ChatBackend) -> AgentContext<'a> {
        AgentContext {
            backend,
            model_id: &self.cfg.model_id,
            max_text_chars: self.cfg.max_text_chars,
        }
    }

    /// Runs every enabled profiler concurrently.
    pub async fn run_stage1(
        &self,
        sample: &TextSample,
        backend: &dyn ChatBackend,
    ) -> Result<ProfileSet, AgentError> {
        let ctx = self.context(backend);
        let calls = self.cfg.enabled_dimensions().into_iter().map(|d| {
            let spec = self.templates.get(d.agent());
            agents::run_profiler(d, sample.text(), spec, &ctx)
        });
        let profiles = try_join_all(calls).await?;
        Ok(ProfileSet::from_profiles(profiles)?)
    }

    /// Runs `rounds` probing rounds; round k's challenge is only requested
    /// after round k-1's refinement has arrived.
    pub async fn run_stage2(
        &self,
        profiles: &ProfileSet,
        backend: &dyn ChatBackend,
    ) -> Result<ProbingTranscript, AgentError> {
        if !self.cfg.enable_probing || self.cfg.rounds == 0 {
            return Err(AgentError::Precondition(
                "probing requires enable_probing and rounds >= 1".into(),
            ));
        }
        let ctx = self.context(backend);
        let mut transcript = ProbingTranscript::empty();
        for k in 1..=self.cfg.rounds {
            let argument = agents::generate_argument(
                profiles,
                &transcript,
                k,
                self.templates.get(AgentId::Gm),
                &ctx,
            )
            .await?;
            let refinement =
                agents::refine_analysis(profiles, &argument, self.templates.get(AgentId::De), &ctx)
                    .await?;
            transcript.push(argument, refinement)?;
        }
        Ok(transcript)
    }

    pub async fn run_stage3(
        &self,
        profiles: &ProfileSet,
        transcript: &ProbingTranscript,
        backend: &dyn ChatBackend,
    ) -> Result<Verdict, AgentError> {
        let ctx = self.context(backend);
        self.judge()
            .judge(profiles, transcript, &self.templates, &ctx, &self.cfg)
            .await
    }

    /// Full detection for one sample. Errors identify the failing stage.
    pub async fn detect(
        &self,
        sample: &TextSample,
        backend: &dyn ChatBackend,
    ) -> Result<DetectionResult, PipelineError> {
        let started = Instant::now();
        let metered = MeteredBackend::new(backend);
        let fail = |stage: Stage| {
            move |source: AgentError| PipelineError::SampleFailed {
                sample_id: sample.id().to_string(),
                stage,
                source,
            }
        };

        let profiles = self
            .run_stage1(sample, &metered)
            .await
            .map_err(fail(Stage::Profiling))?;
        let transcript = if self.cfg.enable_probing {
            self.run_stage2(&profiles, &metered)
                .await
                .map_err(fail(Stage::Probing))?
        } else {
            ProbingTranscript::empty()
        };
        let verdict = self
            .run_stage3(&profiles, &transcript, &metered)
            .await
            .map_err(fail(Stage::Judgment))?;

        let result = DetectionResult {
            sample_id: sample.id().to_string(),
            verdict,
            profiles,
            transcript,
            latency_seconds: started.elapsed().as_secs_f64(),
            llm_calls: metered.calls(),
            token_usage: metered.usage(),
        };
        debug!(sample = sample.id(), label = %result.verdict.label, calls = result.llm_calls, "detected");
        Ok(result)
    }
}
