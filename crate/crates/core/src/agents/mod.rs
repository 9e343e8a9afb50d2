//! The six agent roles: three profilers, the Generator-Mimic and
//! Detector-Enhancer pair, and the Synthesis Judge.
//!
//! Each operation renders its prompt from an [`AgentSpec`], issues one
//! completion (the judge may re-prompt on an unparseable reply), and parses
//! the reply into a domain artifact.

mod parse;
mod template;

use thiserror::Error;

use crate::gateway::{ChatBackend, ChatMessage, ChatRequest, GatewayError};
use crate::model::{
    AdversarialArgument, AgentId, AuthorshipLabel, Dimension, LinguisticProfile, ModelError,
    ProbingTranscript, ProfileSet, RefinedAnalysis, Verdict, VerdictSource,
};

pub use parse::{parse_leaning, parse_verdict};
pub use template::{
    render_prompt, template_file_name, AgentSpec, PromptContext, TemplateSet, PLACEHOLDERS,
};

/// Appended to truncated input text.
pub const TRUNCATION_MARKER: &str = "[TRUNCATED]";

/// Re-prompt sent to the judge when its reply has no verdict line.
pub const FORMAT_REMINDER: &str = "Your reply did not end with a verdict line. Answer again and finish with exactly one line reading `VERDICT: HUMAN` or `VERDICT: MACHINE`, optionally followed by `CONFIDENCE: <number between 0 and 1>`.";

const EMPTY_NARRATIVE: &str = "(no analysis provided)";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("input text is empty")]
    EmptyText,
    #[error("unbound placeholder {{{{{0}}}}}")]
    UnboundPlaceholder(String),
    #[error("template for {agent}: {message}")]
    Template { agent: AgentId, message: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Everything an agent needs besides its spec: the backend and the request
/// settings shared by all agents of one run.
#[derive(Clone, Copy)]
pub struct AgentContext<'a> {
    pub backend: &'a dyn ChatBackend,
    pub model_id: &'a str,
    pub max_text_chars: usize,
}

impl<'a> AgentContext<'a> {
    pub fn new(backend: &'a dyn ChatBackend, model_id: &'a str) -> Self {
        Self {
            backend,
            model_id,
            max_text_chars: crate::model::DEFAULT_MAX_TEXT_CHARS,
        }
    }

    async fn send(&self, spec: &AgentSpec, messages: Vec<ChatMessage>) -> Result<String, AgentError> {
        let request = ChatRequest::new(self.model_id, messages, spec.sampling)?;
        Ok(self.backend.complete(&request).await?.content)
    }
}

fn expect_agent(spec: &AgentSpec, agent: AgentId) -> Result<(), AgentError> {
    if spec.agent_id != agent {
        return Err(AgentError::Precondition(format!(
            "expected a {agent} spec, got {}",
            spec.agent_id
        )));
    }
    Ok(())
}

fn narrative_or_placeholder(s: String) -> String {
    if s.trim().is_empty() {
        EMPTY_NARRATIVE.to_string()
    } else {
        s
    }
}

/// Cuts `text` to `max_chars` characters, appending the truncation marker.
pub fn truncate_text(text: &str, max_chars: usize) -> String {
    match text.char_indices().nth(max_chars) {
        Some((cut, _)) => format!("{}\n{TRUNCATION_MARKER}", &text[..cut]),
        None => text.to_string(),
    }
}

/// Renders present profiles in canonical order under one section header.
pub fn render_profiles(profiles: &ProfileSet) -> String {
    let mut out = String::from("## Linguistic profiles");
    for p in profiles.iter() {
        out.push_str(&format!(
            "\n\n### {} profile\nLeaning: {}\n\n{}",
            p.dimension().title(),
            p.leaning(),
            p.narrative()
        ));
    }
    out
}

fn render_argument(argument: &AdversarialArgument) -> String {
    format!(
        "## Counter-argument from the Generator-Mimic (round {})\n\n{}",
        argument.round_index(),
        argument.narrative()
    )
}

/// What the Generator-Mimic sees of earlier rounds: only the latest refinement.
fn render_previous_refinement(prior: &ProbingTranscript) -> String {
    match prior.last() {
        None => String::new(),
        Some(round) => format!(
            "## Refined assessment from the previous round (round {})\nLeaning: {}\n\n{}",
            round.refinement.round_index(),
            round.refinement.leaning(),
            round.refinement.narrative()
        ),
    }
}

/// Full transcript for the judge; empty when no probing took place, so the
/// judge prompt then carries no probing section at all.
pub fn render_transcript(transcript: &ProbingTranscript) -> String {
    if transcript.is_empty() {
        return String::new();
    }
    let mut out = String::from(
        "## Adversarial consistency review\n\nEach round pairs a Generator-Mimic challenge to the profiles with the Detector-Enhancer's response to it. Consider how convincingly each challenge was answered. The final round holds the most refined assessment.",
    );
    let n = transcript.len();
    for (i, round) in transcript.rounds().iter().enumerate() {
        let k = round.argument.round_index();
        let final_mark = if i + 1 == n { " (final round)" } else { "" };
        out.push_str(&format!(
            "\n\n### Round {k} challenge{final_mark}\n\n{}\n\n### Round {k} response{final_mark}\nLeaning: {}\n\n{}",
            round.argument.narrative(),
            round.refinement.leaning(),
            round.refinement.narrative()
        ));
    }
    out
}

async fn profile(
    dimension: Dimension,
    text: &str,
    spec: &AgentSpec,
    ctx: &AgentContext<'_>,
) -> Result<LinguisticProfile, AgentError> {
    expect_agent(spec, dimension.agent())?;
    if text.trim().is_empty() {
        return Err(AgentError::EmptyText);
    }
    let prompt = PromptContext {
        text: Some(truncate_text(text, ctx.max_text_chars)),
        ..Default::default()
    };
    let raw = ctx.send(spec, render_prompt(spec, &prompt)?).await?;
    let leaning = parse_leaning(&raw);
    let narrative = narrative_or_placeholder(parse::strip_leaning_lines(&raw));
    Ok(LinguisticProfile::new(dimension, narrative, leaning, raw)?)
}

/// Stylistic profile: syntactic complexity, lexical diversity, markers.
pub async fn analyze_style(
    text: &str,
    spec: &AgentSpec,
    ctx: &AgentContext<'_>,
) -> Result<LinguisticProfile, AgentError> {
    profile(Dimension::Stylistic, text, spec, ctx).await
}

/// Semantic profile: topic shifts, contradictions, redundancy, thematic flow.
pub async fn evaluate_coherence(
    text: &str,
    spec: &AgentSpec,
    ctx: &AgentContext<'_>,
) -> Result<LinguisticProfile, AgentError> {
    profile(Dimension::Semantic, text, spec, ctx).await
}

/// Logical profile: argument validity, evidence-claim linkage, fallacies.
pub async fn assess_logic(
    text: &str,
    spec: &AgentSpec,
    ctx: &AgentContext<'_>,
) -> Result<LinguisticProfile, AgentError> {
    profile(Dimension::Logical, text, spec, ctx).await
}

/// Runs the profiler for `dimension`.
pub async fn run_profiler(
    dimension: Dimension,
    text: &str,
    spec: &AgentSpec,
    ctx: &AgentContext<'_>,
) -> Result<LinguisticProfile, AgentError> {
    profile(dimension, text, spec, ctx).await
}

/// Generator-Mimic: challenges the profiles. From round 2 on, the prompt
/// also carries the previous round's refinement.
pub async fn generate_argument(
    profiles: &ProfileSet,
    prior: &ProbingTranscript,
    round_index: u32,
    spec: &AgentSpec,
    ctx: &AgentContext<'_>,
) -> Result<AdversarialArgument, AgentError> {
    expect_agent(spec, AgentId::Gm)?;
    if round_index != prior.next_round_index() {
        return Err(AgentError::Precondition(format!(
            "round {round_index} requested after {} completed rounds",
            prior.len()
        )));
    }
    let prompt = PromptContext {
        profiles: Some(render_profiles(profiles)),
        transcript: Some(render_previous_refinement(prior)),
        round_index: Some(round_index),
        ..Default::default()
    };
    let raw = ctx.send(spec, render_prompt(spec, &prompt)?).await?;
    let narrative = narrative_or_placeholder(raw.trim().to_string());
    Ok(AdversarialArgument::new(round_index, narrative, raw)?)
}

/// Detector-Enhancer: weighs this round's challenge against the profiles.
pub async fn refine_analysis(
    profiles: &ProfileSet,
    argument: &AdversarialArgument,
    spec: &AgentSpec,
    ctx: &AgentContext<'_>,
) -> Result<RefinedAnalysis, AgentError> {
    expect_agent(spec, AgentId::De)?;
    let prompt = PromptContext {
        profiles: Some(render_profiles(profiles)),
        argument: Some(render_argument(argument)),
        round_index: Some(argument.round_index()),
        ..Default::default()
    };
    let raw = ctx.send(spec, render_prompt(spec, &prompt)?).await?;
    let leaning = parse_leaning(&raw);
    let narrative = narrative_or_placeholder(parse::strip_leaning_lines(&raw));
    Ok(RefinedAnalysis::new(argument.round_index(), narrative, leaning, raw)?)
}

/// Synthesis Judge. Re-prompts up to `retry_limit` times when the reply has
/// no verdict line, then falls back to Human with `parse_failed` set.
pub async fn synthesize_judgment(
    profiles: &ProfileSet,
    transcript: &ProbingTranscript,
    spec: &AgentSpec,
    ctx: &AgentContext<'_>,
    retry_limit: u32,
) -> Result<Verdict, AgentError> {
    expect_agent(spec, AgentId::Sj)?;
    let prompt = PromptContext {
        profiles: Some(render_profiles(profiles)),
        transcript: Some(render_transcript(transcript)),
        ..Default::default()
    };
    let mut messages = render_prompt(spec, &prompt)?;
    let mut last = String::new();
    for attempt in 0..=retry_limit {
        let raw = ctx.send(spec, messages.clone()).await?;
        if let Some((label, confidence)) = parse_verdict(&raw) {
            return Ok(Verdict::new(
                label,
                confidence,
                raw.trim(),
                false,
                VerdictSource::SynthesisJudge,
            )?);
        }
        tracing::debug!(attempt, "judge reply had no verdict line");
        messages.push(ChatMessage::assistant(raw.clone()));
        messages.push(ChatMessage::user(FORMAT_REMINDER));
        last = raw;
    }
    Ok(Verdict::new(
        AuthorshipLabel::Human,
        None,
        last.trim(),
        true,
        VerdictSource::SynthesisJudge,
    )?)
}
