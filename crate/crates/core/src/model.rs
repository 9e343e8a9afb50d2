//! Domain types shared by every stage of the detector.
//!
//! All types here are immutable once constructed; constructors and
//! deserializers enforce the invariants so downstream code can rely on them.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("sample id must be nonempty")]
    EmptyId,
    #[error("sample `{0}` has empty text")]
    EmptyText(String),
    #[error("invalid authorship label code {0}; expected 0 (human) or 1 (machine)")]
    InvalidLabel(i64),
    #[error("narrative must be nonempty")]
    EmptyNarrative,
    #[error("round index must be >= 1")]
    ZeroRound,
    #[error("profile set must contain at least one profile")]
    EmptyProfileSet,
    #[error("profile in the {slot} slot has dimension {found}")]
    SlotMismatch { slot: Dimension, found: Dimension },
    #[error("transcript rounds must be contiguous from 1: position {position} holds round {found}")]
    NonContiguousRounds { position: usize, found: u32 },
    #[error("argument round {argument} paired with refinement round {refinement}")]
    MismatchedPair { argument: u32, refinement: u32 },
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),
    #[error("invalid sampling parameter: {0}")]
    InvalidSampling(String),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
}

/// Binary authorship label: human (0) or machine (1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AuthorshipLabel {
    Human,
    Machine,
}

impl AuthorshipLabel {
    pub const ALL: [AuthorshipLabel; 2] = [AuthorshipLabel::Human, AuthorshipLabel::Machine];

    pub fn encode(self) -> u8 {
        match self {
            AuthorshipLabel::Human => 0,
            AuthorshipLabel::Machine => 1,
        }
    }

    pub fn decode(code: i64) -> Result<Self, ModelError> {
        match code {
            0 => Ok(AuthorshipLabel::Human),
            1 => Ok(AuthorshipLabel::Machine),
            other => Err(ModelError::InvalidLabel(other)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AuthorshipLabel::Human => "HUMAN",
            AuthorshipLabel::Machine => "MACHINE",
        }
    }
}

impl fmt::Display for AuthorshipLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Encodes a label as its numeric code (Human=0, Machine=1).
pub fn label_encode(label: AuthorshipLabel) -> u8 {
    label.encode()
}

/// One input text with an optional gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSample {
    id: String,
    text: String,
    gold_label: Option<AuthorshipLabel>,
    domain_tag: Option<String>,
}

impl TextSample {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        gold_label: Option<AuthorshipLabel>,
        domain_tag: Option<String>,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        let text = text.into();
        if id.is_empty() {
            return Err(ModelError::EmptyId);
        }
        if text.trim().is_empty() {
            return Err(ModelError::EmptyText(id));
        }
        Ok(Self {
            id,
            text,
            gold_label,
            domain_tag,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn gold_label(&self) -> Option<AuthorshipLabel> {
        self.gold_label
    }

    pub fn domain_tag(&self) -> Option<&str> {
        self.domain_tag.as_deref()
    }
}

/// An agent's structured hint about authorship, parsed from its LEANING trailer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Leaning {
    Human,
    Machine,
    Uncertain,
}

impl Leaning {
    pub fn as_str(self) -> &'static str {
        match self {
            Leaning::Human => "HUMAN",
            Leaning::Machine => "MACHINE",
            Leaning::Uncertain => "UNCERTAIN",
        }
    }

    /// The label this leaning votes for, if it is decisive.
    pub fn decisive(self) -> Option<AuthorshipLabel> {
        match self {
            Leaning::Human => Some(AuthorshipLabel::Human),
            Leaning::Machine => Some(AuthorshipLabel::Machine),
            Leaning::Uncertain => None,
        }
    }
}

impl fmt::Display for Leaning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The three linguistic dimensions profiled in the first stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Stylistic,
    Semantic,
    Logical,
}

impl Dimension {
    /// Canonical rendering order.
    pub const ALL: [Dimension; 3] = [Dimension::Stylistic, Dimension::Semantic, Dimension::Logical];

    pub fn title(self) -> &'static str {
        match self {
            Dimension::Stylistic => "Stylistic",
            Dimension::Semantic => "Semantic",
            Dimension::Logical => "Logical",
        }
    }

    pub fn agent(self) -> AgentId {
        match self {
            Dimension::Stylistic => AgentId::Ls,
            Dimension::Semantic => AgentId::Sc,
            Dimension::Logical => AgentId::Rl,
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinguisticProfile {
    dimension: Dimension,
    narrative: String,
    leaning: Leaning,
    raw_response: String,
}

impl LinguisticProfile {
    pub fn new(
        dimension: Dimension,
        narrative: impl Into<String>,
        leaning: Leaning,
        raw_response: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let narrative = narrative.into();
        if narrative.trim().is_empty() {
            return Err(ModelError::EmptyNarrative);
        }
        Ok(Self {
            dimension,
            narrative,
            leaning,
            raw_response: raw_response.into(),
        })
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn narrative(&self) -> &str {
        &self.narrative
    }

    pub fn leaning(&self) -> Leaning {
        self.leaning
    }

    pub fn raw_response(&self) -> &str {
        &self.raw_response
    }
}

#[derive(Deserialize)]
struct RawProfileSet {
    stylistic: Option<LinguisticProfile>,
    semantic: Option<LinguisticProfile>,
    logical: Option<LinguisticProfile>,
}

/// Stage-1 output: one optional profile per dimension. An absent slot means
/// the corresponding profiling agent was ablated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawProfileSet")]
pub struct ProfileSet {
    stylistic: Option<LinguisticProfile>,
    semantic: Option<LinguisticProfile>,
    logical: Option<LinguisticProfile>,
}

impl TryFrom<RawProfileSet> for ProfileSet {
    type Error = ModelError;

    fn try_from(raw: RawProfileSet) -> Result<Self, Self::Error> {
        ProfileSet::new(raw.stylistic, raw.semantic, raw.logical)
    }
}

impl ProfileSet {
    pub fn new(
        stylistic: Option<LinguisticProfile>,
        semantic: Option<LinguisticProfile>,
        logical: Option<LinguisticProfile>,
    ) -> Result<Self, ModelError> {
        for (slot, profile) in [
            (Dimension::Stylistic, &stylistic),
            (Dimension::Semantic, &semantic),
            (Dimension::Logical, &logical),
        ] {
            if let Some(p) = profile {
                if p.dimension != slot {
                    return Err(ModelError::SlotMismatch {
                        slot,
                        found: p.dimension,
                    });
                }
            }
        }
        if stylistic.is_none() && semantic.is_none() && logical.is_none() {
            return Err(ModelError::EmptyProfileSet);
        }
        Ok(Self {
            stylistic,
            semantic,
            logical,
        })
    }

    /// Builds a set from profiles in any order, each placed in its own slot.
    /// Later duplicates of a dimension replace earlier ones.
    pub fn from_profiles(
        profiles: impl IntoIterator<Item = LinguisticProfile>,
    ) -> Result<Self, ModelError> {
        let (mut s, mut m, mut l) = (None, None, None);
        for p in profiles {
            match p.dimension {
                Dimension::Stylistic => s = Some(p),
                Dimension::Semantic => m = Some(p),
                Dimension::Logical => l = Some(p),
            }
        }
        Self::new(s, m, l)
    }

    pub fn get(&self, dimension: Dimension) -> Option<&LinguisticProfile> {
        match dimension {
            Dimension::Stylistic => self.stylistic.as_ref(),
            Dimension::Semantic => self.semantic.as_ref(),
            Dimension::Logical => self.logical.as_ref(),
        }
    }

    /// Present profiles in canonical order (Stylistic, Semantic, Logical).
    pub fn iter(&self) -> impl Iterator<Item = &LinguisticProfile> {
        Dimension::ALL.into_iter().filter_map(|d| self.get(d))
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarialArgument {
    round_index: u32,
    narrative: String,
    raw_response: String,
}

impl AdversarialArgument {
    pub fn new(
        round_index: u32,
        narrative: impl Into<String>,
        raw_response: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let narrative = narrative.into();
        if round_index == 0 {
            return Err(ModelError::ZeroRound);
        }
        if narrative.trim().is_empty() {
            return Err(ModelError::EmptyNarrative);
        }
        Ok(Self {
            round_index,
            narrative,
            raw_response: raw_response.into(),
        })
    }

    pub fn round_index(&self) -> u32 {
        self.round_index
    }

    pub fn narrative(&self) -> &str {
        &self.narrative
    }

    pub fn raw_response(&self) -> &str {
        &self.raw_response
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinedAnalysis {
    round_index: u32,
    narrative: String,
    leaning: Leaning,
    raw_response: String,
}

impl RefinedAnalysis {
    pub fn new(
        round_index: u32,
        narrative: impl Into<String>,
        leaning: Leaning,
        raw_response: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let narrative = narrative.into();
        if round_index == 0 {
            return Err(ModelError::ZeroRound);
        }
        if narrative.trim().is_empty() {
            return Err(ModelError::EmptyNarrative);
        }
        Ok(Self {
            round_index,
            narrative,
            leaning,
            raw_response: raw_response.into(),
        })
    }

    pub fn round_index(&self) -> u32 {
        self.round_index
    }

    pub fn narrative(&self) -> &str {
        &self.narrative
    }

    pub fn leaning(&self) -> Leaning {
        self.leaning
    }

    pub fn raw_response(&self) -> &str {
        &self.raw_response
    }
}

/// One Generator-Mimic / Detector-Enhancer exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbingRound {
    pub argument: AdversarialArgument,
    pub refinement: RefinedAnalysis,
}

#[derive(Deserialize)]
struct RawTranscript {
    rounds: Vec<ProbingRound>,
}

/// Ordered probing rounds; indices are always 1..n.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTranscript")]
pub struct ProbingTranscript {
    rounds: Vec<ProbingRound>,
}

impl TryFrom<RawTranscript> for ProbingTranscript {
    type Error = ModelError;

    fn try_from(raw: RawTranscript) -> Result<Self, Self::Error> {
        let mut t = ProbingTranscript::empty();
        for r in raw.rounds {
            t.push(r.argument, r.refinement)?;
        }
        Ok(t)
    }
}

impl ProbingTranscript {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Appends a round, rejecting pairs that break contiguity or pairing.
    pub fn push(
        &mut self,
        argument: AdversarialArgument,
        refinement: RefinedAnalysis,
    ) -> Result<(), ModelError> {
        let expected = self.next_round_index();
        if argument.round_index != refinement.round_index {
            return Err(ModelError::MismatchedPair {
                argument: argument.round_index,
                refinement: refinement.round_index,
            });
        }
        if argument.round_index != expected {
            return Err(ModelError::NonContiguousRounds {
                position: self.rounds.len(),
                found: argument.round_index,
            });
        }
        self.rounds.push(ProbingRound {
            argument,
            refinement,
        });
        Ok(())
    }

    pub fn rounds(&self) -> &[ProbingRound] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn next_round_index(&self) -> u32 {
        self.rounds.len() as u32 + 1
    }

    pub fn last(&self) -> Option<&ProbingRound> {
        self.rounds.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictSource {
    SynthesisJudge,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: AuthorshipLabel,
    pub confidence: Option<f64>,
    pub rationale: String,
    pub parse_failed: bool,
    pub source: VerdictSource,
}

impl Verdict {
    pub fn new(
        label: AuthorshipLabel,
        confidence: Option<f64>,
        rationale: impl Into<String>,
        parse_failed: bool,
        source: VerdictSource,
    ) -> Result<Self, ModelError> {
        if let Some(c) = confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(ModelError::ConfidenceOutOfRange(c));
            }
        }
        Ok(Self {
            label,
            confidence,
            rationale: rationale.into(),
            parse_failed,
            source,
        })
    }
}

/// The six agent roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentId {
    #[serde(rename = "LS")]
    Ls,
    #[serde(rename = "SC")]
    Sc,
    #[serde(rename = "RL")]
    Rl,
    #[serde(rename = "GM")]
    Gm,
    #[serde(rename = "DE")]
    De,
    #[serde(rename = "SJ")]
    Sj,
}

impl AgentId {
    pub const ALL: [AgentId; 6] = [
        AgentId::Ls,
        AgentId::Sc,
        AgentId::Rl,
        AgentId::Gm,
        AgentId::De,
        AgentId::Sj,
    ];

    pub fn code(self) -> &'static str {
        match self {
            AgentId::Ls => "LS",
            AgentId::Sc => "SC",
            AgentId::Rl => "RL",
            AgentId::Gm => "GM",
            AgentId::De => "DE",
            AgentId::Sj => "SJ",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.code().eq_ignore_ascii_case(code))
    }

    /// The attribution tag placed on the first line of the system prompt.
    pub fn tag(self) -> String {
        format!("[AGENT:{}]", self.code())
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Sampling settings sent with every request. `top_p` is recorded as
/// configured; [`SamplingParams::wire_top_p`] is what goes on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

/// Smallest top_p sent to an API; many endpoints reject exactly zero.
pub const MIN_WIRE_TOP_P: f64 = 1e-9;

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            top_p: 0.0,
            max_tokens: 1024,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ModelError::InvalidSampling(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if !(0.0..=1.0).contains(&self.top_p) {
            return Err(ModelError::InvalidSampling(format!(
                "top_p must lie in [0, 1], got {}",
                self.top_p
            )));
        }
        if self.max_tokens == 0 {
            return Err(ModelError::InvalidSampling(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn wire_top_p(&self) -> f64 {
        self.top_p.max(MIN_WIRE_TOP_P)
    }

    /// Copy with top_p clamped to its wire value.
    pub fn clamped(&self) -> SamplingParams {
        SamplingParams {
            top_p: self.wire_top_p(),
            ..*self
        }
    }
}

pub const DEFAULT_MODEL_ID: &str = "gpt-3.5-turbo";
pub const DEFAULT_ROUNDS: u32 = 2;
pub const DEFAULT_MAX_TEXT_CHARS: usize = 12_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub rounds: u32,
    pub include_ls: bool,
    pub include_sc: bool,
    pub include_rl: bool,
    pub enable_probing: bool,
    pub enable_judge: bool,
    pub model_id: String,
    pub sampling: SamplingParams,
    pub concurrency_limit: usize,
    pub parse_retry_limit: u32,
    pub max_text_chars: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rounds: DEFAULT_ROUNDS,
            include_ls: true,
            include_sc: true,
            include_rl: true,
            enable_probing: true,
            enable_judge: true,
            model_id: DEFAULT_MODEL_ID.to_string(),
            sampling: SamplingParams::default(),
            concurrency_limit: 4,
            parse_retry_limit: 1,
            max_text_chars: DEFAULT_MAX_TEXT_CHARS,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.enable_probing && self.rounds == 0 {
            return Err(ModelError::InvalidConfig(
                "rounds must be >= 1 when probing is enabled".into(),
            ));
        }
        if !(self.include_ls || self.include_sc || self.include_rl) {
            return Err(ModelError::InvalidConfig(
                "at least one profiling agent must be enabled".into(),
            ));
        }
        if self.concurrency_limit == 0 {
            return Err(ModelError::InvalidConfig(
                "concurrency_limit must be positive".into(),
            ));
        }
        if self.model_id.trim().is_empty() {
            return Err(ModelError::InvalidConfig("model_id must be nonempty".into()));
        }
        if self.max_text_chars == 0 {
            return Err(ModelError::InvalidConfig(
                "max_text_chars must be positive".into(),
            ));
        }
        self.sampling.validate()
    }

    pub fn includes(&self, dimension: Dimension) -> bool {
        match dimension {
            Dimension::Stylistic => self.include_ls,
            Dimension::Semantic => self.include_sc,
            Dimension::Logical => self.include_rl,
        }
    }

    pub fn enabled_dimensions(&self) -> Vec<Dimension> {
        Dimension::ALL
            .into_iter()
            .filter(|d| self.includes(*d))
            .collect()
    }

    /// Rounds actually executed (zero when probing is disabled).
    pub fn effective_rounds(&self) -> u32 {
        if self.enable_probing {
            self.rounds
        } else {
            0
        }
    }

    /// Completions one sample costs when every judge response parses first time.
    pub fn expected_calls(&self) -> u64 {
        self.enabled_dimensions().len() as u64
            + 2 * u64::from(self.effective_rounds())
            + u64::from(self.enable_judge)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub sample_id: String,
    pub verdict: Verdict,
    pub profiles: ProfileSet,
    pub transcript: ProbingTranscript,
    pub latency_seconds: f64,
    pub llm_calls: u64,
    pub token_usage: TokenUsage,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(d: Dimension, leaning: Leaning) -> LinguisticProfile {
        LinguisticProfile::new(d, "some analysis", leaning, "raw").unwrap()
    }

    fn round(k: u32) -> (AdversarialArgument, RefinedAnalysis) {
        (
            AdversarialArgument::new(k, "challenge", "raw").unwrap(),
            RefinedAnalysis::new(k, "refined", Leaning::Machine, "raw").unwrap(),
        )
    }

    #[test]
    fn label_codes() {
        assert_eq!(label_encode(AuthorshipLabel::Human), 0);
        assert_eq!(label_encode(AuthorshipLabel::Machine), 1);
        for l in AuthorshipLabel::ALL {
            assert_eq!(AuthorshipLabel::decode(l.encode().into()).unwrap(), l);
        }
        assert_eq!(AuthorshipLabel::decode(2), Err(ModelError::InvalidLabel(2)));
        assert_eq!(AuthorshipLabel::decode(-1), Err(ModelError::InvalidLabel(-1)));
    }

    #[test]
    fn sample_rejects_blank_text_and_empty_id() {
        assert_eq!(
            TextSample::new("a", "  \n\t", None, None),
            Err(ModelError::EmptyText("a".into()))
        );
        assert_eq!(TextSample::new("", "x", None, None), Err(ModelError::EmptyId));
    }

    #[test]
    fn profile_set_checks_slots() {
        let err = ProfileSet::new(Some(profile(Dimension::Semantic, Leaning::Human)), None, None)
            .unwrap_err();
        assert_eq!(
            err,
            ModelError::SlotMismatch {
                slot: Dimension::Stylistic,
                found: Dimension::Semantic
            }
        );
        assert_eq!(ProfileSet::new(None, None, None), Err(ModelError::EmptyProfileSet));
    }

    #[test]
    fn profile_set_serde_round_trip_and_validation() {
        let set = ProfileSet::from_profiles([
            profile(Dimension::Logical, Leaning::Human),
            profile(Dimension::Stylistic, Leaning::Machine),
        ])
        .unwrap();
        let json = serde_json::to_string(&set).unwrap();
        let back: ProfileSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, set);
        let order: Vec<_> = back.iter().map(|p| p.dimension()).collect();
        assert_eq!(order, vec![Dimension::Stylistic, Dimension::Logical]);

        // A profile in the wrong slot is rejected on deserialization.
        let bad = json.replace("\"dimension\":\"logical\"", "\"dimension\":\"semantic\"");
        assert!(serde_json::from_str::<ProfileSet>(&bad).is_err());
    }

    #[test]
    fn transcript_requires_contiguous_pairs() {
        let mut t = ProbingTranscript::empty();
        let (a1, r1) = round(1);
        t.push(a1, r1).unwrap();
        let (a3, r3) = round(3);
        assert!(matches!(
            t.push(a3, r3),
            Err(ModelError::NonContiguousRounds { position: 1, found: 3 })
        ));
        let (a2, _) = round(2);
        let (_, r1b) = round(1);
        assert!(matches!(t.push(a2, r1b), Err(ModelError::MismatchedPair { .. })));
        let (a2, r2) = round(2);
        t.push(a2, r2).unwrap();
        assert_eq!(t.len(), 2);

        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<ProbingTranscript>(&json).unwrap(), t);
        let broken = json.replacen("\"round_index\":1", "\"round_index\":5", 2);
        assert!(serde_json::from_str::<ProbingTranscript>(&broken).is_err());
    }

    #[test]
    fn verdict_confidence_range() {
        assert!(Verdict::new(AuthorshipLabel::Human, Some(1.2), "", false, VerdictSource::Heuristic).is_err());
        assert!(Verdict::new(AuthorshipLabel::Human, Some(1.0), "", false, VerdictSource::Heuristic).is_ok());
    }

    #[test]
    fn defaults_follow_reported_setup() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.rounds, 2);
        assert_eq!(cfg.sampling.temperature, 0.0);
        assert_eq!(cfg.sampling.top_p, 0.0);
        assert_eq!(cfg.sampling.wire_top_p(), MIN_WIRE_TOP_P);
        assert_eq!(cfg.expected_calls(), 8);
        cfg.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let cfg = PipelineConfig {
            rounds: 0,
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig {
            rounds: 0,
            enable_probing: false,
            ..PipelineConfig::default()
        };
        cfg.validate().unwrap();
        assert_eq!(cfg.expected_calls(), 4);
        let cfg = PipelineConfig {
            include_ls: false,
            include_sc: false,
            include_rl: false,
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn agent_tags() {
        assert_eq!(AgentId::Gm.tag(), "[AGENT:GM]");
        assert_eq!(AgentId::from_code("sj"), Some(AgentId::Sj));
        assert_eq!(AgentId::from_code("XX"), None);
    }
}
