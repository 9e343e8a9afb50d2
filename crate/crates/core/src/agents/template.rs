//! Agent prompt templates and `{{placeholder}}` rendering.
//!
//! A template file holds a `[system]` section followed by a `[user]` section.
//! The attribution tag `[AGENT:xx]` is not part of the file; rendering puts
//! it on the first line of the system prompt.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::AgentError;
use crate::gateway::ChatMessage;
use crate::model::{AgentId, SamplingParams};

pub const PLACEHOLDERS: [&str; 5] = ["text", "profiles", "argument", "transcript", "round_index"];

static PLACEHOLDER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{\{\s*([A-Za-z_]+)\s*\}\}").unwrap());
static BLANK_RUN_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\n{3,}").unwrap());

fn builtin_source(agent: AgentId) -> &'static str {
    match agent {
        AgentId::Ls => include_str!("../../templates/ls.txt"),
        AgentId::Sc => include_str!("../../templates/sc.txt"),
        AgentId::Rl => include_str!("../../templates/rl.txt"),
        AgentId::Gm => include_str!("../../templates/gm.txt"),
        AgentId::De => include_str!("../../templates/de.txt"),
        AgentId::Sj => include_str!("../../templates/sj.txt"),
    }
}

/// File name of an agent's template inside a template directory.
pub fn template_file_name(agent: AgentId) -> String {
    format!("{}.txt", agent.code().to_ascii_lowercase())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSpec {
    pub agent_id: AgentId,
    pub system_template: String,
    pub user_template: String,
    pub sampling: SamplingParams,
}

impl AgentSpec {
    pub fn new(
        agent_id: AgentId,
        system_template: impl Into<String>,
        user_template: impl Into<String>,
        sampling: SamplingParams,
    ) -> Result<Self, AgentError> {
        let spec = Self {
            agent_id,
            system_template: system_template.into(),
            user_template: user_template.into(),
            sampling,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Parses a `[system]` / `[user]` template file.
    pub fn parse(agent_id: AgentId, source: &str, sampling: SamplingParams) -> Result<Self, AgentError> {
        let source = source.replace("\r\n", "\n");
        let bad = |msg: &str| AgentError::Template {
            agent: agent_id,
            message: msg.to_string(),
        };
        let body = source
            .trim_start()
            .strip_prefix("[system]\n")
            .ok_or_else(|| bad("template must start with a [system] line"))?;
        let (system, user) = body
            .split_once("\n[user]\n")
            .ok_or_else(|| bad("template must contain a [user] line"))?;
        Self::new(agent_id, system.trim(), user.trim(), sampling)
    }

    fn validate(&self) -> Result<(), AgentError> {
        let bad = |message: String| AgentError::Template {
            agent: self.agent_id,
            message,
        };
        for (section, t) in [("system", &self.system_template), ("user", &self.user_template)] {
            if t.trim().is_empty() {
                return Err(bad(format!("{section} template is empty")));
            }
            if t.contains("[AGENT:") {
                return Err(bad(format!("{section} template must not contain an [AGENT:..] tag")));
            }
            for cap in PLACEHOLDER_RE.captures_iter(t) {
                if !PLACEHOLDERS.contains(&&cap[1]) {
                    return Err(bad(format!("unknown placeholder {{{{{}}}}}", &cap[1])));
                }
            }
        }
        Ok(())
    }

    pub fn placeholders(&self) -> Vec<String> {
        let mut names: Vec<String> = PLACEHOLDER_RE
            .captures_iter(&self.system_template)
            .chain(PLACEHOLDER_RE.captures_iter(&self.user_template))
            .map(|c| c[1].to_string())
            .collect();
        names.sort();
        names.dedup();
        names
    }
}

/// Bindings for template placeholders. An empty string is a valid binding;
/// `None` means unbound.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptContext {
    pub text: Option<String>,
    pub profiles: Option<String>,
    pub argument: Option<String>,
    pub transcript: Option<String>,
    pub round_index: Option<u32>,
}

impl PromptContext {
    fn binding(&self, name: &str) -> Option<String> {
        match name {
            "text" => self.text.clone(),
            "profiles" => self.profiles.clone(),
            "argument" => self.argument.clone(),
            "transcript" => self.transcript.clone(),
            "round_index" => self.round_index.map(|r| r.to_string()),
            _ => None,
        }
    }
}

fn render_template(template: &str, ctx: &PromptContext) -> Result<String, AgentError> {
    let mut missing = None;
    let mut bound = BTreeMap::new();
    for cap in PLACEHOLDER_RE.captures_iter(template) {
        let name = cap[1].to_string();
        match ctx.binding(&name) {
            Some(v) => {
                bound.insert(name, v);
            }
            None => {
                missing.get_or_insert(name);
            }
        }
    }
    if let Some(name) = missing {
        return Err(AgentError::UnboundPlaceholder(name));
    }
    // Empty bindings drop out first so the surrounding blank lines collapse
    // without touching the substituted content.
    let skeleton = PLACEHOLDER_RE.replace_all(template, |c: &Captures| {
        if bound[&c[1]].is_empty() {
            String::new()
        } else {
            c[0].to_string()
        }
    });
    let skeleton = BLANK_RUN_RE.replace_all(skeleton.trim(), "\n\n");
    Ok(PLACEHOLDER_RE
        .replace_all(&skeleton, |c: &Captures| bound[&c[1]].clone())
        .into_owned())
}

/// Renders the system and user messages for `spec`; the system prompt's
/// first line is the agent's attribution tag.
pub fn render_prompt(spec: &AgentSpec, ctx: &PromptContext) -> Result<Vec<ChatMessage>, AgentError> {
    let system = render_template(&spec.system_template, ctx)?;
    let user = render_template(&spec.user_template, ctx)?;
    Ok(vec![
        ChatMessage::system(format!("{}\n{}", spec.agent_id.tag(), system)),
        ChatMessage::user(user),
    ])
}

/// One spec per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    specs: BTreeMap<AgentId, AgentSpec>,
}

impl TemplateSet {
    pub fn builtin(sampling: SamplingParams) -> Self {
        let specs = AgentId::ALL
            .into_iter()
            .map(|a| {
                let spec = AgentSpec::parse(a, builtin_source(a), sampling)
                    .expect("bundled templates are valid");
                (a, spec)
            })
            .collect();
        Self { specs }
    }

    /// Loads `<code>.txt` files from `dir`; agents without a file keep the
    /// bundled template.
    pub fn from_dir(dir: &Path, sampling: SamplingParams) -> Result<Self, AgentError> {
        let mut set = Self::builtin(sampling);
        for agent in AgentId::ALL {
            let path = dir.join(template_file_name(agent));
            if path.exists() {
                let source = std::fs::read_to_string(&path).map_err(|e| AgentError::Template {
                    agent,
                    message: format!("{}: {e}", path.display()),
                })?;
                set.specs.insert(agent, AgentSpec::parse(agent, &source, sampling)?);
            }
        }
        Ok(set)
    }

    pub fn get(&self, agent: AgentId) -> &AgentSpec {
        &self.specs[&agent]
    }

    pub fn with_spec(mut self, spec: AgentSpec) -> Self {
        self.specs.insert(spec.agent_id, spec);
        self
    }

    /// SHA-256 over every agent's templates, in agent order.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (agent, spec) in &self.specs {
            h.update(agent.code().as_bytes());
            h.update([0]);
            h.update(spec.system_template.as_bytes());
            h.update([0]);
            h.update(spec.user_template.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(system: &str, user: &str) -> AgentSpec {
        AgentSpec::new(AgentId::Gm, system, user, SamplingParams::default()).unwrap()
    }

    #[test]
    fn bundled_templates_parse_and_use_known_placeholders() {
        let set = TemplateSet::builtin(SamplingParams::default());
        assert_eq!(set.get(AgentId::Ls).placeholders(), vec!["text"]);
        assert_eq!(set.get(AgentId::Gm).placeholders(), vec!["profiles", "round_index", "transcript"]);
        assert_eq!(set.get(AgentId::De).placeholders(), vec!["argument", "profiles", "round_index"]);
        assert_eq!(set.get(AgentId::Sj).placeholders(), vec!["profiles", "transcript"]);
    }

    #[test]
    fn rendering_is_deterministic_and_tagged() {
        let s = spec("Role text.", "A {{text}} B {{round_index}}");
        let ctx = PromptContext {
            text: Some("hello {{profiles}}".into()),
            round_index: Some(3),
            ..Default::default()
        };
        let a = render_prompt(&s, &ctx).unwrap();
        assert_eq!(a, render_prompt(&s, &ctx).unwrap());
        assert_eq!(a[0].content, "[AGENT:GM]\nRole text.");
        // Substituted content is not re-scanned for placeholders.
        assert_eq!(a[1].content, "A hello {{profiles}} B 3");
    }

    #[test]
    fn missing_binding_is_an_error() {
        let s = spec("sys", "{{profiles}} and {{argument}}");
        let ctx = PromptContext {
            profiles: Some("p".into()),
            ..Default::default()
        };
        assert_eq!(
            render_prompt(&s, &ctx),
            Err(AgentError::UnboundPlaceholder("argument".into()))
        );
    }

    #[test]
    fn empty_bindings_collapse_blank_lines() {
        let s = spec("sys", "{{profiles}}\n\n{{transcript}}\n\nEnd.");
        let ctx = PromptContext {
            profiles: Some("P\n\n\n\nQ".into()),
            transcript: Some(String::new()),
            ..Default::default()
        };
        let user = &render_prompt(&s, &ctx).unwrap()[1].content;
        assert_eq!(user, "P\n\n\n\nQ\n\nEnd.");
    }

    #[test]
    fn template_validation() {
        assert!(AgentSpec::new(AgentId::Ls, "", "u", SamplingParams::default()).is_err());
        assert!(AgentSpec::new(AgentId::Ls, "[AGENT:LS] x", "u", SamplingParams::default()).is_err());
        assert!(AgentSpec::new(AgentId::Ls, "s", "{{unknown}}", SamplingParams::default()).is_err());
        assert!(AgentSpec::parse(AgentId::Ls, "no sections", SamplingParams::default()).is_err());
        let ok = AgentSpec::parse(AgentId::Ls, "[system]\r\nS\r\n[user]\r\nU {{text}}\r\n", SamplingParams::default()).unwrap();
        assert_eq!((ok.system_template.as_str(), ok.user_template.as_str()), ("S", "U {{text}}"));
    }

    #[test]
    fn template_dir_overrides_and_digest_changes() {
        let dir = tempfile::tempdir().unwrap();
        let base = TemplateSet::builtin(SamplingParams::default());
        std::fs::write(dir.path().join("sj.txt"), "[system]\nDecide.\n[user]\n{{profiles}}\n{{transcript}}\n").unwrap();
        let custom = TemplateSet::from_dir(dir.path(), SamplingParams::default()).unwrap();
        assert_eq!(custom.get(AgentId::Sj).system_template, "Decide.");
        assert_eq!(custom.get(AgentId::Ls), base.get(AgentId::Ls));
        assert_ne!(custom.digest(), base.digest());
        assert_eq!(base.digest(), TemplateSet::builtin(SamplingParams::default()).digest());
    }
}
