//! Flat `key = value` configuration with flag overrides.
//!
//! ```text
//! # comments and blank lines are ignored
//! rounds = 3
//! backend = replay:runs/news.jsonl
//! ```
//!
//! Keys are the long flag names with `-` replaced by `_`. Resolution order:
//! flags, then the file, then built-in defaults. Credentials are never read
//! from here; the live backend takes them from the environment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use camf_core::model::PipelineConfig;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_BACKEND: &str = "live";
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_TIMEOUT_SECS: u64 = 120;

pub const KEYS: [&str; 21] = [
    "rounds",
    "include_ls",
    "include_sc",
    "include_rl",
    "enable_probing",
    "enable_judge",
    "model",
    "temperature",
    "top_p",
    "max_tokens",
    "concurrency",
    "parse_retry_limit",
    "max_text_chars",
    "backend",
    "replay",
    "record",
    "cache_dir",
    "timeout",
    "template_dir",
    "limit_per_class",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("{origin}: {message}")]
    ConfigParse { origin: String, message: String },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: String, key: String },
}

/// Unresolved key/value pairs; later inserts override earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    values: BTreeMap<String, (String, String)>,
}

impl RawConfig {
    pub fn parse(origin: &str, source: &str) -> Result<Self, ConfigError> {
        let mut raw = Self::default();
        for (i, line) in source.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = format!("{origin}:{}", i + 1);
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::ConfigParse {
                origin: at.clone(),
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            raw.set(&at, key.trim(), value.trim())?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&path.display().to_string(), &source)
    }

    pub fn set(&mut self, origin: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                origin: origin.to_string(),
                key: key.to_string(),
            });
        }
        self.values
            .insert(key.to_string(), (origin.to_string(), value.to_string()));
        Ok(())
    }

    pub fn merge(&mut self, other: RawConfig) {
        self.values.extend(other.values);
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((origin, v)) => v.parse().map(Some).map_err(|e| ConfigError::ConfigParse {
                origin: origin.clone(),
                message: format!("bad value `{v}` for `{key}`: {e}"),
            }),
        }
    }

    pub fn resolve(&self) -> Result<Settings, ConfigError> {
        let mut s = Settings::default();
        let p = &mut s.pipeline;
        macro_rules! apply {
            ($key:literal => $target:expr) => {
                if let Some(v) = self.get($key)? {
                    $target = v;
                }
            };
        }
        apply!("rounds" => p.rounds);
        apply!("include_ls" => p.include_ls);
        apply!("include_sc" => p.include_sc);
        apply!("include_rl" => p.include_rl);
        apply!("enable_probing" => p.enable_probing);
        apply!("enable_judge" => p.enable_judge);
        apply!("model" => p.model_id);
        apply!("temperature" => p.sampling.temperature);
        apply!("top_p" => p.sampling.top_p);
        apply!("max_tokens" => p.sampling.max_tokens);
        apply!("concurrency" => p.concurrency_limit);
        apply!("parse_retry_limit" => p.parse_retry_limit);
        apply!("max_text_chars" => p.max_text_chars);
        apply!("backend" => s.backend);
        apply!("timeout" => s.timeout_secs);
        apply!("seed" => s.seed);
        s.record = self.get("record")?;
        s.cache_dir = self.get("cache_dir")?;
        s.template_dir = self.get("template_dir")?;
        s.limit_per_class = self.get("limit_per_class")?;
        if let Some(path) = self.get::<String>("replay")? {
            s.backend = format!("replay:{path}");
        }
        s.pipeline.validate().map_err(|e| ConfigError::ConfigParse {
            origin: "resolved config".into(),
            message: e.to_string(),
        })?;
        if s.limit_per_class == Some(0) {
            return Err(ConfigError::ConfigParse {
                origin: "resolved config".into(),
                message: "limit_per_class must be at least 1".into(),
            });
        }
        Ok(s)
    }
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub backend: String,
    pub record: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub timeout_secs: u64,
    pub template_dir: Option<PathBuf>,
    pub limit_per_class: Option<usize>,
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            backend: DEFAULT_BACKEND.to_string(),
            record: None,
            cache_dir: None,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            template_dir: None,
            limit_per_class: None,
            seed: DEFAULT_SEED,
        }
    }
}

impl Settings {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let s = RawConfig::default().resolve().unwrap();
        assert_eq!(s.pipeline.rounds, 2);
        assert_eq!(s.pipeline.sampling.temperature, 0.0);
        assert_eq!(s.pipeline.sampling.top_p, 0.0);
        assert_eq!(s.backend, "live");
    }

    #[test]
    fn flag_beats_file() {
        let mut raw = RawConfig::parse("file", "# c\nrounds = 3\n\nmodel = gpt-4\n").unwrap();
        let mut flags = RawConfig::default();
        flags.set("--rounds", "rounds", "4").unwrap();
        raw.merge(flags);
        let s = raw.resolve().unwrap();
        assert_eq!(s.pipeline.rounds, 4);
        assert_eq!(s.pipeline.model_id, "gpt-4");
    }

    #[test]
    fn unknown_key_names_offender() {
        let err = RawConfig::parse("f.conf", "rounds = 1\nroundz = 2\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                origin: "f.conf:2".into(),
                key: "roundz".into()
            }
        );
        assert!(err.to_string().contains("roundz"));
    }

    #[test]
    fn credentials_are_not_keys() {
        assert!(matches!(
            RawConfig::parse("f", "api_key = sk-x"),
            Err(ConfigError::UnknownKey { .. })
        ));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(RawConfig::parse("f", "rounds"), Err(ConfigError::ConfigParse { .. })));
        let bad = RawConfig::parse("f", "rounds = two").unwrap();
        assert!(matches!(bad.resolve(), Err(ConfigError::ConfigParse { .. })));
        let invalid = RawConfig::parse("f", "include_ls=false\ninclude_sc=false\ninclude_rl=false").unwrap();
        assert!(invalid.resolve().is_err());
    }

    #[test]
    fn replay_sets_backend() {
        let s = RawConfig::parse("f", "replay = a.jsonl").unwrap().resolve().unwrap();
        assert_eq!(s.backend, "replay:a.jsonl");
    }
}
