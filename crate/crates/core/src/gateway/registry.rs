//! Name-keyed backend registry.
//!
//! Selectors are `name` or `name:arg`, where `name` is a registered backend
//! (`live`, `mock:scripted`, `mock:counting`, `replay`). The longest
//! registered name that prefixes the selector wins, so `mock:scripted:rules.json`
//! resolves to `mock:scripted` with argument `rules.json`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use super::{
    CachingBackend, CountingBackend, GatewayError, LiveBackend, LiveSettings, RecordingBackend,
    ReplayBackend, ScriptedBackend, SharedBackend,
};

/// Placeholder substituted with the model id in selector arguments and
/// recording paths, so per-model cassettes can share one pattern.
pub const MODEL_PLACEHOLDER: &str = "{model}";

#[derive(Debug, Clone, Default)]
pub struct BackendSettings {
    pub live: LiveSettings,
    pub cache_dir: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub model_id: Option<String>,
}

impl BackendSettings {
    fn substitute(&self, s: &str) -> String {
        match &self.model_id {
            Some(m) => s.replace(MODEL_PLACEHOLDER, &sanitize_model(m)),
            None => s.to_string(),
        }
    }
}

/// Model ids like `meta/llama3-70b` become safe file-name fragments.
fn sanitize_model(model: &str) -> String {
    model
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

pub type BackendFactory =
    Box<dyn Fn(Option<&str>, &BackendSettings) -> Result<SharedBackend, GatewayError> + Send + Sync>;

pub struct BackendRegistry {
    factories: BTreeMap<String, BackendFactory>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("live", |_, s| Ok(Arc::new(LiveBackend::new(s.live.clone())?)));
        r.register("mock:scripted", |arg, _| {
            Ok(Arc::new(match arg {
                Some(path) => ScriptedBackend::from_file(path)?,
                None => ScriptedBackend::toy(),
            }))
        });
        r.register("mock:counting", |_, _| Ok(Arc::new(CountingBackend::new())));
        r.register("replay", |arg, _| {
            let path = arg.ok_or_else(|| {
                GatewayError::InvalidRequest("replay backend needs a cassette path: replay:<path>".into())
            })?;
            Ok(Arc::new(ReplayBackend::open(path)?))
        });
        r
    }

    /// Registers (or replaces) a backend factory under `name`.
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(Option<&str>, &BackendSettings) -> Result<SharedBackend, GatewayError>
            + Send
            + Sync
            + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    /// Splits a selector into a registered name and optional argument.
    pub fn resolve<'a>(&self, selector: &'a str) -> Option<(&str, Option<&'a str>)> {
        self.factories
            .keys()
            .filter_map(|name| {
                let rest = selector.strip_prefix(name.as_str())?;
                if rest.is_empty() {
                    Some((name.as_str(), None))
                } else {
                    rest.strip_prefix(':').map(|arg| (name.as_str(), Some(arg)))
                }
            })
            .max_by_key(|(name, _)| name.len())
    }

    /// Builds the base backend only, without cache or recording layers.
    pub fn build_base(
        &self,
        selector: &str,
        settings: &BackendSettings,
    ) -> Result<SharedBackend, GatewayError> {
        let (name, arg) = self
            .resolve(selector)
            .ok_or_else(|| GatewayError::UnknownBackend(selector.to_string()))?;
        let arg = arg.map(|a| settings.substitute(a));
        (self.factories[name])(arg.as_deref(), settings)
    }

    /// Builds the selected backend wrapped as `record(cache(base))`; layers
    /// are present only when configured.
    pub fn build(
        &self,
        selector: &str,
        settings: &BackendSettings,
    ) -> Result<SharedBackend, GatewayError> {
        let mut backend = self.build_base(selector, settings)?;
        if let Some(dir) = &settings.cache_dir {
            backend = Arc::new(CachingBackend::new(backend, dir)?);
        }
        if let Some(path) = &settings.record {
            let path = settings.substitute(&path.to_string_lossy());
            backend = Arc::new(RecordingBackend::new(backend, path)?);
        }
        Ok(backend)
    }
}
