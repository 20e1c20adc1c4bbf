//! Service settings read from a TOML file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use katriage::areas::DEFAULT_WINDOW_DAYS;
use katriage::risk::{RiskConfig, DEFAULT_THRESHOLD, DEFAULT_TOP_K};
use katriage::summary::{HttpLanguageModel, LlmGateway, LlmOptions, SummaryMode};
use katriage::{Engine, EngineConfig, ParserConfig, RuleSet, Store};
use serde::Deserialize;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_STORE: &str = "katriage-store.jsonl";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub listen: String,
    /// Journal file of the store.
    pub store: PathBuf,
    /// Rule file; the built-in rules are used when absent.
    pub rules: Option<PathBuf>,
    pub threshold: f64,
    pub top_k: usize,
    pub window_days: u32,
    pub summary_mode: SummaryMode,
    /// Static bearer token required on every request except `/health`.
    pub api_token: Option<String>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            listen: DEFAULT_LISTEN.to_string(),
            store: PathBuf::from(DEFAULT_STORE),
            rules: None,
            threshold: DEFAULT_THRESHOLD,
            top_k: DEFAULT_TOP_K,
            window_days: DEFAULT_WINDOW_DAYS,
            summary_mode: SummaryMode::default(),
            api_token: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid settings in {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("invalid settings: {0}")]
    Invalid(String),
    #[error(transparent)]
    Rules(#[from] katriage::rules::RuleError),
    #[error(transparent)]
    Store(#[from] katriage::StoreError),
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, SettingsError> {
        let text = std::fs::read_to_string(path).map_err(|source| SettingsError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let settings = Self::from_toml(&text).map_err(|source| SettingsError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        settings.validate()?;
        Ok(settings)
    }

    /// Defaults when `path` is `None`.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, SettingsError> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Settings::default()),
        }
    }

    pub fn validate(&self) -> Result<(), SettingsError> {
        if !(0.0..=1.0).contains(&self.threshold) || self.threshold == 0.0 {
            return Err(SettingsError::Invalid(format!(
                "threshold {} outside (0, 1]",
                self.threshold
            )));
        }
        if self.window_days == 0 {
            return Err(SettingsError::Invalid("window_days must be at least 1".into()));
        }
        if self.api_token.as_deref().is_some_and(str::is_empty) {
            return Err(SettingsError::Invalid("api_token must not be empty".into()));
        }
        Ok(())
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            parser: ParserConfig {
                window_days: self.window_days,
            },
            risk: RiskConfig {
                threshold: self.threshold,
                top_k: self.top_k,
            },
            summary_mode: self.summary_mode,
            ..EngineConfig::default()
        }
    }

    pub fn load_rules(&self) -> Result<RuleSet, SettingsError> {
        Ok(match &self.rules {
            Some(path) => RuleSet::load(path)?,
            None => RuleSet::default_rules(),
        })
    }

    /// Engine over `store`, wired to the LLM endpoint named in the
    /// environment when one is set.
    pub fn engine_with_store(&self, store: Arc<Store>) -> Result<Engine, SettingsError> {
        let mut engine = Engine::new(store, self.load_rules()?, self.engine_config());
        if let Some(model) = HttpLanguageModel::from_env() {
            engine = engine.with_llm(Arc::new(LlmGateway::new(Arc::new(model), LlmOptions::default())));
        }
        Ok(engine)
    }

    /// Engine over the journal named by `store`.
    pub fn open_engine(&self) -> Result<Engine, SettingsError> {
        let store = Arc::new(Store::open(&self.store)?);
        self.engine_with_store(store)
    }
}
