//! Pipeline configuration: a TOML file whose endpoint URLs may be
//! overridden from the environment.

use std::path::Path;
use std::time::Duration;

use blockprune_core::pruner::Schedule;
use blockprune_core::CleanConfig;
use serde::{Deserialize, Serialize};

pub const ENV_EMBEDDING_ENDPOINT: &str = "BLOCKPRUNE_EMBEDDING_ENDPOINT";
pub const ENV_LOGITS_ENDPOINT: &str = "BLOCKPRUNE_LOGITS_ENDPOINT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetUnit {
    Words,
    Chars,
    Tokens,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage1 {
    Lexical,
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage2 {
    Generative,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogitsSource {
    /// Remote service at `endpoints.logits`.
    Remote,
    /// Seeded hash stand-in; for tests and dry runs.
    Hash,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanSection {
    pub attr_allowlist: Vec<String>,
    pub drop_tags: Vec<String>,
    pub strip_comments: bool,
}

impl Default for CleanSection {
    fn default() -> Self {
        let d = CleanConfig::default();
        CleanSection {
            attr_allowlist: d.attr_allowlist.into_iter().collect(),
            drop_tags: d.drop_tags.into_iter().collect(),
            strip_comments: d.strip_comments,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Endpoints {
    pub embedding: Option<String>,
    pub logits: Option<String>,
    pub timeout_secs: u64,
    pub batch_size: usize,
    pub retries: u32,
}

impl Default for Endpoints {
    fn default() -> Self {
        Endpoints {
            embedding: None,
            logits: None,
            timeout_secs: 30,
            batch_size: 128,
            retries: 3,
        }
    }
}

impl Endpoints {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerativeSection {
    pub provider: LogitsSource,
    pub seed: u64,
}

impl Default for GenerativeSection {
    fn default() -> Self {
        GenerativeSection {
            provider: LogitsSource::Remote,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneConfig {
    pub coarse_granularity: usize,
    pub fine_granularity: usize,
    pub intermediate_budget: usize,
    pub final_budget: usize,
    pub budget_unit: BudgetUnit,
    pub stage1: Stage1,
    pub stage2: Stage2,
    /// Score with the lexical scorer when the embedding service fails.
    pub fallback_to_lexical: bool,
    pub workers: usize,
    pub clean: CleanSection,
    pub endpoints: Endpoints,
    pub generative: GenerativeSection,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            coarse_granularity: Schedule::DEFAULT_COARSE,
            fine_granularity: Schedule::DEFAULT_FINE,
            intermediate_budget: 4096,
            final_budget: 2048,
            budget_unit: BudgetUnit::Words,
            stage1: Stage1::Lexical,
            stage2: Stage2::Off,
            fallback_to_lexical: false,
            workers: 1,
            clean: CleanSection::default(),
            endpoints: Endpoints::default(),
            generative: GenerativeSection::default(),
        }
    }
}

impl PruneConfig {
    pub fn from_toml_str(s: &str) -> Result<PruneConfig, ConfigError> {
        Ok(toml::from_str(s)?)
    }

    /// Reads the file and applies environment overrides. Does not validate.
    pub fn load(path: &Path) -> Result<PruneConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = PruneConfig::from_toml_str(&text)?;
        cfg.apply_env(|k| std::env::var(k).ok());
        Ok(cfg)
    }

    /// Endpoint URLs are the only settings the environment can override.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) {
        if let Some(v) = var(ENV_EMBEDDING_ENDPOINT).filter(|v| !v.is_empty()) {
            self.endpoints.embedding = Some(v);
        }
        if let Some(v) = var(ENV_LOGITS_ENDPOINT).filter(|v| !v.is_empty()) {
            self.endpoints.logits = Some(v);
        }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            coarse_granularity: self.coarse_granularity,
            fine_granularity: self.fine_granularity,
            intermediate_budget: self.intermediate_budget,
            final_budget: self.final_budget,
        }
    }

    pub fn clean_config(&self) -> CleanConfig {
        CleanConfig {
            attr_allowlist: self.clean.attr_allowlist.iter().cloned().collect(),
            drop_tags: self
                .clean
                .drop_tags
                .iter()
                .map(|t| t.to_ascii_lowercase())
                .collect(),
            strip_comments: self.clean.strip_comments,
        }
    }

    /// Checks value ranges. With `offline` set, missing endpoints are
    /// accepted because responses come from a recording.
    pub fn validate(&self, offline: bool) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.intermediate_budget == 0 || self.final_budget == 0 {
            return invalid("budgets must be at least 1".into());
        }
        if self.coarse_granularity == 0 {
            return invalid("coarse_granularity must be at least 1".into());
        }
        if let Err(e) = self.schedule().validate() {
            return invalid(e.to_string());
        }
        if self.workers == 0 {
            return invalid("workers must be at least 1".into());
        }
        if self.endpoints.batch_size == 0 {
            return invalid("endpoints.batch_size must be at least 1".into());
        }
        if !offline {
            if self.stage1 == Stage1::Embedding && self.endpoints.embedding.is_none() {
                return invalid(format!(
                    "stage1 = \"embedding\" needs endpoints.embedding or {ENV_EMBEDDING_ENDPOINT}"
                ));
            }
            if self.stage2 == Stage2::Generative
                && self.generative.provider == LogitsSource::Remote
                && self.endpoints.logits.is_none()
            {
                return invalid(format!(
                    "stage2 = \"generative\" needs endpoints.logits or {ENV_LOGITS_ENDPOINT}"
                ));
            }
        }
        Ok(())
    }
}
