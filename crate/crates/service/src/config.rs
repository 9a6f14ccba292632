//! `canvas.toml`: listen address, compaction cadence and the author token table.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use canvas_core::AuthorId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_FILE: &str = "canvas.toml";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    /// Rewrite the snapshot once this many log entries have accumulated.
    pub compact_every: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { bind: "127.0.0.1:7878".into(), compact_every: 1000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    #[serde(default)]
    pub server: ServerConfig,
    /// Author id to bearer token.
    #[serde(default)]
    pub authors: BTreeMap<String, String>,
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ServiceConfig = toml::from_str(text)?;
        cfg.tokens()?;
        if cfg.server.compact_every == 0 {
            return Err(ConfigError::Invalid("server.compact_every must be positive".into()));
        }
        Ok(cfg)
    }

    /// Reads `path`; a missing file yields the defaults.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(source) => Err(ConfigError::Read { path: path.display().to_string(), source }),
        }
    }

    /// Token to author lookup. Tokens must be non-empty and unique.
    pub fn tokens(&self) -> Result<HashMap<String, AuthorId>, ConfigError> {
        let mut out = HashMap::new();
        for (author, token) in &self.authors {
            if author.trim().is_empty() || token.trim().is_empty() {
                return Err(ConfigError::Invalid("author ids and tokens must be non-empty".into()));
            }
            if out.insert(token.clone(), AuthorId::new(author.as_str())).is_some() {
                return Err(ConfigError::Invalid(format!("token of `{author}` is shared with another author")));
            }
        }
        Ok(out)
    }
}
