//! TOML configuration for the service and CLI.
//!
//! ```toml
//! bind = "127.0.0.1:8080"
//! cache_path = "data/cache.redb"
//! cors_origins = ["http://localhost:5173"]
//! # upstream_origin = "http://127.0.0.1:9999"   # optional local proxy
//!
//! [gateway]
//! mode = "replay-only"
//! fixture_dir = "fixtures/recorded"
//! timeout_secs = 15
//! retries = 2
//! rate_limit_per_sec = 1.0
//! ```
//!
//! Credentials never appear here; they are read from the environment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::GatewayConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {detail}")]
    Invalid { path: PathBuf, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bind: String,
    /// In-memory cache when unset.
    pub cache_path: Option<PathBuf>,
    pub cors_origins: Vec<String>,
    /// Live requests go to this origin instead of the provider hosts.
    pub upstream_origin: Option<String>,
    pub gateway: GatewayConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            bind: "127.0.0.1:8080".to_string(),
            cache_path: None,
            cors_origins: Vec::new(),
            upstream_origin: None,
            gateway: GatewayConfig::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Config, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Config::parse(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::GatewayMode;

    #[test]
    fn parses_documented_example() {
        let text = r#"
            bind = "127.0.0.1:9000"
            cache_path = "data/cache.redb"
            cors_origins = ["http://localhost:5173"]

            [gateway]
            mode = "record"
            fixture_dir = "fixtures/recorded"
            rate_limit_per_sec = 2.0
        "#;
        let c = Config::parse(text, Path::new("geoqa.toml")).unwrap();
        assert_eq!(c.bind, "127.0.0.1:9000");
        assert_eq!(c.gateway.mode, GatewayMode::Record);
        assert_eq!(c.gateway.retries, 2);
        assert_eq!(c.gateway.timeout_secs, 15.0);
        assert_eq!(c.cors_origins, vec!["http://localhost:5173"]);
    }

    #[test]
    fn defaults_are_offline() {
        let c = Config::parse("", Path::new("x")).unwrap();
        assert_eq!(c.gateway.mode, GatewayMode::ReplayOnly);
        assert!(c.bind.starts_with("127.0.0.1"));
        assert!(matches!(
            Config::parse("api_key = \"x\"", Path::new("x")),
            Err(ConfigError::Invalid { .. })
        ));
    }
}
