//! Builds the shared workbench (registry, cache, gateway) from configuration.

use std::path::PathBuf;
use std::sync::Arc;

use geoqa_core::adapters::Registry;
use geoqa_core::cache::{CacheError, ResponseCache};
use geoqa_core::config::Config;
use geoqa_core::gateway::{Credentials, Gateway, GatewayError, HttpTransport, TransportError};
use geoqa_core::pipeline::Workbench;
use thiserror::Error;

/// Recordings used when neither flags nor config name a directory.
pub const DEFAULT_FIXTURE_DIR: &str = "fixtures/recorded";

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Fills in the default fixture directory when it exists and none is set.
pub fn with_default_fixtures(mut config: Config) -> Config {
    if config.gateway.fixture_dir.is_none() {
        let dir = PathBuf::from(DEFAULT_FIXTURE_DIR);
        if dir.is_dir() {
            config.gateway.fixture_dir = Some(dir);
        }
    }
    config
}

pub fn workbench(config: &Config) -> Result<Workbench, SetupError> {
    let registry = Arc::new(Registry::with_defaults());
    let cache = match &config.cache_path {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| CacheError::StorageUnavailable(e.to_string()))?;
            }
            ResponseCache::open(path, registry.clone())?
        }
        None => ResponseCache::in_memory(registry.clone()),
    };
    let mut transport = HttpTransport::new()?;
    if let Some(origin) = &config.upstream_origin {
        transport = transport.with_origin(origin)?;
    }
    let gateway = Gateway::new(config.gateway.clone(), Credentials::from_env(&[]), Arc::new(transport))?;
    Ok(Workbench::new(registry, Arc::new(cache), Arc::new(gateway)))
}
