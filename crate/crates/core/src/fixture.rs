//! Recorded exchange files: one JSON document per request/response pair.
//!
//! ```json
//! {"provider": "tomtom", "tool": "TextSearch", "unified_query": {...},
//!  "request_template": {...}, "raw_response_base64": "...",
//!  "recorded_at": "2025-01-15T10:00:00Z", "status": 200}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{RequestTemplate, UnifiedQuery};
use crate::cache::{canonical_key, CacheError, CacheKey};
use crate::gateway::RawExchange;
use crate::model::{ProviderId, ToolKind};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("fixture I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("fixture {path} is not valid: {detail}")]
    Invalid { path: PathBuf, detail: String },
    #[error(transparent)]
    Key(#[from] CacheError),
}

fn default_status() -> u16 {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub provider: ProviderId,
    pub tool: ToolKind,
    pub unified_query: UnifiedQuery,
    pub request_template: RequestTemplate,
    pub raw_response_base64: String,
    pub recorded_at: DateTime<Utc>,
    #[serde(default = "default_status")]
    pub status: u16,
}

impl Fixture {
    pub fn from_exchange(provider: ProviderId, query: &UnifiedQuery, exchange: &RawExchange) -> Self {
        Fixture {
            provider,
            tool: query.tool,
            unified_query: query.clone(),
            request_template: exchange.request_template.clone(),
            raw_response_base64: BASE64.encode(&exchange.raw_response),
            recorded_at: exchange.fetched_at,
            status: exchange.status,
        }
    }

    pub fn raw_response(&self) -> Result<Vec<u8>, base64::DecodeError> {
        BASE64.decode(&self.raw_response_base64)
    }

    /// Replayed exchanges report zero latency and the recording timestamp.
    pub fn to_exchange(&self) -> Result<RawExchange, base64::DecodeError> {
        Ok(RawExchange {
            request_template: self.request_template.clone(),
            status: self.status,
            raw_response: self.raw_response()?,
            latency_ms: 0,
            fetched_at: self.recorded_at,
        })
    }

    pub fn key(&self) -> Result<CacheKey, CacheError> {
        canonical_key(&self.request_template, self.provider, self.tool)
    }

    pub fn file_name(&self) -> Result<String, CacheError> {
        let key = self.key()?;
        Ok(format!("{}-{}-{}.json", self.provider, self.tool.slug(), &key.as_str()[..16]))
    }

    pub fn read(path: &Path) -> Result<Fixture, FixtureError> {
        let bytes = fs::read(path).map_err(|source| FixtureError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let fixture: Fixture = serde_json::from_slice(&bytes).map_err(|e| FixtureError::Invalid {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        fixture.raw_response().map_err(|e| FixtureError::Invalid {
            path: path.to_path_buf(),
            detail: format!("raw_response_base64: {e}"),
        })?;
        Ok(fixture)
    }

    /// Writes `<dir>/<provider>-<tool>-<key prefix>.json`; returns the path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, FixtureError> {
        let path = dir.join(self.file_name()?);
        let io = |source| FixtureError::Io {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(dir).map_err(io)?;
        let mut text = crate::canonical::to_string_pretty(self);
        text.push('\n');
        fs::write(&path, text).map_err(|source| FixtureError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}

/// Fixtures indexed by cache key.
#[derive(Debug, Clone, Default)]
pub struct FixtureSet {
    by_key: BTreeMap<CacheKey, Fixture>,
}

impl FixtureSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every `*.json` file under `dir`, recursively, in path order.
    pub fn load_dir(dir: &Path) -> Result<FixtureSet, FixtureError> {
        let mut set = FixtureSet::new();
        for path in json_files(dir)? {
            set.insert(Fixture::read(&path)?)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, fixture: Fixture) -> Result<CacheKey, FixtureError> {
        let key = fixture.key()?;
        self.by_key.insert(key.clone(), fixture);
        Ok(key)
    }

    pub fn get(&self, key: &CacheKey) -> Option<&Fixture> {
        self.by_key.get(key)
    }

    pub fn len(&self) -> usize {
        self.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CacheKey, &Fixture)> {
        self.by_key.iter()
    }
}

pub(crate) fn json_files(dir: &Path) -> Result<Vec<PathBuf>, FixtureError> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        let entries = fs::read_dir(&current).map_err(|source| FixtureError::Io {
            path: current.clone(),
            source,
        })?;
        for entry in entries {
            let path = entry
                .map_err(|source| FixtureError::Io {
                    path: current.clone(),
                    source,
                })?
                .path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "json") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}
