//! Persistent, secret-free cache of provider exchanges. Once an answer is
//! cached it is the ground truth: entries are never evicted automatically.

mod key;
mod store;

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use key::{canonical_key, CacheKey};
pub use store::{CacheStore, MemoryStore, RedbStore};

use crate::adapters::{convert_response, AdapterError, NormalizedResponse, Registry, UnifiedQuery};
use crate::fixture::{Fixture, FixtureError, FixtureSet};
use crate::gateway::RawExchange;
use crate::model::{ProviderId, ToolKind};

/// Bumped when the stored entry layout or normalized schema changes.
pub const CACHE_SCHEMA_VERSION: u32 = 1;

const CHECKSUM_LEN: usize = 64;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache storage unavailable: {0}")]
    StorageUnavailable(String),
    #[error("corrupt cache entry {0}")]
    CorruptEntry(String),
    #[error("request template carries a resolved credential; keys are computed on placeholder form only")]
    ResolvedTemplate,
    #[error("cache entry violates its invariant: {0}")]
    InvalidEntry(String),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Fixture(#[from] Box<FixtureError>),
}

impl From<FixtureError> for CacheError {
    fn from(e: FixtureError) -> Self {
        CacheError::Fixture(Box::new(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub provider: ProviderId,
    pub tool: ToolKind,
    pub unified_query: UnifiedQuery,
    pub exchange: RawExchange,
    pub normalized: NormalizedResponse,
    pub schema_version: u32,
}

impl CacheEntry {
    /// Derives key and normalized payload from the exchange.
    pub fn build(
        registry: &Registry,
        provider: ProviderId,
        query: &UnifiedQuery,
        exchange: RawExchange,
    ) -> Result<CacheEntry, CacheError> {
        let adapter = registry.lookup(provider, query.tool)?;
        let normalized = convert_response(adapter.as_ref(), query, &exchange.raw_response)?;
        Ok(CacheEntry {
            key: canonical_key(&exchange.request_template, provider, query.tool)?,
            provider,
            tool: query.tool,
            unified_query: query.clone(),
            exchange,
            normalized,
            schema_version: CACHE_SCHEMA_VERSION,
        })
    }

    pub fn to_fixture(&self) -> Fixture {
        Fixture::from_exchange(self.provider, &self.unified_query, &self.exchange)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: u64,
    pub bytes: u64,
}

/// Records are `<64 hex chars of SHA-256(payload)><payload>`.
fn seal(payload: &[u8]) -> Vec<u8> {
    let mut record = hex::encode(Sha256::digest(payload)).into_bytes();
    record.extend_from_slice(payload);
    record
}

fn unseal<'a>(key: &str, record: &'a [u8]) -> Result<&'a [u8], CacheError> {
    if record.len() < CHECKSUM_LEN {
        return Err(CacheError::CorruptEntry(key.to_string()));
    }
    let (checksum, payload) = record.split_at(CHECKSUM_LEN);
    if checksum != hex::encode(Sha256::digest(payload)).as_bytes() {
        return Err(CacheError::CorruptEntry(key.to_string()));
    }
    Ok(payload)
}

pub struct ResponseCache {
    store: Box<dyn CacheStore>,
    registry: Arc<Registry>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ResponseCache {
    pub fn new(store: Box<dyn CacheStore>, registry: Arc<Registry>) -> Self {
        ResponseCache {
            store,
            registry,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn in_memory(registry: Arc<Registry>) -> Self {
        Self::new(Box::new(MemoryStore::new()), registry)
    }

    pub fn open(path: &Path, registry: Arc<Registry>) -> Result<Self, CacheError> {
        Ok(Self::new(Box::new(RedbStore::open(path)?), registry))
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<CacheEntry>, CacheError> {
        match self.read(key)? {
            Some(entry) => {
                self.hits.fetch_add(1, Ordering::SeqCst);
                Ok(Some(entry))
            }
            None => {
                self.misses.fetch_add(1, Ordering::SeqCst);
                Ok(None)
            }
        }
    }

    /// Reads without touching hit/miss counters.
    fn read(&self, key: &CacheKey) -> Result<Option<CacheEntry>, CacheError> {
        let Some(record) = self.store.get(key.as_str())? else {
            return Ok(None);
        };
        let payload = unseal(key.as_str(), &record)?;
        let entry: CacheEntry =
            serde_json::from_slice(payload).map_err(|_| CacheError::CorruptEntry(key.to_string()))?;
        if &entry.key != key {
            return Err(CacheError::CorruptEntry(key.to_string()));
        }
        Ok(Some(entry))
    }

    /// Stores `entry` after re-deriving its key and normalized payload.
    /// Last write wins for an identical key.
    pub fn put(&self, entry: &CacheEntry) -> Result<(), CacheError> {
        let expected_key = canonical_key(&entry.exchange.request_template, entry.provider, entry.tool)?;
        if expected_key != entry.key {
            return Err(CacheError::InvalidEntry("key does not match request template".into()));
        }
        if entry.unified_query.tool != entry.tool {
            return Err(CacheError::InvalidEntry("query tool does not match entry tool".into()));
        }
        let adapter = self.registry.lookup(entry.provider, entry.tool)?;
        let normalized = convert_response(adapter.as_ref(), &entry.unified_query, &entry.exchange.raw_response)?;
        if normalized != entry.normalized {
            return Err(CacheError::InvalidEntry(
                "normalized payload differs from converting the raw response".into(),
            ));
        }
        let payload = crate::canonical::to_string(entry);
        self.store.put(entry.key.as_str(), &seal(payload.as_bytes()))
    }

    pub fn stats(&self) -> Result<CacheStats, CacheError> {
        let (entries, bytes) = self.store.size()?;
        Ok(CacheStats {
            hits: self.hits.load(Ordering::SeqCst),
            misses: self.misses.load(Ordering::SeqCst),
            entries,
            bytes,
        })
    }

    /// Every entry, in key order.
    pub fn entries(&self) -> Result<Vec<CacheEntry>, CacheError> {
        let mut out = Vec::new();
        for key in self.store.keys()? {
            let key = CacheKey::parse(&key).ok_or_else(|| CacheError::CorruptEntry(key.clone()))?;
            if let Some(entry) = self.read(&key)? {
                out.push(entry);
            }
        }
        Ok(out)
    }

    /// Explicit, never automatic.
    pub fn purge(&self) -> Result<u64, CacheError> {
        self.store.purge()
    }

    /// Writes every entry as a fixture file; returns the count.
    pub fn export_fixtures(&self, dir: &Path) -> Result<usize, CacheError> {
        let entries = self.entries()?;
        for entry in &entries {
            entry.to_fixture().write(dir)?;
        }
        Ok(entries.len())
    }

    pub fn import_fixture(&self, fixture: &Fixture) -> Result<CacheKey, CacheError> {
        let exchange = fixture.to_exchange().map_err(|e| {
            CacheError::InvalidEntry(format!("fixture raw_response_base64: {e}"))
        })?;
        let entry = CacheEntry::build(&self.registry, fixture.provider, &fixture.unified_query, exchange)?;
        self.put(&entry)?;
        Ok(entry.key)
    }

    /// Loads every fixture under `dir` into the cache; returns the count.
    pub fn import_fixtures(&self, dir: &Path) -> Result<usize, CacheError> {
        let set = FixtureSet::load_dir(dir)?;
        for (_, fixture) in set.iter() {
            self.import_fixture(fixture)?;
        }
        Ok(set.len())
    }
}
