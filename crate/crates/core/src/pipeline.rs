//! One tool run end to end: adapter lookup, request conversion, cache,
//! gateway, response conversion, context entry.

use std::sync::Arc;

use thiserror::Error;

use crate::adapters::{
    convert_request, convert_response, normalize_route_request, AdapterError, Registry, UnifiedQuery,
};
use crate::cache::{canonical_key, CacheEntry, CacheError, CacheKey, ResponseCache};
use crate::context::{ContextError, EntryDraft};
use crate::gateway::{ExchangeRequest, Gateway, GatewayError};
use crate::model::ProviderId;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Context(#[from] ContextError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Adapter(e) => e.code(),
            PipelineError::Cache(CacheError::Adapter(e)) => e.code(),
            PipelineError::Cache(CacheError::StorageUnavailable(_)) => "StorageUnavailable",
            PipelineError::Cache(CacheError::CorruptEntry(_)) => "CorruptEntry",
            PipelineError::Cache(CacheError::ResolvedTemplate) => "ResolvedTemplate",
            PipelineError::Cache(CacheError::InvalidEntry(_)) => "InvalidEntry",
            PipelineError::Cache(CacheError::Fixture(_)) => "FixtureError",
            PipelineError::Gateway(e) => e.code(),
            PipelineError::Context(ContextError::EmptyContext) => "EmptyContext",
            PipelineError::Context(ContextError::InvalidEntry(_)) => "InvalidEntry",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToolOutcome {
    pub draft: EntryDraft,
    pub cache_key: CacheKey,
    pub cache_hit: bool,
}

/// Shared, read-mostly services behind every tool run.
#[derive(Clone)]
pub struct Workbench {
    pub registry: Arc<Registry>,
    pub cache: Arc<ResponseCache>,
    pub gateway: Arc<Gateway>,
}

impl Workbench {
    pub fn new(registry: Arc<Registry>, cache: Arc<ResponseCache>, gateway: Arc<Gateway>) -> Self {
        Workbench {
            registry,
            cache,
            gateway,
        }
    }

    /// Runs `query` against `provider`. A cache hit performs no gateway
    /// call; the stored raw bytes are converted again for this query.
    pub fn run_tool(&self, provider: ProviderId, query: &UnifiedQuery) -> Result<ToolOutcome, PipelineError> {
        let adapter = self.registry.lookup(provider, query.tool)?;
        let query = if query.tool.is_routing() {
            normalize_route_request(query)?
        } else {
            query.clone()
        };
        let template = convert_request(adapter.as_ref(), &query)?;
        let cache_key = canonical_key(&template, provider, query.tool)?;
        let (exchange, cache_hit) = match self.cache.get(&cache_key)? {
            Some(entry) => (entry.exchange, true),
            None => {
                let exchange = self.gateway.execute(&ExchangeRequest {
                    provider,
                    query: &query,
                    template: &template,
                })?;
                let entry = CacheEntry::build(&self.registry, provider, &query, exchange)?;
                self.cache.put(&entry)?;
                (entry.exchange, false)
            }
        };
        let normalized = convert_response(adapter.as_ref(), &query, &exchange.raw_response)?;
        let draft = EntryDraft::new(provider, query, exchange, normalized, cache_key.clone())?;
        Ok(ToolOutcome {
            draft,
            cache_key,
            cache_hit,
        })
    }
}
