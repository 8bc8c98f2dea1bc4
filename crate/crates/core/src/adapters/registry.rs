use std::collections::BTreeMap;
use std::sync::Arc;

use super::{
    google_adapters, openstreetmap_adapters, replay_adapters, tomtom_adapters, AdapterDescriptor,
    AdapterError, ProviderAdapter,
};
use crate::model::{ProviderId, ToolKind};

/// Provider coverage per tool. Replay covers every tool.
pub fn table_supports(provider: ProviderId, tool: ToolKind) -> bool {
    use ProviderId::*;
    use ToolKind::*;
    match tool {
        _ if provider == Replay => true,
        TextSearch | PlaceDetails => matches!(provider, Google | OpenStreetMap | Mapbox | TomTom | Here | Azure),
        NearbySearch | SearchAlongRoute => matches!(provider, Google | TomTom),
        ComputeRoutes => matches!(provider, Google | OpenStreetMap | TomTom),
    }
}

enum Slot {
    Ready(Arc<dyn ProviderAdapter>),
    /// Known to the coverage table but not implemented yet.
    Stub(&'static str),
}

/// Adapter lookup by (provider, tool). Built once, then read-only.
pub struct Registry {
    slots: BTreeMap<(ProviderId, ToolKind), Slot>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            slots: BTreeMap::new(),
        }
    }

    /// Google, TomTom, OpenStreetMap and replay adapters, plus stubs for the
    /// remaining providers in the coverage table.
    pub fn with_defaults() -> Self {
        let mut registry = Registry::empty();
        let shipped = google_adapters()
            .into_iter()
            .chain(tomtom_adapters())
            .chain(openstreetmap_adapters())
            .chain(replay_adapters());
        for adapter in shipped {
            registry
                .register(adapter)
                .expect("shipped adapters are unique and covered");
        }
        for provider in [ProviderId::Mapbox, ProviderId::Here, ProviderId::Azure] {
            for tool in [ToolKind::TextSearch, ToolKind::PlaceDetails] {
                let note = if provider == ProviderId::Azure {
                    "stub: text search and details share the fuzzy search endpoint; not implemented"
                } else {
                    "stub: not implemented"
                };
                registry.slots.insert((provider, tool), Slot::Stub(note));
            }
        }
        registry
    }

    pub fn register(&mut self, adapter: Box<dyn ProviderAdapter>) -> Result<(), AdapterError> {
        let d = adapter.descriptor();
        let key = (d.provider, d.tool);
        if !table_supports(d.provider, d.tool) {
            return Err(AdapterError::UnsupportedPair {
                provider: d.provider,
                tool: d.tool,
                detail: "provider does not offer this tool".into(),
            });
        }
        if matches!(self.slots.get(&key), Some(Slot::Ready(_))) {
            return Err(AdapterError::UnsupportedPair {
                provider: d.provider,
                tool: d.tool,
                detail: "already registered".into(),
            });
        }
        self.slots.insert(key, Slot::Ready(Arc::from(adapter)));
        Ok(())
    }

    pub fn lookup(&self, provider: ProviderId, tool: ToolKind) -> Result<Arc<dyn ProviderAdapter>, AdapterError> {
        match self.slots.get(&(provider, tool)) {
            Some(Slot::Ready(adapter)) => Ok(Arc::clone(adapter)),
            Some(Slot::Stub(note)) => Err(AdapterError::UnsupportedPair {
                provider,
                tool,
                detail: (*note).to_string(),
            }),
            None => Err(AdapterError::UnsupportedPair {
                provider,
                tool,
                detail: if table_supports(provider, tool) {
                    "no adapter registered".into()
                } else {
                    "provider does not offer this tool".into()
                },
            }),
        }
    }

    pub fn descriptor(&self, provider: ProviderId, tool: ToolKind) -> Result<AdapterDescriptor, AdapterError> {
        self.lookup(provider, tool).map(|a| a.descriptor().clone())
    }

    /// Descriptors of every implemented adapter, in (provider, tool) order.
    pub fn descriptors(&self) -> Vec<AdapterDescriptor> {
        self.slots
            .values()
            .filter_map(|slot| match slot {
                Slot::Ready(a) => Some(a.descriptor().clone()),
                Slot::Stub(_) => None,
            })
            .collect()
    }
}
