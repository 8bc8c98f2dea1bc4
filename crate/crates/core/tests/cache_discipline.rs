mod common;

use std::sync::Arc;

use geoqa_core::adapters::{Registry, UnifiedQuery};
use geoqa_core::cache::ResponseCache;
use geoqa_core::gateway::Gateway;
use geoqa_core::pipeline::Workbench;
use geoqa_core::{ProviderId, ToolKind};

use common::*;

fn louvre() -> UnifiedQuery {
    UnifiedQuery::new(ToolKind::TextSearch).with("query", "Louvre Museum")
}

#[test]
fn second_call_is_a_hit_with_identical_payload() {
    let wb = replay_workbench();
    let first = wb.run_tool(ProviderId::Google, &louvre()).unwrap();
    let second = wb.run_tool(ProviderId::Google, &louvre()).unwrap();
    assert_eq!(first.draft.normalized(), second.draft.normalized());
    let stats = wb.cache.stats().unwrap();
    assert_eq!((stats.hits, stats.misses), (1, 1));
    assert_eq!(wb.gateway.network_calls(), 0);
}

#[test]
fn fresh_store_reports_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cache = ResponseCache::open(&dir.path().join("c.redb"), Arc::new(Registry::with_defaults())).unwrap();
    let stats = cache.stats().unwrap();
    assert_eq!((stats.entries, stats.hits, stats.misses), (0, 0, 0));
}

#[test]
fn entries_survive_reopen_and_purge_clears_them() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.redb");
    let registry = Arc::new(Registry::with_defaults());
    {
        let cache = Arc::new(ResponseCache::open(&path, registry.clone()).unwrap());
        let wb = Workbench::new(registry.clone(), cache, Arc::new(Gateway::replay_only(fixtures())));
        wb.run_tool(ProviderId::TomTom, &louvre()).unwrap();
    }
    let cache = ResponseCache::open(&path, registry).unwrap();
    assert_eq!(cache.entries().unwrap().len(), 1);
    assert_eq!(cache.purge().unwrap(), 1);
    assert!(cache.entries().unwrap().is_empty());
}

#[test]
fn export_then_import_is_lossless() {
    let wb = replay_workbench();
    for s in scenarios().iter().take(6) {
        for step in &s.steps {
            wb.run_tool(step.provider, &step.query).unwrap();
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let n = wb.cache.export_fixtures(dir.path()).unwrap();
    let restored = ResponseCache::in_memory(Arc::new(Registry::with_defaults()));
    assert_eq!(restored.import_fixtures(dir.path()).unwrap(), n);
    assert_eq!(restored.entries().unwrap(), wb.cache.entries().unwrap());
}

#[test]
fn replay_miss_is_typed() {
    let wb = replay_workbench();
    let q = UnifiedQuery::new(ToolKind::TextSearch).with("query", "A place that was never recorded");
    let err = wb.run_tool(ProviderId::Google, &q).unwrap_err();
    assert_eq!(err.code(), "ReplayMiss");
}
