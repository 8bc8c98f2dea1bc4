mod common;

use geoqa_core::adapters::{convert_request, AdapterError, Registry, UnifiedQuery};
use geoqa_core::{ProviderId, ToolKind};

use common::*;

#[test]
fn osm_nearby_is_unsupported() {
    let err = Registry::with_defaults()
        .lookup(ProviderId::OpenStreetMap, ToolKind::NearbySearch)
        .err()
        .expect("no adapter");
    assert!(matches!(err, AdapterError::UnsupportedPair { .. }));
    assert_eq!(err.code(), "UnsupportedPair");
}

#[test]
fn tomtom_text_search_template() {
    let registry = Registry::with_defaults();
    let adapter = registry.lookup(ProviderId::TomTom, ToolKind::TextSearch).unwrap();
    let t = convert_request(adapter.as_ref(), &UnifiedQuery::new(ToolKind::TextSearch).with("query", "Louvre Museum")).unwrap();
    assert_eq!(t.url, "https://api.tomtom.com/search/2/poiSearch/Louvre%20Museum.json");
    assert_eq!(t.query_params["key"], "key:TOMTOM_API_KEY");
    assert_eq!(t.query_params["limit"], "5");
    assert_eq!(t.query_params["language"], "en-US");
}

#[test]
fn templates_only_carry_placeholders() {
    let registry = Registry::with_defaults();
    for s in scenarios() {
        for step in &s.steps {
            let adapter = registry.lookup(step.provider, step.query.tool).unwrap();
            let t = convert_request(adapter.as_ref(), &step.query).unwrap();
            let text = serde_json::to_string(&t).unwrap();
            assert!(!text.contains(SENTINEL));
            for (name, value) in &t.query_params {
                if name == "key" {
                    assert!(value.starts_with("key:"), "{} {name}={value}", s.id);
                }
            }
        }
    }
}

#[test]
fn every_recording_normalizes_without_error() {
    let wb = replay_workbench();
    for s in scenarios() {
        for step in &s.steps {
            let outcome = wb.run_tool(step.provider, &step.query).unwrap_or_else(|e| panic!("{}: {e}", s.id));
            let n = outcome.draft.normalized();
            assert!(!n.places.is_empty() || !n.routes.is_empty(), "{} returned nothing", s.id);
        }
    }
}

#[test]
fn transit_is_rejected_before_any_request() {
    let wb = replay_workbench();
    let q = UnifiedQuery::new(ToolKind::ComputeRoutes).with("travel_mode", "TRANSIT");
    let err = wb.run_tool(ProviderId::Google, &q).unwrap_err();
    assert_eq!(err.code(), "UnsupportedParameter");
    assert_eq!(wb.gateway.network_calls(), 0);
}
