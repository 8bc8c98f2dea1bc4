//! The replay provider serves recorded normalized responses. Its requests
//! never leave the process: the URL is `replay://<query digest>`.

use serde_json::Value;

use super::{
    malformed, AdapterDescriptor, AdapterError, NormalizedResponse, ProviderAdapter,
    RequestTemplate, UnifiedQuery,
};
use crate::model::{ProviderId, ToolKind};

pub const REPLAY_SCHEME: &str = "replay://";

const ALL_PARAMS: &[&str] = &[
    "query",
    "place_id",
    "anchor",
    "place_type",
    "min_rating",
    "price_levels",
    "rank_by",
    "radius_meters",
    "origin",
    "destination",
    "intermediates",
    "travel_mode",
    "traffic_awareness",
    "compute_alternatives",
    "route",
    "limit",
];

pub struct ReplayAdapter {
    descriptor: AdapterDescriptor,
}

impl ReplayAdapter {
    pub fn new(tool: ToolKind) -> Self {
        ReplayAdapter {
            descriptor: AdapterDescriptor::new(ProviderId::Replay, tool, "replay", ALL_PARAMS).with_precision(5),
        }
    }
}

pub fn replay_adapters() -> Vec<Box<dyn ProviderAdapter>> {
    ToolKind::ALL
        .into_iter()
        .map(|tool| Box::new(ReplayAdapter::new(tool)) as Box<dyn ProviderAdapter>)
        .collect()
}

impl ProviderAdapter for ReplayAdapter {
    fn descriptor(&self) -> &AdapterDescriptor {
        &self.descriptor
    }

    fn build_request(&self, query: &UnifiedQuery) -> Result<RequestTemplate, AdapterError> {
        Ok(RequestTemplate::get(format!("{REPLAY_SCHEME}{}", query.digest())))
    }

    /// The recorded body is itself a normalized response.
    fn parse_response(&self, _: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        serde_json::from_value(raw.clone()).map_err(|e| malformed("$", e.to_string()))
    }

    fn is_traffic_unaware(&self, _: &RequestTemplate) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::convert_request;

    #[test]
    fn url_is_scheme_plus_query_digest() {
        let q = UnifiedQuery::new(ToolKind::ComputeRoutes).with("travel_mode", "WALK");
        let t = convert_request(&ReplayAdapter::new(ToolKind::ComputeRoutes), &q).unwrap();
        assert_eq!(t.url, format!("replay://{}", q.digest()));
        assert!(t.query_params.is_empty());
    }
}
