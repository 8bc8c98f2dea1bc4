//! Provider adapters: each binds one map API to one tool by converting a
//! provider-agnostic [`UnifiedQuery`] into a secret-free [`RequestTemplate`]
//! and a raw provider document into a [`NormalizedResponse`].
//!
//! New providers implement [`ProviderAdapter`] and register with the
//! [`Registry`]; nothing else in the crate needs to change.

mod google;
mod json;
mod osm;
mod registry;
mod replay;
mod tomtom;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    haversine_distance, validate_place, validate_route, LatLng, Place, ProviderId, RouteResult,
    ToolKind, TravelMode, Waypoint,
};
use crate::polyline::EncodedPolyline;

pub use google::google_adapters;
pub use osm::openstreetmap_adapters;
pub use registry::{table_supports, Registry};
pub use replay::{replay_adapters, ReplayAdapter, REPLAY_SCHEME};
pub use tomtom::tomtom_adapters;

/// Routing preference every route-bearing query is pinned to.
pub const TRAFFIC_UNAWARE: &str = "TRAFFIC_UNAWARE";

/// Prefix marking a credential placeholder in a request template.
pub const PLACEHOLDER_PREFIX: &str = "key:";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdapterError {
    #[error("unsupported parameter '{key}': {detail}")]
    UnsupportedParameter { key: String, detail: String },
    #[error("missing parameter '{0}'")]
    MissingParameter(String),
    #[error("invalid parameter '{key}': {detail}")]
    InvalidParameter { key: String, detail: String },
    #[error("unsupported provider/tool pair ({provider}, {tool}): {detail}")]
    UnsupportedPair {
        provider: ProviderId,
        tool: ToolKind,
        detail: String,
    },
    #[error("malformed provider response at {path}: {detail}")]
    MalformedProviderResponse { path: String, detail: String },
}

impl AdapterError {
    pub fn code(&self) -> &'static str {
        match self {
            AdapterError::UnsupportedParameter { .. } => "UnsupportedParameter",
            AdapterError::MissingParameter(_) => "MissingParameter",
            AdapterError::InvalidParameter { .. } => "InvalidParameter",
            AdapterError::UnsupportedPair { .. } => "UnsupportedPair",
            AdapterError::MalformedProviderResponse { .. } => "MalformedProviderResponse",
        }
    }

    pub(crate) fn unsupported(key: &str, detail: impl Into<String>) -> Self {
        AdapterError::UnsupportedParameter {
            key: key.to_string(),
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(key: &str, detail: impl Into<String>) -> Self {
        AdapterError::InvalidParameter {
            key: key.to_string(),
            detail: detail.into(),
        }
    }
}

/// Provider-agnostic request for one tool.
///
/// Recognised parameter names: `query`, `place_id`, `anchor`, `place_type`,
/// `min_rating`, `price_levels`, `rank_by`, `radius_meters`, `origin`,
/// `destination`, `intermediates`, `travel_mode`, `traffic_awareness`,
/// `compute_alternatives`, `route`, `limit`. Each adapter accepts a subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedQuery {
    pub tool: ToolKind,
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
}

impl UnifiedQuery {
    pub fn new(tool: ToolKind) -> Self {
        UnifiedQuery {
            tool,
            parameters: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.set(key, value);
        self
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("parameter values serialize");
        self.parameters.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.parameters.get(key)
    }

    /// SHA-256 over the canonical JSON form.
    pub fn digest(&self) -> String {
        let canonical = crate::canonical::to_string(self);
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn str_param(&self, key: &str) -> Result<Option<&str>, AdapterError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(AdapterError::invalid(key, "expected a string")),
        }
    }

    pub fn require_str(&self, key: &str) -> Result<&str, AdapterError> {
        match self.str_param(key)? {
            Some(s) if !s.trim().is_empty() => Ok(s),
            Some(_) => Err(AdapterError::invalid(key, "must not be empty")),
            None => Err(AdapterError::MissingParameter(key.to_string())),
        }
    }

    pub fn f64_param(&self, key: &str) -> Result<Option<f64>, AdapterError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| AdapterError::invalid(key, "expected a number")),
        }
    }

    pub fn u64_param(&self, key: &str) -> Result<Option<u64>, AdapterError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| AdapterError::invalid(key, "expected a non-negative integer")),
        }
    }

    pub fn bool_param(&self, key: &str) -> Result<Option<bool>, AdapterError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_bool()
                .map(Some)
                .ok_or_else(|| AdapterError::invalid(key, "expected a boolean")),
        }
    }

    fn typed<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<Option<T>, AdapterError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| AdapterError::invalid(key, e.to_string())),
        }
    }

    pub fn waypoint(&self, key: &str) -> Result<Option<Waypoint>, AdapterError> {
        self.typed(key)
    }

    pub fn require_waypoint(&self, key: &str) -> Result<Waypoint, AdapterError> {
        self.waypoint(key)?
            .ok_or_else(|| AdapterError::MissingParameter(key.to_string()))
    }

    pub fn intermediates(&self) -> Result<Vec<Waypoint>, AdapterError> {
        Ok(self.typed("intermediates")?.unwrap_or_default())
    }

    pub fn travel_mode(&self) -> Result<TravelMode, AdapterError> {
        match self.str_param("travel_mode")? {
            None => Ok(TravelMode::Drive),
            Some(s) => s
                .parse()
                .map_err(|e: crate::model::ModelError| AdapterError::invalid("travel_mode", e.to_string())),
        }
    }

    pub fn route(&self) -> Result<EncodedPolyline, AdapterError> {
        self.typed::<EncodedPolyline>("route")?
            .ok_or_else(|| AdapterError::MissingParameter("route".into()))
    }

    pub fn price_levels(&self) -> Result<Option<BTreeSet<u8>>, AdapterError> {
        let levels: Option<BTreeSet<u8>> = self.typed("price_levels")?;
        if let Some(levels) = &levels {
            if levels.iter().any(|&l| l > 4) {
                return Err(AdapterError::invalid("price_levels", "tiers are 0-4"));
            }
        }
        Ok(levels)
    }

    pub fn rank_by(&self) -> Result<RankBy, AdapterError> {
        match self.str_param("rank_by")? {
            None | Some("distance") => Ok(RankBy::Distance),
            Some("relevance") => Ok(RankBy::Relevance),
            Some(other) => Err(AdapterError::invalid(
                "rank_by",
                format!("'{other}' is not distance|relevance"),
            )),
        }
    }

    pub fn limit(&self, default: u64, max: u64) -> Result<u64, AdapterError> {
        match self.u64_param("limit")? {
            None => Ok(default),
            Some(0) => Err(AdapterError::invalid("limit", "must be at least 1")),
            Some(n) if n > max => Err(AdapterError::invalid("limit", format!("at most {max}"))),
            Some(n) => Ok(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankBy {
    Distance,
    Relevance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HttpMethod {
    Get,
    Post,
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HttpMethod::Get => "GET",
            HttpMethod::Post => "POST",
        })
    }
}

/// A provider HTTP request in placeholder form: credentials appear only as
/// `key:<ENV_NAME>` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestTemplate {
    pub url: String,
    pub method: HttpMethod,
    #[serde(default)]
    pub query_params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Value>,
}

/// Query parameter names that must only ever hold placeholders.
pub const CREDENTIAL_PARAMS: &[&str] = &["key", "apiKey", "api_key", "subscription-key", "access_token"];

impl RequestTemplate {
    pub fn get(url: impl Into<String>) -> Self {
        RequestTemplate {
            url: url.into(),
            method: HttpMethod::Get,
            query_params: BTreeMap::new(),
            body: None,
        }
    }

    pub fn post(url: impl Into<String>, body: Value) -> Self {
        RequestTemplate {
            url: url.into(),
            method: HttpMethod::Post,
            query_params: BTreeMap::new(),
            body: Some(body),
        }
    }

    pub fn param(mut self, name: &str, value: impl ToString) -> Self {
        self.query_params.insert(name.to_string(), value.to_string());
        self
    }

    pub fn credential(self, name: &str, env_name: &str) -> Self {
        self.param(name, format!("{PLACEHOLDER_PREFIX}{env_name}"))
    }

    /// Environment variable names referenced by placeholders, in param order.
    pub fn placeholders(&self) -> Vec<&str> {
        self.query_params
            .values()
            .filter_map(|v| placeholder_name(v))
            .collect()
    }

    /// True when every credential-bearing parameter still holds a placeholder.
    pub fn is_placeholder_form(&self) -> bool {
        self.query_params
            .iter()
            .filter(|(k, _)| CREDENTIAL_PARAMS.contains(&k.as_str()))
            .all(|(_, v)| placeholder_name(v).is_some())
    }
}

/// Returns the environment variable name if `value` is a well-formed placeholder.
pub fn placeholder_name(value: &str) -> Option<&str> {
    let name = value.strip_prefix(PLACEHOLDER_PREFIX)?;
    let mut chars = name.chars();
    let first = chars.next()?;
    let valid = (first.is_ascii_uppercase() || first == '_')
        && chars.all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_');
    valid.then_some(name)
}

/// How a nearby distance was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceSource {
    Provider,
    Computed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceDistance {
    pub place_id: String,
    pub meters: f64,
    pub source: DistanceSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedResponse {
    pub kind: ToolKind,
    #[serde(default)]
    pub places: Vec<Place>,
    #[serde(default)]
    pub routes: Vec<RouteResult>,
    /// Anchor distances for nearby results, parallel to `places`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distances: Vec<PlaceDistance>,
}

impl NormalizedResponse {
    pub fn places(kind: ToolKind, places: Vec<Place>) -> Self {
        NormalizedResponse {
            kind,
            places,
            routes: Vec::new(),
            distances: Vec::new(),
        }
    }

    pub fn routes(routes: Vec<RouteResult>) -> Self {
        NormalizedResponse {
            kind: ToolKind::ComputeRoutes,
            places: Vec::new(),
            routes,
            distances: Vec::new(),
        }
    }

    pub fn distance_of(&self, place_id: &str) -> Option<&PlaceDistance> {
        self.distances.iter().find(|d| d.place_id == place_id)
    }

    /// Checks the kind/payload pairing and every place and route invariant.
    pub fn check(&self) -> Result<(), AdapterError> {
        let places_only = matches!(
            self.kind,
            ToolKind::TextSearch | ToolKind::PlaceDetails | ToolKind::NearbySearch
        );
        if places_only && !self.routes.is_empty() {
            return Err(malformed("routes", format!("{} carries no routes", self.kind)));
        }
        if self.kind == ToolKind::ComputeRoutes && !self.places.is_empty() {
            return Err(malformed("places", "ComputeRoutes carries no places"));
        }
        for (i, place) in self.places.iter().enumerate() {
            if let Some(v) = validate_place(place).into_iter().next() {
                return Err(malformed(&format!("places[{i}].{}", v.field), v.message));
            }
        }
        for (i, route) in self.routes.iter().enumerate() {
            if let Some(v) = validate_route(route).into_iter().next() {
                return Err(malformed(&format!("routes[{i}].{}", v.field), v.message));
            }
        }
        Ok(())
    }
}

pub(crate) fn malformed(path: &str, detail: impl Into<String>) -> AdapterError {
    AdapterError::MalformedProviderResponse {
        path: path.to_string(),
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub code: String,
    pub label: String,
}

/// Static description of one (provider, tool) binding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterDescriptor {
    pub provider: ProviderId,
    pub tool: ToolKind,
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_vocabulary: Option<Vec<Category>>,
    pub allowed_params: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polyline_precision: Option<u8>,
}

impl AdapterDescriptor {
    pub fn new(provider: ProviderId, tool: ToolKind, family: &str, allowed: &[&str]) -> Self {
        AdapterDescriptor {
            provider,
            tool,
            family: family.to_string(),
            category_vocabulary: None,
            allowed_params: allowed.iter().map(|s| s.to_string()).collect(),
            polyline_precision: None,
        }
    }

    pub fn with_vocabulary(mut self, vocabulary: Vec<Category>) -> Self {
        self.category_vocabulary = Some(vocabulary);
        self
    }

    pub fn with_precision(mut self, precision: u8) -> Self {
        self.polyline_precision = Some(precision);
        self
    }

    /// Resolves a category by code or label (case-insensitive) to its provider code.
    pub fn resolve_category(&self, wanted: &str) -> Result<&Category, AdapterError> {
        let vocabulary = self
            .category_vocabulary
            .as_deref()
            .ok_or_else(|| AdapterError::unsupported("place_type", "adapter has no category vocabulary"))?;
        vocabulary
            .iter()
            .find(|c| c.code.eq_ignore_ascii_case(wanted) || c.label.eq_ignore_ascii_case(wanted))
            .ok_or_else(|| {
                AdapterError::unsupported(
                    "place_type",
                    format!("'{wanted}' is not in the {} category vocabulary", self.provider),
                )
            })
    }
}

pub(crate) fn load_vocabulary(json: &str) -> Vec<Category> {
    serde_json::from_str(json).expect("bundled category vocabulary is valid JSON")
}

/// One provider binding. Implementors only handle provider specifics;
/// [`convert_request`] and [`convert_response`] wrap them with the shared checks.
pub trait ProviderAdapter: Send + Sync {
    fn descriptor(&self) -> &AdapterDescriptor;

    fn build_request(&self, query: &UnifiedQuery) -> Result<RequestTemplate, AdapterError>;

    fn parse_response(
        &self,
        query: &UnifiedQuery,
        raw: &Value,
    ) -> Result<NormalizedResponse, AdapterError>;

    /// Whether the template pins routing to ignore live traffic, in this
    /// provider's dialect. Only meaningful for routing tools.
    fn is_traffic_unaware(&self, template: &RequestTemplate) -> bool;
}

/// Validates `query` against the adapter and builds the request template.
pub fn convert_request(
    adapter: &dyn ProviderAdapter,
    query: &UnifiedQuery,
) -> Result<RequestTemplate, AdapterError> {
    let descriptor = adapter.descriptor();
    if query.tool != descriptor.tool {
        return Err(AdapterError::UnsupportedPair {
            provider: descriptor.provider,
            tool: query.tool,
            detail: format!("adapter serves {}", descriptor.tool),
        });
    }
    if let Some(key) = query
        .parameters
        .keys()
        .find(|k| !descriptor.allowed_params.contains(k.as_str()))
    {
        return Err(AdapterError::unsupported(
            key,
            format!("not accepted by {} {}", descriptor.provider, descriptor.tool),
        ));
    }
    if query.travel_mode()? == TravelMode::Transit {
        return Err(AdapterError::unsupported(
            "travel_mode",
            "TRANSIT is excluded because schedules vary",
        ));
    }
    let template = adapter.build_request(query)?;
    debug_assert!(template.is_placeholder_form());
    Ok(template)
}

/// Parses a raw provider body into the unified schema and checks the result.
pub fn convert_response(
    adapter: &dyn ProviderAdapter,
    query: &UnifiedQuery,
    raw: &[u8],
) -> Result<NormalizedResponse, AdapterError> {
    let doc: Value =
        serde_json::from_slice(raw).map_err(|e| malformed("$", format!("invalid JSON: {e}")))?;
    let normalized = adapter.parse_response(query, &doc)?;
    if normalized.kind != adapter.descriptor().tool {
        return Err(malformed("kind", "response kind does not match adapter tool"));
    }
    normalized.check()?;
    Ok(normalized)
}

/// Pins routing queries to traffic-unaware evaluation and rejects TRANSIT.
pub fn normalize_route_request(query: &UnifiedQuery) -> Result<UnifiedQuery, AdapterError> {
    if !query.tool.is_routing() {
        return Err(AdapterError::invalid(
            "tool",
            format!("{} is not a routing tool", query.tool),
        ));
    }
    if query.travel_mode()? == TravelMode::Transit {
        return Err(AdapterError::unsupported(
            "travel_mode",
            "TRANSIT is excluded because schedules vary",
        ));
    }
    let mut out = query.clone();
    out.set("traffic_awareness", TRAFFIC_UNAWARE);
    Ok(out)
}

const PATH_SEGMENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

/// Percent-encodes one URL path segment.
pub fn encode_path_segment(segment: &str) -> String {
    utf8_percent_encode(segment, PATH_SEGMENT).to_string()
}

/// Orders nearby places by anchor distance, using provider distances when
/// present and great-circle distances otherwise. Ties break on place id.
pub(crate) fn rank_by_distance(
    anchor: LatLng,
    places: Vec<Place>,
    provider_distances: Vec<Option<f64>>,
    rank: RankBy,
) -> (Vec<Place>, Vec<PlaceDistance>) {
    let mut ranked: Vec<(Place, PlaceDistance)> = places
        .into_iter()
        .zip(provider_distances)
        .map(|(place, provided)| {
            let distance = match provided {
                Some(meters) => PlaceDistance {
                    place_id: place.id.clone(),
                    meters,
                    source: DistanceSource::Provider,
                },
                None => PlaceDistance {
                    place_id: place.id.clone(),
                    meters: haversine_distance(anchor, place.location),
                    source: DistanceSource::Computed,
                },
            };
            (place, distance)
        })
        .collect();
    if rank == RankBy::Distance {
        crate::par::sort_by(&mut ranked, |a, b| {
            a.1.meters
                .total_cmp(&b.1.meters)
                .then_with(|| a.0.id.cmp(&b.0.id))
        });
    }
    ranked.into_iter().unzip()
}

/// Orders places by the index of their nearest vertex on the route, then by
/// distance to that vertex.
pub(crate) fn order_along_route(route: &[LatLng], places: Vec<Place>) -> Vec<Place> {
    if route.is_empty() {
        return places;
    }
    let mut keyed: Vec<((usize, f64), Place)> = crate::par::map(&places, |p| {
        route
            .iter()
            .enumerate()
            .map(|(i, v)| (i, haversine_distance(*v, p.location)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("route is non-empty")
    })
    .into_iter()
    .zip(places)
    .collect();
    keyed.sort_by(|a, b| {
        a.0 .0
            .cmp(&b.0 .0)
            .then(a.0 .1.total_cmp(&b.0 .1))
            .then_with(|| a.1.id.cmp(&b.1.id))
    });
    keyed.into_iter().map(|(_, p)| p).collect()
}

pub(crate) fn convert_waypoints(
    query: &UnifiedQuery,
) -> Result<(Waypoint, Waypoint, Vec<Waypoint>), AdapterError> {
    Ok((
        query.require_waypoint("origin")?,
        query.require_waypoint("destination")?,
        query.intermediates()?,
    ))
}

/// Applies `min_rating` / `price_levels` filters that the provider cannot
/// express server-side. Places lacking the attribute are dropped when filtered.
pub(crate) fn filter_places(query: &UnifiedQuery, places: Vec<Place>) -> Result<Vec<Place>, AdapterError> {
    let min_rating = query.f64_param("min_rating")?;
    let tiers = query.price_levels()?;
    Ok(places
        .into_iter()
        .filter(|p| match min_rating {
            Some(min) => p.rating.is_some_and(|r| r >= min),
            None => true,
        })
        .filter(|p| match &tiers {
            Some(tiers) => p.price_level.is_some_and(|t| tiers.contains(&t)),
            None => true,
        })
        .collect())
}
