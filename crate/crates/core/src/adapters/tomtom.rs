use serde_json::{json, Value};

use super::json::Node;
use super::{
    convert_waypoints, load_vocabulary, malformed, order_along_route, rank_by_distance,
    AdapterDescriptor, AdapterError, NormalizedResponse, ProviderAdapter, RequestTemplate,
    UnifiedQuery,
};
use crate::model::{Place, ProviderId, RouteResult, RouteStep, ToolKind, TravelMode};
use crate::polyline::encode_polyline;

const SEARCH_BASE: &str = "https://api.tomtom.com/search/2";
const ROUTING_BASE: &str = "https://api.tomtom.com/routing/1/calculateRoute";
const KEY_ENV: &str = "TOMTOM_API_KEY";
const LANGUAGE: &str = "en-US";
const VOCABULARY: &str = include_str!("../../data/categories/tomtom.json");

pub fn tomtom_adapters() -> Vec<Box<dyn ProviderAdapter>> {
    vec![
        Box::new(TextSearch::new()),
        Box::new(PlaceDetails::new()),
        Box::new(NearbySearch::new()),
        Box::new(ComputeRoutes::new()),
        Box::new(SearchAlongRoute::new()),
    ]
}

fn search_url(endpoint: &str, query: &str) -> String {
    format!("{SEARCH_BASE}/{endpoint}/{}.json", super::encode_path_segment(query))
}

/// Maps one search result (`results[i]`) onto a place.
fn parse_place(node: &Node<'_>) -> Result<Place, AdapterError> {
    let id = node.field("id")?.id_string()?;
    let name = node.field("poi")?.field("name")?.non_empty_str()?;
    let address = node.field("address")?.field("freeformAddress")?.str()?;
    let location = node.field("position")?.latlng("lat", "lon")?;
    Ok(Place::new(ProviderId::TomTom, id, name, address, location))
}

fn results(raw: &serde_json::Value) -> Result<Vec<Node<'_>>, AdapterError> {
    Node::root(raw).field("results")?.items()
}

pub struct TextSearch {
    descriptor: AdapterDescriptor,
}

impl TextSearch {
    fn new() -> Self {
        TextSearch {
            descriptor: AdapterDescriptor::new(ProviderId::TomTom, ToolKind::TextSearch, "tomtom", &["query", "limit"]),
        }
    }
}

impl ProviderAdapter for TextSearch {
    fn descriptor(&self) -> &AdapterDescriptor {
        &self.descriptor
    }

    fn build_request(&self, query: &UnifiedQuery) -> Result<RequestTemplate, AdapterError> {
        let text = query.require_str("query")?;
        Ok(RequestTemplate::get(search_url("poiSearch", text))
            .credential("key", KEY_ENV)
            .param("limit", query.limit(5, 100)?)
            .param("language", LANGUAGE))
    }

    fn parse_response(&self, _: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        let places = results(raw)?.iter().map(parse_place).collect::<Result<_, _>>()?;
        Ok(NormalizedResponse::places(ToolKind::TextSearch, places))
    }

    fn is_traffic_unaware(&self, _: &RequestTemplate) -> bool {
        true
    }
}

pub struct PlaceDetails {
    descriptor: AdapterDescriptor,
}

impl PlaceDetails {
    fn new() -> Self {
        PlaceDetails {
            descriptor: AdapterDescriptor::new(ProviderId::TomTom, ToolKind::PlaceDetails, "tomtom", &["place_id"]),
        }
    }
}

fn two_digits(node: &Node<'_>, key: &str) -> Result<String, AdapterError> {
    Ok(format!("{:02}", node.field(key)?.u64()?))
}

/// `openingHours.timeRanges` as "YYYY-MM-DD HH:MM-HH:MM" lines.
fn opening_hours(poi: &Node<'_>) -> Result<Option<Vec<String>>, AdapterError> {
    let Some(hours) = poi.opt("openingHours") else {
        return Ok(None);
    };
    let lines = hours
        .opt_items("timeRanges")?
        .iter()
        .map(|range| {
            let start = range.field("startTime")?;
            let end = range.field("endTime")?;
            Ok(format!(
                "{} {}:{}-{}:{}",
                start.field("date")?.str()?,
                two_digits(&start, "hour")?,
                two_digits(&start, "minute")?,
                two_digits(&end, "hour")?,
                two_digits(&end, "minute")?,
            ))
        })
        .collect::<Result<Vec<_>, AdapterError>>()?;
    Ok(Some(lines))
}

impl ProviderAdapter for PlaceDetails {
    fn descriptor(&self) -> &AdapterDescriptor {
        &self.descriptor
    }

    fn build_request(&self, query: &UnifiedQuery) -> Result<RequestTemplate, AdapterError> {
        Ok(RequestTemplate::get(format!("{SEARCH_BASE}/place.json"))
            .param("entityId", query.require_str("place_id")?)
            .credential("key", KEY_ENV)
            .param("language", LANGUAGE)
            .param("openingHours", "nextSevenDays"))
    }

    fn parse_response(&self, _: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        let mut places = Vec::new();
        for node in results(raw)? {
            let mut place = parse_place(&node)?;
            place.opening_hours = opening_hours(&node.field("poi")?)?;
            places.push(place);
        }
        Ok(NormalizedResponse::places(ToolKind::PlaceDetails, places))
    }

    fn is_traffic_unaware(&self, _: &RequestTemplate) -> bool {
        true
    }
}

pub struct NearbySearch {
    descriptor: AdapterDescriptor,
}

impl NearbySearch {
    fn new() -> Self {
        NearbySearch {
            descriptor: AdapterDescriptor::new(
                ProviderId::TomTom,
                ToolKind::NearbySearch,
                "tomtom",
                &["anchor", "place_type", "radius_meters", "rank_by", "limit"],
            )
            .with_vocabulary(load_vocabulary(VOCABULARY)),
        }
    }
}

impl ProviderAdapter for NearbySearch {
    fn descriptor(&self) -> &AdapterDescriptor {
        &self.descriptor
    }

    fn build_request(&self, query: &UnifiedQuery) -> Result<RequestTemplate, AdapterError> {
        let anchor = query.require_waypoint("anchor")?;
        query.rank_by()?;
        let mut template = RequestTemplate::get(format!("{SEARCH_BASE}/nearbySearch/.json"))
            .param("lat", anchor.location.latitude())
            .param("lon", anchor.location.longitude())
            .param("radius", query.u64_param("radius_meters")?.unwrap_or(1000))
            .param("limit", query.limit(20, 100)?)
            .param("language", LANGUAGE)
            .credential("key", KEY_ENV);
        if let Some(kind) = query.str_param("place_type")? {
            let code = self.descriptor.resolve_category(kind)?.code.clone();
            template = template.param("categorySet", code);
        }
        Ok(template)
    }

    fn parse_response(&self, query: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        let anchor = query.require_waypoint("anchor")?;
        let mut places = Vec::new();
        let mut provided = Vec::new();
        for node in results(raw)? {
            places.push(parse_place(&node)?);
            provided.push(node.opt("dist").map(|d| d.f64()).transpose()?);
        }
        let (places, distances) = rank_by_distance(anchor.location, places, provided, query.rank_by()?);
        Ok(NormalizedResponse {
            kind: ToolKind::NearbySearch,
            places,
            routes: Vec::new(),
            distances,
        })
    }

    fn is_traffic_unaware(&self, _: &RequestTemplate) -> bool {
        true
    }
}

pub struct ComputeRoutes {
    descriptor: AdapterDescriptor,
}

impl ComputeRoutes {
    fn new() -> Self {
        ComputeRoutes {
            descriptor: AdapterDescriptor::new(
                ProviderId::TomTom,
                ToolKind::ComputeRoutes,
                "tomtom",
                &[
                    "origin",
                    "destination",
                    "intermediates",
                    "travel_mode",
                    "traffic_awareness",
                    "compute_alternatives",
                ],
            )
            .with_precision(5),
        }
    }
}

fn travel_mode_code(mode: TravelMode) -> Result<&'static str, AdapterError> {
    match mode {
        TravelMode::Drive => Ok("car"),
        TravelMode::Walk => Ok("pedestrian"),
        TravelMode::Bicycle => Ok("bicycle"),
        TravelMode::TwoWheeler => Ok("motorcycle"),
        TravelMode::Transit => Err(AdapterError::unsupported("travel_mode", "TRANSIT is excluded")),
    }
}

fn parse_route(node: &Node<'_>, query: &UnifiedQuery) -> Result<RouteResult, AdapterError> {
    let summary = node.field("summary")?;
    let distance = summary.field("lengthInMeters")?.u64()?;
    let duration = summary.field("travelTimeInSeconds")?.u64()?;
    let mut points = Vec::new();
    for leg in node.field("legs")?.items()? {
        for point in leg.field("points")?.items()? {
            points.push(point.latlng("latitude", "longitude")?);
        }
    }
    let instructions = match node.opt("guidance") {
        Some(guidance) => guidance.opt_items("instructions")?,
        None => Vec::new(),
    };
    let mut offsets = Vec::with_capacity(instructions.len());
    for instruction in &instructions {
        offsets.push((
            instruction.field("message")?.str()?.to_string(),
            instruction.field("routeOffsetInMeters")?.u64()?,
        ));
    }
    let steps = offsets
        .iter()
        .enumerate()
        .map(|(i, (message, offset))| {
            let next = offsets.get(i + 1).map_or(distance, |(_, o)| *o);
            RouteStep {
                instruction: message.clone(),
                distance_meters: next.saturating_sub(*offset),
            }
        })
        .collect();
    let (origin, destination, intermediates) = convert_waypoints(query)?;
    Ok(RouteResult {
        origin,
        destination,
        intermediates,
        travel_mode: query.travel_mode()?,
        distance_meters: distance,
        duration_seconds: duration,
        description: None,
        steps,
        encoded_polyline: encode_polyline(&points, 5).map_err(|e| malformed(node.path(), e.to_string()))?,
        polyline_precision: 5,
        provider: ProviderId::TomTom,
    })
}

impl ProviderAdapter for ComputeRoutes {
    fn descriptor(&self) -> &AdapterDescriptor {
        &self.descriptor
    }

    fn build_request(&self, query: &UnifiedQuery) -> Result<RequestTemplate, AdapterError> {
        let (origin, destination, intermediates) = convert_waypoints(query)?;
        let alternatives = query.bool_param("compute_alternatives")?.unwrap_or(false);
        if alternatives && !intermediates.is_empty() {
            return Err(AdapterError::unsupported(
                "compute_alternatives",
                "alternatives cannot be combined with intermediate stops",
            ));
        }
        let path = std::iter::once(&origin)
            .chain(intermediates.iter())
            .chain(std::iter::once(&destination))
            .map(|w| format!("{},{}", w.location.latitude(), w.location.longitude()))
            .collect::<Vec<_>>()
            .join(":");
        Ok(RequestTemplate::get(format!("{ROUTING_BASE}/{path}/json"))
            .credential("key", KEY_ENV)
            .param("travelMode", travel_mode_code(query.travel_mode()?)?)
            .param("traffic", "false")
            .param("maxAlternatives", if alternatives { 1 } else { 0 })
            .param("instructionsType", "text")
            .param("language", LANGUAGE)
            .param("routeRepresentation", "polyline"))
    }

    fn parse_response(&self, query: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        let routes = Node::root(raw)
            .field("routes")?
            .items()?
            .iter()
            .map(|node| parse_route(node, query))
            .collect::<Result<_, _>>()?;
        Ok(NormalizedResponse::routes(routes))
    }

    fn is_traffic_unaware(&self, template: &RequestTemplate) -> bool {
        template.query_params.get("traffic").map(String::as_str) == Some("false")
    }
}

pub struct SearchAlongRoute {
    descriptor: AdapterDescriptor,
}

impl SearchAlongRoute {
    fn new() -> Self {
        SearchAlongRoute {
            descriptor: AdapterDescriptor::new(
                ProviderId::TomTom,
                ToolKind::SearchAlongRoute,
                "tomtom",
                &["query", "route", "travel_mode", "traffic_awareness", "limit"],
            )
            .with_precision(5),
        }
    }
}

impl ProviderAdapter for SearchAlongRoute {
    fn descriptor(&self) -> &AdapterDescriptor {
        &self.descriptor
    }

    fn build_request(&self, query: &UnifiedQuery) -> Result<RequestTemplate, AdapterError> {
        let text = query.require_str("query")?;
        let route = query
            .route()?
            .decode()
            .map_err(|e| AdapterError::invalid("route", e.to_string()))?;
        if route.len() < 2 {
            return Err(AdapterError::invalid("route", "needs at least two points"));
        }
        travel_mode_code(query.travel_mode()?)?;
        let points: Vec<Value> = route
            .iter()
            .map(|p| json!({"lat": p.latitude(), "lon": p.longitude()}))
            .collect();
        Ok(RequestTemplate::post(search_url("searchAlongRoute", text), json!({"route": {"points": points}}))
            .credential("key", KEY_ENV)
            .param("maxDetourTime", 600)
            .param("limit", query.limit(20, 20)?)
            .param("language", LANGUAGE))
    }

    fn parse_response(&self, query: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        let places = results(raw)?.iter().map(parse_place).collect::<Result<Vec<_>, _>>()?;
        let route = query
            .route()?
            .decode()
            .map_err(|e| AdapterError::invalid("route", e.to_string()))?;
        Ok(NormalizedResponse::places(
            ToolKind::SearchAlongRoute,
            order_along_route(&route, places),
        ))
    }

    /// Along-route search takes no traffic input; detours are evaluated on the
    /// supplied (traffic-unaware) geometry.
    fn is_traffic_unaware(&self, template: &RequestTemplate) -> bool {
        !template.query_params.contains_key("traffic")
    }
}
