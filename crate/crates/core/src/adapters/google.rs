use serde_json::{json, Value};

use super::json::Node;
use super::{
    convert_waypoints, filter_places, load_vocabulary, malformed, order_along_route,
    rank_by_distance, AdapterDescriptor, AdapterError, NormalizedResponse, ProviderAdapter,
    RankBy, RequestTemplate, UnifiedQuery, TRAFFIC_UNAWARE,
};
use crate::model::{Accessibility, Place, ProviderId, RouteResult, RouteStep, ToolKind, Waypoint};

const PLACES_BASE: &str = "https://places.googleapis.com/v1";
const ROUTES_URL: &str = "https://routes.googleapis.com/directions/v2:computeRoutes";
const KEY_ENV: &str = "GOOGLE_MAPS_API_KEY";
const LANGUAGE: &str = "en";
const VOCABULARY: &str = include_str!("../../data/categories/google.json");

const SUMMARY_FIELDS: &[&str] = &["id", "displayName", "shortFormattedAddress", "location"];
const RATED_FIELDS: &[&str] = &["id", "displayName", "shortFormattedAddress", "location", "rating", "priceLevel"];
const DETAIL_FIELDS: &[&str] = &[
    "id",
    "displayName",
    "shortFormattedAddress",
    "location",
    "rating",
    "priceLevel",
    "regularOpeningHours",
    "reviews",
    "accessibilityOptions",
];

pub fn google_adapters() -> Vec<Box<dyn ProviderAdapter>> {
    vec![
        Box::new(TextSearch::new()),
        Box::new(PlaceDetails::new()),
        Box::new(NearbySearch::new()),
        Box::new(ComputeRoutes::new()),
        Box::new(SearchAlongRoute::new()),
    ]
}

fn field_mask(prefix: &str, fields: &[&str]) -> String {
    fields
        .iter()
        .map(|f| format!("{prefix}{f}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn price_tier(node: &Node<'_>) -> Result<Option<u8>, AdapterError> {
    Ok(match node.str()? {
        "PRICE_LEVEL_FREE" => Some(0),
        "PRICE_LEVEL_INEXPENSIVE" => Some(1),
        "PRICE_LEVEL_MODERATE" => Some(2),
        "PRICE_LEVEL_EXPENSIVE" => Some(3),
        "PRICE_LEVEL_VERY_EXPENSIVE" => Some(4),
        "PRICE_LEVEL_UNSPECIFIED" => None,
        _ => return Err(malformed(node.path(), "unknown price level")),
    })
}

fn tier_name(tier: u8) -> &'static str {
    match tier {
        0 => "PRICE_LEVEL_FREE",
        1 => "PRICE_LEVEL_INEXPENSIVE",
        2 => "PRICE_LEVEL_MODERATE",
        3 => "PRICE_LEVEL_EXPENSIVE",
        _ => "PRICE_LEVEL_VERY_EXPENSIVE",
    }
}

/// Maps a Places API (New) place object. Only fields present are populated.
fn parse_place(node: &Node<'_>) -> Result<Place, AdapterError> {
    let id = node.field("id")?.non_empty_str()?;
    let name = node.field("displayName")?.field("text")?.non_empty_str()?;
    let address = match node.opt("shortFormattedAddress") {
        Some(a) => a.str()?,
        None => node.field("formattedAddress")?.str()?,
    };
    let location = node.field("location")?.latlng("latitude", "longitude")?;
    let mut place = Place::new(ProviderId::Google, id, name, address, location);
    place.rating = node.opt("rating").map(|r| r.f64()).transpose()?;
    place.price_level = match node.opt("priceLevel") {
        Some(p) => price_tier(&p)?,
        None => None,
    };
    if let Some(hours) = node.opt("regularOpeningHours") {
        let lines = hours
            .opt_items("weekdayDescriptions")?
            .iter()
            .map(|l| l.str().map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        place.opening_hours = Some(lines);
    }
    if let Some(reviews) = node.opt("reviews") {
        let texts = reviews
            .items()?
            .iter()
            .map(|r| Ok(r.field("text")?.field("text")?.str()?.to_string()))
            .collect::<Result<Vec<_>, AdapterError>>()?;
        place.reviews = Some(texts);
    }
    if let Some(options) = node.opt("accessibilityOptions") {
        let flag = |key: &str| options.opt(key).map(|v| v.bool()).transpose();
        place.accessibility = Some(Accessibility {
            wheelchair_accessible_entrance: flag("wheelchairAccessibleEntrance")?,
            wheelchair_accessible_parking: flag("wheelchairAccessibleParking")?,
            wheelchair_accessible_restroom: flag("wheelchairAccessibleRestroom")?,
        });
    }
    Ok(place)
}

/// `places` is omitted entirely by the API when nothing matched.
fn parse_places(raw: &Value) -> Result<Vec<Place>, AdapterError> {
    Node::root(raw)
        .opt_items("places")?
        .iter()
        .map(parse_place)
        .collect()
}

fn text_body(query: &UnifiedQuery, text: &str, limit: u64) -> Result<Value, AdapterError> {
    let mut body = json!({"textQuery": text, "pageSize": limit, "languageCode": LANGUAGE});
    if let Some(min) = query.f64_param("min_rating")? {
        if !(0.0..=5.0).contains(&min) {
            return Err(AdapterError::invalid("min_rating", "must be within [0, 5]"));
        }
        body["minRating"] = json!(min);
    }
    if let Some(tiers) = query.price_levels()? {
        body["priceLevels"] = json!(tiers.iter().map(|t| tier_name(*t)).collect::<Vec<_>>());
    }
    Ok(body)
}

pub struct TextSearch {
    descriptor: AdapterDescriptor,
}

impl TextSearch {
    fn new() -> Self {
        TextSearch {
            descriptor: AdapterDescriptor::new(
                ProviderId::Google,
                ToolKind::TextSearch,
                "googleMaps",
                &["query", "limit", "min_rating", "price_levels"],
            ),
        }
    }
}

impl ProviderAdapter for TextSearch {
    fn descriptor(&self) -> &AdapterDescriptor {
        &self.descriptor
    }

    fn build_request(&self, query: &UnifiedQuery) -> Result<RequestTemplate, AdapterError> {
        let text = query.require_str("query")?;
        let body = text_body(query, text, query.limit(5, 20)?)?;
        Ok(RequestTemplate::post(format!("{PLACES_BASE}/places:searchText"), body)
            .credential("key", KEY_ENV)
            .param("fields", field_mask("places.", SUMMARY_FIELDS)))
    }

    fn parse_response(&self, _: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        Ok(NormalizedResponse::places(ToolKind::TextSearch, parse_places(raw)?))
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
            descriptor: AdapterDescriptor::new(ProviderId::Google, ToolKind::PlaceDetails, "googleMaps", &["place_id"]),
        }
    }
}

impl ProviderAdapter for PlaceDetails {
    fn descriptor(&self) -> &AdapterDescriptor {
        &self.descriptor
    }

    fn build_request(&self, query: &UnifiedQuery) -> Result<RequestTemplate, AdapterError> {
        let id = query.require_str("place_id")?;
        Ok(
            RequestTemplate::get(format!("{PLACES_BASE}/places/{}", super::encode_path_segment(id)))
                .credential("key", KEY_ENV)
                .param("fields", field_mask("", DETAIL_FIELDS))
                .param("languageCode", LANGUAGE),
        )
    }

    fn parse_response(&self, _: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        let place = parse_place(&Node::root(raw))?;
        Ok(NormalizedResponse::places(ToolKind::PlaceDetails, vec![place]))
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
                ProviderId::Google,
                ToolKind::NearbySearch,
                "googleMaps",
                &["anchor", "place_type", "radius_meters", "rank_by", "limit", "min_rating", "price_levels"],
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
        let rank = match query.rank_by()? {
            RankBy::Distance => "DISTANCE",
            RankBy::Relevance => "POPULARITY",
        };
        // Validated here, applied to the response (the endpoint has no such filters).
        query.f64_param("min_rating")?;
        query.price_levels()?;
        let mut body = json!({
            "maxResultCount": query.limit(20, 20)?,
            "locationRestriction": {"circle": {
                "center": {"latitude": anchor.location.latitude(), "longitude": anchor.location.longitude()},
                "radius": query.f64_param("radius_meters")?.unwrap_or(1000.0),
            }},
            "rankPreference": rank,
            "languageCode": LANGUAGE,
        });
        if let Some(kind) = query.str_param("place_type")? {
            body["includedTypes"] = json!([self.descriptor.resolve_category(kind)?.code]);
        }
        Ok(RequestTemplate::post(format!("{PLACES_BASE}/places:searchNearby"), body)
            .credential("key", KEY_ENV)
            .param("fields", field_mask("places.", RATED_FIELDS)))
    }

    fn parse_response(&self, query: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        let anchor = query.require_waypoint("anchor")?;
        let places = filter_places(query, parse_places(raw)?)?;
        let unknown = vec![None; places.len()];
        let (places, distances) = rank_by_distance(anchor.location, places, unknown, query.rank_by()?);
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

fn waypoint_json(w: &Waypoint) -> Value {
    json!({"location": {"latLng": {"latitude": w.location.latitude(), "longitude": w.location.longitude()}}})
}

/// Durations are protobuf strings such as "1234s".
fn parse_duration(node: &Node<'_>) -> Result<u64, AdapterError> {
    let text = node.str()?;
    text.strip_suffix('s')
        .and_then(|n| n.parse::<f64>().ok())
        .filter(|n| *n >= 0.0)
        .map(|n| n.round() as u64)
        .ok_or_else(|| malformed(node.path(), "expected a duration like \"123s\""))
}

pub struct ComputeRoutes {
    descriptor: AdapterDescriptor,
}

impl ComputeRoutes {
    fn new() -> Self {
        ComputeRoutes {
            descriptor: AdapterDescriptor::new(
                ProviderId::Google,
                ToolKind::ComputeRoutes,
                "googleMaps",
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

const ROUTE_FIELDS: &[&str] = &[
    "routes.distanceMeters",
    "routes.duration",
    "routes.description",
    "routes.polyline.encodedPolyline",
    "routes.legs.steps.distanceMeters",
    "routes.legs.steps.navigationInstruction.instructions",
];

fn parse_route(node: &Node<'_>, query: &UnifiedQuery) -> Result<RouteResult, AdapterError> {
    let mut steps = Vec::new();
    for leg in node.opt_items("legs")? {
        for step in leg.opt_items("steps")? {
            let instruction = match step.opt("navigationInstruction").and_then(|n| n.opt("instructions")) {
                Some(i) => i.str()?.to_string(),
                None => String::new(),
            };
            let distance = step.opt("distanceMeters").map(|d| d.u64()).transpose()?.unwrap_or(0);
            steps.push(RouteStep {
                instruction,
                distance_meters: distance,
            });
        }
    }
    let (origin, destination, intermediates) = convert_waypoints(query)?;
    Ok(RouteResult {
        origin,
        destination,
        intermediates,
        travel_mode: query.travel_mode()?,
        distance_meters: node.field("distanceMeters")?.u64()?,
        duration_seconds: parse_duration(&node.field("duration")?)?,
        description: node.opt("description").map(|d| d.str().map(str::to_string)).transpose()?,
        steps,
        encoded_polyline: node.field("polyline")?.field("encodedPolyline")?.str()?.to_string(),
        polyline_precision: 5,
        provider: ProviderId::Google,
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
        let body = json!({
            "origin": waypoint_json(&origin),
            "destination": waypoint_json(&destination),
            "intermediates": intermediates.iter().map(waypoint_json).collect::<Vec<_>>(),
            "travelMode": query.travel_mode()?.as_str(),
            "routingPreference": TRAFFIC_UNAWARE,
            "computeAlternativeRoutes": alternatives,
            "languageCode": "en-US",
            "units": "METRIC",
        });
        Ok(RequestTemplate::post(ROUTES_URL, body)
            .credential("key", KEY_ENV)
            .param("fields", ROUTE_FIELDS.join(",")))
    }

    fn parse_response(&self, query: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        let routes = Node::root(raw)
            .opt_items("routes")?
            .iter()
            .map(|n| parse_route(n, query))
            .collect::<Result<_, _>>()?;
        Ok(NormalizedResponse::routes(routes))
    }

    fn is_traffic_unaware(&self, template: &RequestTemplate) -> bool {
        template
            .body
            .as_ref()
            .and_then(|b| b.get("routingPreference"))
            .and_then(Value::as_str)
            == Some(TRAFFIC_UNAWARE)
    }
}

pub struct SearchAlongRoute {
    descriptor: AdapterDescriptor,
}

impl SearchAlongRoute {
    fn new() -> Self {
        SearchAlongRoute {
            descriptor: AdapterDescriptor::new(
                ProviderId::Google,
                ToolKind::SearchAlongRoute,
                "googleMaps",
                &["query", "route", "travel_mode", "traffic_awareness", "limit", "min_rating", "price_levels"],
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
        let route = query.route()?;
        if route.precision != 5 {
            return Err(AdapterError::invalid("route", "Google expects precision-5 polylines"));
        }
        route
            .decode()
            .map_err(|e| AdapterError::invalid("route", e.to_string()))?;
        let mut body = text_body(query, text, query.limit(20, 20)?)?;
        body["searchAlongRouteParameters"] = json!({"polyline": {"encodedPolyline": route.text}});
        body["routingParameters"] = json!({
            "travelMode": query.travel_mode()?.as_str(),
            "routingPreference": TRAFFIC_UNAWARE,
        });
        Ok(RequestTemplate::post(format!("{PLACES_BASE}/places:searchText"), body)
            .credential("key", KEY_ENV)
            .param("fields", field_mask("places.", RATED_FIELDS)))
    }

    fn parse_response(&self, query: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        let route = query
            .route()?
            .decode()
            .map_err(|e| AdapterError::invalid("route", e.to_string()))?;
        let places = parse_places(raw)?;
        Ok(NormalizedResponse::places(
            ToolKind::SearchAlongRoute,
            order_along_route(&route, places),
        ))
    }

    fn is_traffic_unaware(&self, template: &RequestTemplate) -> bool {
        template
            .body
            .as_ref()
            .and_then(|b| b.pointer("/routingParameters/routingPreference"))
            .and_then(Value::as_str)
            == Some(TRAFFIC_UNAWARE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{convert_request, convert_response};
    use crate::model::LatLng;

    #[test]
    fn details_mapping_covers_optional_fields() {
        let raw = br#"{"id":"ChIJ1","displayName":{"text":"Louvre Museum","languageCode":"en"},
            "shortFormattedAddress":"Rue de Rivoli, Paris","location":{"latitude":48.8606,"longitude":2.3376},
            "rating":4.7,"priceLevel":"PRICE_LEVEL_MODERATE",
            "regularOpeningHours":{"weekdayDescriptions":["Monday: 9:00 AM - 6:00 PM"]},
            "reviews":[{"text":{"text":"Vast."}}],
            "accessibilityOptions":{"wheelchairAccessibleEntrance":true}}"#;
        let q = UnifiedQuery::new(ToolKind::PlaceDetails).with("place_id", "ChIJ1");
        let n = convert_response(&PlaceDetails::new(), &q, raw).unwrap();
        let p = &n.places[0];
        assert_eq!(p.rating, Some(4.7));
        assert_eq!(p.price_level, Some(2));
        assert_eq!(p.opening_hours.as_deref(), Some(&["Monday: 9:00 AM - 6:00 PM".to_string()][..]));
        assert_eq!(p.reviews.as_ref().unwrap()[0], "Vast.");
        assert_eq!(p.accessibility.as_ref().unwrap().wheelchair_accessible_entrance, Some(true));
    }

    #[test]
    fn empty_text_search_has_no_places_key() {
        let q = UnifiedQuery::new(ToolKind::TextSearch).with("query", "zzz");
        let n = convert_response(&TextSearch::new(), &q, b"{}").unwrap();
        assert!(n.places.is_empty());
    }

    #[test]
    fn route_template_is_traffic_unaware() {
        let q = UnifiedQuery::new(ToolKind::ComputeRoutes)
            .with("origin", Waypoint::at(LatLng::new(48.8584, 2.2945).unwrap()))
            .with("destination", Waypoint::at(LatLng::new(48.8606, 2.3376).unwrap()))
            .with("compute_alternatives", true);
        let adapter = ComputeRoutes::new();
        let t = convert_request(&adapter, &q).unwrap();
        assert!(adapter.is_traffic_unaware(&t));
        assert_eq!(t.body.as_ref().unwrap()["travelMode"], "DRIVE");

        let with_stop = q.with(
            "intermediates",
            vec![Waypoint::at(LatLng::new(48.86, 2.31).unwrap())],
        );
        assert!(matches!(
            convert_request(&adapter, &with_stop),
            Err(AdapterError::UnsupportedParameter { key, .. }) if key == "compute_alternatives"
        ));
    }

    #[test]
    fn durations_parse() {
        let v = json!("1234s");
        assert_eq!(parse_duration(&Node::root(&v)).unwrap(), 1234);
        let v = json!("12m");
        assert!(parse_duration(&Node::root(&v)).is_err());
    }

    #[test]
    fn nearby_filters_client_side() {
        let anchor = Waypoint::at(LatLng::new(48.8606, 2.3376).unwrap());
        let q = UnifiedQuery::new(ToolKind::NearbySearch)
            .with("anchor", &anchor)
            .with("place_type", "restaurant")
            .with("min_rating", 4.0);
        let raw = br#"{"places":[
            {"id":"a","displayName":{"text":"A"},"shortFormattedAddress":"x","location":{"latitude":48.861,"longitude":2.338},"rating":3.9},
            {"id":"b","displayName":{"text":"B"},"shortFormattedAddress":"x","location":{"latitude":48.862,"longitude":2.338},"rating":4.5},
            {"id":"c","displayName":{"text":"C"},"shortFormattedAddress":"x","location":{"latitude":48.8607,"longitude":2.3377},"rating":4.1}]}"#;
        let n = convert_response(&NearbySearch::new(), &q, raw).unwrap();
        let ids: Vec<_> = n.places.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, vec!["c", "b"]);
        assert!(n.distances.iter().all(|d| d.source == crate::adapters::DistanceSource::Computed));
    }
}
