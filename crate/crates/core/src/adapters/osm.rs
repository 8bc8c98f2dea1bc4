//! OpenStreetMap: Nominatim for search and details, GraphHopper for routing.

use serde_json::{json, Value};

use super::json::Node;
use super::{
    convert_waypoints, malformed, AdapterDescriptor, AdapterError, NormalizedResponse,
    ProviderAdapter, RequestTemplate, UnifiedQuery,
};
use crate::model::{Accessibility, Place, ProviderId, RouteResult, RouteStep, ToolKind, TravelMode};

const NOMINATIM: &str = "https://nominatim.openstreetmap.org";
const GRAPHHOPPER: &str = "https://graphhopper.com/api/1/route";
const GRAPHHOPPER_KEY_ENV: &str = "GRAPHHOPPER_API_KEY";

pub fn openstreetmap_adapters() -> Vec<Box<dyn ProviderAdapter>> {
    vec![
        Box::new(TextSearch::new()),
        Box::new(PlaceDetails::new()),
        Box::new(ComputeRoutes::new()),
    ]
}

fn osm_type_letter(node: &Node<'_>) -> Result<char, AdapterError> {
    match node.str()?.to_ascii_lowercase().as_str() {
        "node" | "n" => Ok('N'),
        "way" | "w" => Ok('W'),
        "relation" | "r" => Ok('R'),
        _ => Err(malformed(node.path(), "unknown osm_type")),
    }
}

/// Place ids are `<N|W|R><osm_id>`, e.g. `W21717727`.
fn place_id(node: &Node<'_>) -> Result<String, AdapterError> {
    let letter = osm_type_letter(&node.field("osm_type")?)?;
    Ok(format!("{letter}{}", node.field("osm_id")?.id_string()?))
}

fn split_place_id(id: &str) -> Result<(char, &str), AdapterError> {
    let mut chars = id.chars();
    match chars.next() {
        Some(c @ ('N' | 'W' | 'R')) if !chars.as_str().is_empty() && chars.as_str().bytes().all(|b| b.is_ascii_digit()) => {
            Ok((c, chars.as_str()))
        }
        _ => Err(AdapterError::invalid("place_id", "expected N|W|R followed by the OSM id")),
    }
}

pub struct TextSearch {
    descriptor: AdapterDescriptor,
}

impl TextSearch {
    fn new() -> Self {
        TextSearch {
            descriptor: AdapterDescriptor::new(
                ProviderId::OpenStreetMap,
                ToolKind::TextSearch,
                "openStreetMap",
                &["query", "limit"],
            ),
        }
    }
}

impl ProviderAdapter for TextSearch {
    fn descriptor(&self) -> &AdapterDescriptor {
        &self.descriptor
    }

    fn build_request(&self, query: &UnifiedQuery) -> Result<RequestTemplate, AdapterError> {
        Ok(RequestTemplate::get(format!("{NOMINATIM}/search"))
            .param("q", query.require_str("query")?)
            .param("format", "jsonv2")
            .param("limit", query.limit(5, 40)?)
            .param("accept-language", "en"))
    }

    fn parse_response(&self, _: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        let mut places = Vec::new();
        for node in Node::root(raw).items()? {
            let full = node.field("display_name")?.non_empty_str()?;
            let (head, rest) = match full.split_once(", ") {
                Some((head, rest)) => (head, rest),
                None => (full, ""),
            };
            let name = match node.opt("name") {
                Some(n) if !n.str()?.trim().is_empty() => n.str()?,
                _ => head,
            };
            let address = if name == head { rest } else { full };
            places.push(Place::new(
                ProviderId::OpenStreetMap,
                place_id(&node)?,
                name,
                address,
                node.latlng("lat", "lon")?,
            ));
        }
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
            descriptor: AdapterDescriptor::new(
                ProviderId::OpenStreetMap,
                ToolKind::PlaceDetails,
                "openStreetMap",
                &["place_id"],
            ),
        }
    }
}

impl ProviderAdapter for PlaceDetails {
    fn descriptor(&self) -> &AdapterDescriptor {
        &self.descriptor
    }

    fn build_request(&self, query: &UnifiedQuery) -> Result<RequestTemplate, AdapterError> {
        let (kind, id) = split_place_id(query.require_str("place_id")?)?;
        Ok(RequestTemplate::get(format!("{NOMINATIM}/details"))
            .param("osmtype", kind)
            .param("osmid", id)
            .param("format", "json")
            .param("addressdetails", 1)
            .param("extratags", 1)
            .param("accept-language", "en"))
    }

    fn parse_response(&self, _: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        let root = Node::root(raw);
        let name = root.field("localname")?.non_empty_str()?;
        let coordinates = root.field("centroid")?.field("coordinates")?.items()?;
        if coordinates.len() != 2 {
            return Err(malformed("centroid.coordinates", "expected [lon, lat]"));
        }
        let location = crate::model::LatLng::new(coordinates[1].f64()?, coordinates[0].f64()?)
            .map_err(|e| malformed("centroid.coordinates", e.to_string()))?;
        let mut parts = Vec::new();
        for line in root.opt_items("address")? {
            let is_address = line.opt("isaddress").map(|b| b.bool()).transpose()?.unwrap_or(true);
            let text = line.field("localname")?.str()?;
            if is_address && text != name && !parts.contains(&text) {
                parts.push(text);
            }
        }
        let mut place = Place::new(ProviderId::OpenStreetMap, place_id(&root)?, name, parts.join(", "), location);
        if let Some(tags) = root.opt("extratags") {
            if let Some(hours) = tags.opt("opening_hours") {
                place.opening_hours = Some(vec![hours.str()?.to_string()]);
            }
            if let Some(wheelchair) = tags.opt("wheelchair") {
                let flag = match wheelchair.str()? {
                    "yes" | "designated" => Some(true),
                    "no" => Some(false),
                    _ => None,
                };
                if flag.is_some() {
                    place.accessibility = Some(Accessibility {
                        wheelchair_accessible_entrance: flag,
                        ..Accessibility::default()
                    });
                }
            }
        }
        Ok(NormalizedResponse::places(ToolKind::PlaceDetails, vec![place]))
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
                ProviderId::OpenStreetMap,
                ToolKind::ComputeRoutes,
                "openStreetMap",
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

fn profile(mode: TravelMode) -> Result<&'static str, AdapterError> {
    match mode {
        TravelMode::Drive => Ok("car"),
        TravelMode::Walk => Ok("foot"),
        TravelMode::Bicycle => Ok("bike"),
        TravelMode::TwoWheeler => Err(AdapterError::unsupported(
            "travel_mode",
            "GraphHopper has no two-wheeler profile",
        )),
        TravelMode::Transit => Err(AdapterError::unsupported("travel_mode", "TRANSIT is excluded")),
    }
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
        let points: Vec<Value> = std::iter::once(&origin)
            .chain(intermediates.iter())
            .chain(std::iter::once(&destination))
            .map(|w| json!([w.location.longitude(), w.location.latitude()]))
            .collect();
        let mut body = json!({
            "points": points,
            "profile": profile(query.travel_mode()?)?,
            "locale": "en",
            "instructions": true,
            "calc_points": true,
            "points_encoded": true,
        });
        if alternatives {
            body["algorithm"] = json!("alternative_route");
            body["alternative_route.max_paths"] = json!(2);
        }
        Ok(RequestTemplate::post(GRAPHHOPPER, body).credential("key", GRAPHHOPPER_KEY_ENV))
    }

    fn parse_response(&self, query: &UnifiedQuery, raw: &Value) -> Result<NormalizedResponse, AdapterError> {
        let (origin, destination, intermediates) = convert_waypoints(query)?;
        let mut routes = Vec::new();
        for path in Node::root(raw).field("paths")?.items()? {
            if let Some(encoded) = path.opt("points_encoded") {
                if !encoded.bool()? {
                    return Err(malformed(encoded.path(), "expected encoded points"));
                }
            }
            let steps = path
                .opt_items("instructions")?
                .iter()
                .map(|i| {
                    Ok(RouteStep {
                        instruction: i.field("text")?.str()?.to_string(),
                        distance_meters: i.field("distance")?.u64()?,
                    })
                })
                .collect::<Result<Vec<_>, AdapterError>>()?;
            routes.push(RouteResult {
                origin: origin.clone(),
                destination: destination.clone(),
                intermediates: intermediates.clone(),
                travel_mode: query.travel_mode()?,
                distance_meters: path.field("distance")?.u64()?,
                // GraphHopper reports milliseconds.
                duration_seconds: (path.field("time")?.f64()? / 1000.0).round() as u64,
                description: path.opt("description").map(|d| d.str().map(str::to_string)).transpose()?,
                steps,
                encoded_polyline: path.field("points")?.str()?.to_string(),
                polyline_precision: 5,
                provider: ProviderId::OpenStreetMap,
            });
        }
        Ok(NormalizedResponse::routes(routes))
    }

    /// GraphHopper's public routing has no live-traffic input.
    fn is_traffic_unaware(&self, template: &RequestTemplate) -> bool {
        template.body.as_ref().is_some_and(|b| b.get("traffic").is_none())
    }
}
