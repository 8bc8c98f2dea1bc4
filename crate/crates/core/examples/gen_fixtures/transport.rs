//! Answers resolved provider requests from the synthetic world, in each
//! provider's own response shape.

use std::time::Duration;

use chrono::{Duration as Days, NaiveDate};
use geoqa_core::adapters::HttpMethod;
use geoqa_core::gateway::{HttpReply, ResolvedRequest, Transport, TransportError};
use geoqa_core::polyline::{decode_polyline, encode_polyline};
use geoqa_core::LatLng;
use percent_encoding::percent_decode_str;
use serde_json::{json, Map, Value};

use crate::world::{fold, synth_route, Mode, Poi, SynthRoute, World, WEEKDAYS};

/// First day of TomTom's "next seven days" opening hours (a Wednesday).
const HOURS_START: (i32, u32, u32) = (2025, 1, 15);

pub struct WorldTransport {
    pub world: World,
}

fn bad(detail: impl Into<String>) -> TransportError {
    TransportError(detail.into())
}

fn reply(value: Value) -> Result<HttpReply, TransportError> {
    Ok(HttpReply {
        status: 200,
        body: serde_json::to_vec(&value).expect("json"),
    })
}

fn ll(lat: f64, lon: f64) -> Result<LatLng, TransportError> {
    LatLng::new(lat, lon).map_err(|e| bad(e.to_string()))
}

fn param<'a>(r: &'a ResolvedRequest, name: &str) -> Result<&'a str, TransportError> {
    r.query_params
        .get(name)
        .map(String::as_str)
        .ok_or_else(|| bad(format!("missing query parameter {name}")))
}

fn num(r: &ResolvedRequest, name: &str) -> Result<f64, TransportError> {
    param(r, name)?.parse().map_err(|_| bad(format!("{name} is not a number")))
}

fn body(r: &ResolvedRequest) -> Result<&Value, TransportError> {
    r.body.as_ref().ok_or_else(|| bad("missing body"))
}

fn clock(minutes: u16) -> (u16, u16) {
    (minutes.min(1439) / 60, if minutes >= 1440 { 59 } else { minutes % 60 })
}

fn twelve_hour(minutes: u16) -> String {
    let (h, m) = clock(minutes);
    let suffix = if h < 12 { "AM" } else { "PM" };
    let h12 = match h % 12 {
        0 => 12,
        x => x,
    };
    format!("{h12}:{m:02} {suffix}")
}

fn google_weekday_lines(p: &Poi) -> Vec<String> {
    WEEKDAYS
        .iter()
        .zip(&p.hours)
        .map(|(day, ranges)| {
            if ranges.is_empty() {
                format!("{day}: Closed")
            } else if ranges == &[(0, 1440)] {
                format!("{day}: Open 24 hours")
            } else {
                let text: Vec<String> = ranges
                    .iter()
                    .map(|(a, b)| format!("{} - {}", twelve_hour(*a), twelve_hour(*b)))
                    .collect();
                format!("{day}: {}", text.join(", "))
            }
        })
        .collect()
}

fn price_name(tier: u8) -> &'static str {
    match tier {
        0 => "PRICE_LEVEL_FREE",
        1 => "PRICE_LEVEL_INEXPENSIVE",
        2 => "PRICE_LEVEL_MODERATE",
        3 => "PRICE_LEVEL_EXPENSIVE",
        _ => "PRICE_LEVEL_VERY_EXPENSIVE",
    }
}

fn google_place(p: &Poi, fields: &[&str]) -> Value {
    let mut full = Map::new();
    full.insert("id".into(), json!(p.google_id));
    full.insert("displayName".into(), json!({"text": p.name, "languageCode": "en"}));
    full.insert("shortFormattedAddress".into(), json!(format!("{}, Paris", p.street)));
    full.insert("location".into(), json!({"latitude": p.lat, "longitude": p.lon}));
    if let Some(r) = p.rating {
        full.insert("rating".into(), json!(r));
    }
    if let Some(tier) = p.price {
        full.insert("priceLevel".into(), json!(price_name(tier)));
    }
    full.insert(
        "regularOpeningHours".into(),
        json!({"weekdayDescriptions": google_weekday_lines(p)}),
    );
    let reviews: Vec<Value> = p
        .reviews
        .iter()
        .enumerate()
        .map(|(i, text)| {
            json!({
                "name": format!("places/{}/reviews/{i}", p.google_id),
                "text": {"text": text, "languageCode": "en"},
                "authorAttribution": {"displayName": format!("Visitor {}", i + 1)},
            })
        })
        .collect();
    full.insert("reviews".into(), Value::Array(reviews));
    let mut access = Map::new();
    for (key, flag) in ["wheelchairAccessibleEntrance", "wheelchairAccessibleParking", "wheelchairAccessibleRestroom"]
        .iter()
        .zip(p.wheelchair)
    {
        if let Some(v) = flag {
            access.insert(key.to_string(), json!(v));
        }
    }
    if !access.is_empty() {
        full.insert("accessibilityOptions".into(), Value::Object(access));
    }
    let kept: Map<String, Value> = full.into_iter().filter(|(k, _)| fields.contains(&k.as_str())).collect();
    Value::Object(kept)
}

fn field_mask<'a>(r: &'a ResolvedRequest, prefix: &str) -> Result<Vec<&'a str>, TransportError> {
    Ok(param(r, "fields")?
        .split(',')
        .map(|f| f.strip_prefix(prefix).unwrap_or(f))
        .collect())
}

fn google_places(places: &[&Poi], fields: &[&str]) -> Value {
    if places.is_empty() {
        return json!({});
    }
    json!({"places": places.iter().map(|p| google_place(p, fields)).collect::<Vec<_>>()})
}

fn mode_from(code: &str) -> Result<Mode, TransportError> {
    Ok(match code {
        "DRIVE" | "car" => Mode::Drive,
        "WALK" | "pedestrian" | "foot" => Mode::Walk,
        "BICYCLE" | "bicycle" | "bike" => Mode::Bicycle,
        "TWO_WHEELER" | "motorcycle" => Mode::Motorcycle,
        other => return Err(bad(format!("unknown travel mode {other}"))),
    })
}

fn routes_for(waypoints: &[LatLng], mode: Mode, alternatives: bool) -> Vec<SynthRoute> {
    let count = if alternatives { 2 } else { 1 };
    (0..count).map(|alt| synth_route(waypoints, mode, alt)).collect()
}

fn google_latlng(v: &Value) -> Result<LatLng, TransportError> {
    let l = v.pointer("/location/latLng").ok_or_else(|| bad("waypoint without latLng"))?;
    ll(
        l["latitude"].as_f64().ok_or_else(|| bad("latitude"))?,
        l["longitude"].as_f64().ok_or_else(|| bad("longitude"))?,
    )
}

fn encode(points: &[LatLng]) -> Result<String, TransportError> {
    encode_polyline(points, 5).map_err(|e| bad(e.to_string()))
}

impl WorldTransport {
    fn google(&self, r: &ResolvedRequest, path: &str) -> Result<HttpReply, TransportError> {
        if path == "/v1/places:searchText" {
            let b = body(r)?;
            let text = b["textQuery"].as_str().ok_or_else(|| bad("textQuery"))?;
            let limit = b["pageSize"].as_u64().unwrap_or(20) as usize;
            let fields = field_mask(r, "places.")?;
            let found = match b.pointer("/searchAlongRouteParameters/polyline/encodedPolyline") {
                Some(line) => {
                    let route = decode_polyline(line.as_str().unwrap_or_default(), 5).map_err(|e| bad(e.to_string()))?;
                    self.world.along_route(&route, text, 200.0, limit)
                }
                None => self.world.text_search(text, limit),
            };
            return reply(google_places(&found, &fields));
        }
        if path == "/v1/places:searchNearby" {
            let b = body(r)?;
            let center = b.pointer("/locationRestriction/circle/center").ok_or_else(|| bad("center"))?;
            let center = ll(center["latitude"].as_f64().unwrap(), center["longitude"].as_f64().unwrap())?;
            let radius = b.pointer("/locationRestriction/circle/radius").and_then(Value::as_f64).unwrap_or(1000.0);
            let category = b.pointer("/includedTypes/0").and_then(Value::as_str).unwrap_or("restaurant");
            let limit = b["maxResultCount"].as_u64().unwrap_or(20) as usize;
            let found: Vec<&Poi> = self.world.nearby(center, category, radius, limit).into_iter().map(|(p, _)| p).collect();
            return reply(google_places(&found, &field_mask(r, "places.")?));
        }
        if let Some(id) = path.strip_prefix("/v1/places/") {
            let poi = self.world.by_google_id(id).ok_or_else(|| bad(format!("no place {id}")))?;
            return reply(google_place(poi, &field_mask(r, "")?));
        }
        Err(bad(format!("unknown Google Places path {path}")))
    }

    fn google_routes(&self, r: &ResolvedRequest) -> Result<HttpReply, TransportError> {
        let b = body(r)?;
        let mut waypoints = vec![google_latlng(&b["origin"])?];
        for stop in b["intermediates"].as_array().into_iter().flatten() {
            waypoints.push(google_latlng(stop)?);
        }
        waypoints.push(google_latlng(&b["destination"])?);
        let mode = mode_from(b["travelMode"].as_str().unwrap_or("DRIVE"))?;
        let alternatives = b["computeAlternativeRoutes"].as_bool().unwrap_or(false);
        let routes: Vec<Value> = routes_for(&waypoints, mode, alternatives)
            .iter()
            .map(|route| {
                let mut steps = route.steps.iter();
                let legs: Vec<Value> = route
                    .legs
                    .iter()
                    .enumerate()
                    .map(|(i, _)| {
                        let per_leg = if i + 1 == route.legs.len() { 5 } else { 4 };
                        let leg_steps: Vec<Value> = steps
                            .by_ref()
                            .take(per_leg)
                            .map(|s| {
                                json!({
                                    "distanceMeters": s.distance.round() as u64,
                                    "navigationInstruction": {"instructions": s.instruction},
                                })
                            })
                            .collect();
                        json!({"steps": leg_steps})
                    })
                    .collect();
                Ok(json!({
                    "distanceMeters": route.distance.round() as u64,
                    "duration": format!("{}s", route.duration.round() as u64),
                    "description": route.description,
                    "polyline": {"encodedPolyline": encode(&route.points())?},
                    "legs": legs,
                }))
            })
            .collect::<Result<_, TransportError>>()?;
        reply(json!({"routes": routes}))
    }

    fn tomtom_result(&self, p: &Poi, details: bool, dist: Option<f64>) -> Value {
        let mut poi = json!({
            "name": p.name,
            "categories": [p.category.replace('_', " ")],
        });
        if details {
            let start = NaiveDate::from_ymd_opt(HOURS_START.0, HOURS_START.1, HOURS_START.2).unwrap();
            let mut ranges = Vec::new();
            for offset in 0..7 {
                let date = start + Days::days(offset);
                let weekday = (2 + offset as usize) % 7;
                for (a, b) in &p.hours[weekday] {
                    let (sh, sm) = clock(*a);
                    let (eh, em) = clock(*b);
                    let day = date.format("%Y-%m-%d").to_string();
                    ranges.push(json!({
                        "startTime": {"date": day, "hour": sh, "minute": sm},
                        "endTime": {"date": day, "hour": eh, "minute": em},
                    }));
                }
            }
            poi["openingHours"] = json!({"mode": "nextSevenDays", "timeRanges": ranges});
        }
        let mut out = json!({
            "type": "POI",
            "id": p.tomtom_id,
            "score": 1.0,
            "poi": poi,
            "address": {
                "streetName": p.street,
                "municipality": "Paris",
                "postalCode": p.postcode,
                "countryCode": "FR",
                "freeformAddress": format!("{}, {} Paris", p.street, p.postcode),
            },
            "position": {"lat": p.lat, "lon": p.lon},
        });
        if let Some(d) = dist {
            out["dist"] = json!(d);
        }
        out
    }

    fn tomtom_results(&self, results: Vec<Value>, query: Option<&str>) -> Result<HttpReply, TransportError> {
        let mut summary = json!({"queryType": "NON_NEAR", "numResults": results.len(), "offset": 0});
        if let Some(q) = query {
            summary["query"] = json!(fold(q));
        }
        reply(json!({"summary": summary, "results": results}))
    }

    fn tomtom(&self, r: &ResolvedRequest, path: &str) -> Result<HttpReply, TransportError> {
        if let Some(rest) = path.strip_prefix("/search/2/poiSearch/") {
            let text = decode_segment(rest)?;
            let limit = num(r, "limit")? as usize;
            let results = self.world.text_search(&text, limit).into_iter().map(|p| self.tomtom_result(p, false, None)).collect();
            return self.tomtom_results(results, Some(&text));
        }
        if path == "/search/2/place.json" {
            let id = param(r, "entityId")?;
            let poi = self.world.by_tomtom_id(id).ok_or_else(|| bad(format!("no entity {id}")))?;
            return self.tomtom_results(vec![self.tomtom_result(poi, true, None)], None);
        }
        if path == "/search/2/nearbySearch/.json" {
            let center = ll(num(r, "lat")?, num(r, "lon")?)?;
            let category = match param(r, "categorySet")? {
                "7315" => "restaurant",
                "9376002" => "cafe",
                "7317" => "museum",
                "7376" => "tourist_attraction",
                "9362" => "park",
                other => return Err(bad(format!("category {other} is not in the synthetic world"))),
            };
            let found = self.world.nearby(center, category, num(r, "radius")?, num(r, "limit")? as usize);
            let results = found.into_iter().map(|(p, d)| self.tomtom_result(p, false, Some(d))).collect();
            return self.tomtom_results(results, None);
        }
        if let Some(rest) = path.strip_prefix("/search/2/searchAlongRoute/") {
            let text = decode_segment(rest)?;
            let points = body(r)?
                .pointer("/route/points")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("route points"))?
                .iter()
                .map(|p| ll(p["lat"].as_f64().unwrap_or(f64::NAN), p["lon"].as_f64().unwrap_or(f64::NAN)))
                .collect::<Result<Vec<_>, _>>()?;
            let mut found = self.world.along_route(&points, &text, 200.0, num(r, "limit")? as usize);
            found.sort_by(|a, b| a.tomtom_id.cmp(&b.tomtom_id));
            let results = found.into_iter().map(|p| self.tomtom_result(p, false, None)).collect();
            return self.tomtom_results(results, Some(&text));
        }
        if let Some(rest) = path.strip_prefix("/routing/1/calculateRoute/") {
            let locations = rest.strip_suffix("/json").ok_or_else(|| bad("routing path"))?;
            let waypoints = locations
                .split(':')
                .map(|pair| {
                    let (lat, lon) = pair.split_once(',').ok_or_else(|| bad("lat,lon"))?;
                    ll(lat.parse().map_err(|_| bad("lat"))?, lon.parse().map_err(|_| bad("lon"))?)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mode = mode_from(param(r, "travelMode")?)?;
            let alternatives = param(r, "maxAlternatives")? != "0";
            let routes: Vec<Value> = routes_for(&waypoints, mode, alternatives)
                .iter()
                .map(|route| {
                    let legs: Vec<Value> = route
                        .legs
                        .iter()
                        .map(|leg| {
                            json!({"points": leg.iter().map(|p| json!({"latitude": p.latitude(), "longitude": p.longitude()})).collect::<Vec<_>>()})
                        })
                        .collect();
                    let instructions: Vec<Value> = route
                        .steps
                        .iter()
                        .map(|s| {
                            json!({
                                "routeOffsetInMeters": s.offset.round() as u64,
                                "travelTimeInSeconds": s.duration.round() as u64,
                                "message": s.instruction,
                            })
                        })
                        .collect();
                    json!({
                        "summary": {
                            "lengthInMeters": route.distance.round() as u64,
                            "travelTimeInSeconds": route.duration.round() as u64,
                            "trafficDelayInSeconds": 0,
                        },
                        "legs": legs,
                        "guidance": {"instructions": instructions},
                    })
                })
                .collect();
            return reply(json!({"formatVersion": "0.0.12", "routes": routes}));
        }
        Err(bad(format!("unknown TomTom path {path}")))
    }

    fn nominatim(&self, r: &ResolvedRequest, path: &str) -> Result<HttpReply, TransportError> {
        let type_name = |c: char| match c {
            'N' => "node",
            'W' => "way",
            _ => "relation",
        };
        let ordinal = |n: u32| match n {
            1 => "1st".to_string(),
            2 => "2nd".to_string(),
            3 => "3rd".to_string(),
            n => format!("{n}th"),
        };
        match path {
            "/search" => {
                let found = self.world.text_search(param(r, "q")?, num(r, "limit")? as usize);
                let out: Vec<Value> = found
                    .iter()
                    .map(|p| {
                        json!({
                            "osm_type": type_name(p.osm_type),
                            "osm_id": p.osm_id,
                            "lat": format!("{}", p.lat),
                            "lon": format!("{}", p.lon),
                            "category": if p.is_landmark() { "tourism" } else { "amenity" },
                            "type": p.category,
                            "name": p.name,
                            "display_name": format!(
                                "{}, {}, {} Arrondissement, Paris, Île-de-France, Metropolitan France, {}, France",
                                p.name, p.street, ordinal(p.arrondissement()), p.postcode
                            ),
                        })
                    })
                    .collect();
                reply(Value::Array(out))
            }
            "/details" => {
                let kind = param(r, "osmtype")?.chars().next().unwrap_or('?');
                let id: u64 = param(r, "osmid")?.parse().map_err(|_| bad("osmid"))?;
                let p = self.world.by_osm(kind, id).ok_or_else(|| bad(format!("no osm object {kind}{id}")))?;
                let mut tags = json!({"opening_hours": osm_hours(p)});
                if let Some(flag) = p.wheelchair[0] {
                    tags["wheelchair"] = json!(if flag { "yes" } else { "no" });
                }
                reply(json!({
                    "osm_type": kind.to_string(),
                    "osm_id": p.osm_id,
                    "localname": p.name,
                    "category": if p.is_landmark() { "tourism" } else { "amenity" },
                    "type": p.category,
                    "centroid": {"type": "Point", "coordinates": [p.lon, p.lat]},
                    "address": [
                        {"localname": p.name, "isaddress": true, "rank_address": 30},
                        {"localname": p.street, "isaddress": true, "rank_address": 26},
                        {"localname": format!("{} Arrondissement", ordinal(p.arrondissement())), "isaddress": true, "rank_address": 18},
                        {"localname": "Paris", "isaddress": true, "rank_address": 16},
                        {"localname": "Île-de-France", "isaddress": false, "rank_address": 8},
                        {"localname": p.postcode, "isaddress": true, "rank_address": 5},
                    ],
                    "extratags": tags,
                }))
            }
            other => Err(bad(format!("unknown Nominatim path {other}"))),
        }
    }

    fn graphhopper(&self, r: &ResolvedRequest) -> Result<HttpReply, TransportError> {
        let b = body(r)?;
        let waypoints = b["points"]
            .as_array()
            .ok_or_else(|| bad("points"))?
            .iter()
            .map(|p| ll(p[1].as_f64().unwrap_or(f64::NAN), p[0].as_f64().unwrap_or(f64::NAN)))
            .collect::<Result<Vec<_>, _>>()?;
        let mode = mode_from(b["profile"].as_str().unwrap_or("car"))?;
        let alternatives = b["algorithm"].as_str() == Some("alternative_route");
        let paths: Vec<Value> = routes_for(&waypoints, mode, alternatives)
            .iter()
            .map(|route| {
                let instructions: Vec<Value> = route
                    .steps
                    .iter()
                    .map(|s| {
                        json!({
                            "text": s.instruction,
                            "distance": (s.distance * 1000.0).round() / 1000.0,
                            "time": (s.duration * 1000.0).round() as u64,
                        })
                    })
                    .collect();
                Ok(json!({
                    "distance": (route.distance * 1000.0).round() / 1000.0,
                    "time": (route.duration * 1000.0).round() as u64,
                    "points_encoded": true,
                    "points": encode(&route.points())?,
                    "instructions": instructions,
                }))
            })
            .collect::<Result<_, TransportError>>()?;
        reply(json!({"hints": {"visited_nodes.sum": 412}, "paths": paths}))
    }
}

fn decode_segment(segment: &str) -> Result<String, TransportError> {
    let raw = segment.strip_suffix(".json").ok_or_else(|| bad("expected .json"))?;
    percent_decode_str(raw)
        .decode_utf8()
        .map(|s| s.into_owned())
        .map_err(|e| bad(e.to_string()))
}

/// OSM `opening_hours` syntax, one rule per weekday.
fn osm_hours(p: &Poi) -> String {
    const DAYS: [&str; 7] = ["Mo", "Tu", "We", "Th", "Fr", "Sa", "Su"];
    DAYS.iter()
        .zip(&p.hours)
        .map(|(day, ranges)| {
            if ranges.is_empty() {
                format!("{day} off")
            } else {
                let text: Vec<String> = ranges
                    .iter()
                    .map(|(a, b)| {
                        let (ah, am) = clock(*a);
                        let (bh, bm) = if *b >= 1440 { (24, 0) } else { clock(*b) };
                        format!("{ah:02}:{am:02}-{bh:02}:{bm:02}")
                    })
                    .collect();
                format!("{day} {}", text.join(","))
            }
        })
        .collect::<Vec<_>>()
        .join("; ")
}

impl Transport for WorldTransport {
    fn send(&self, r: &ResolvedRequest, _: Duration) -> Result<HttpReply, TransportError> {
        let (host, path) = r
            .url
            .strip_prefix("https://")
            .and_then(|rest| rest.split_once('/'))
            .map(|(host, path)| (host, format!("/{path}")))
            .ok_or_else(|| bad(format!("unexpected url {}", r.url)))?;
        match (host, r.method) {
            ("places.googleapis.com", _) => self.google(r, &path),
            ("routes.googleapis.com", HttpMethod::Post) => self.google_routes(r),
            ("api.tomtom.com", _) => self.tomtom(r, &path),
            ("nominatim.openstreetmap.org", HttpMethod::Get) => self.nominatim(r, &path),
            ("graphhopper.com", HttpMethod::Post) => self.graphhopper(r),
            _ => Err(bad(format!("no synthetic provider for {host}"))),
        }
    }
}
