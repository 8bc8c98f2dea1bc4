//! Normalized domain types shared by every provider, plus spherical geodesy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polyline;

/// Mean Earth radius in meters (spherical model).
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("unknown provider '{0}'")]
    UnknownProvider(String),
    #[error("unknown tool '{0}'")]
    UnknownTool(String),
    #[error("unknown travel mode '{0}'")]
    UnknownTravelMode(String),
}

/// A WGS84 coordinate in decimal degrees. Always within range once constructed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLatLng")]
pub struct LatLng {
    latitude: f64,
    longitude: f64,
}

#[derive(Deserialize)]
struct RawLatLng {
    latitude: f64,
    longitude: f64,
}

impl TryFrom<RawLatLng> for LatLng {
    type Error = ModelError;

    fn try_from(raw: RawLatLng) -> Result<Self, Self::Error> {
        LatLng::new(raw.latitude, raw.longitude)
    }
}

impl LatLng {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self, ModelError> {
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(ModelError::Latitude(latitude));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(ModelError::Longitude(longitude));
        }
        Ok(LatLng { latitude, longitude })
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }
}

impl fmt::Display for LatLng {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.latitude, self.longitude)
    }
}

/// Great-circle distance in meters on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine_distance(a: LatLng, b: LatLng) -> f64 {
    let (lat1, lat2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.longitude - a.longitude).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderId {
    Google,
    OpenStreetMap,
    Mapbox,
    TomTom,
    Here,
    Azure,
    Replay,
}

impl ProviderId {
    pub const ALL: [ProviderId; 7] = [
        ProviderId::Google,
        ProviderId::OpenStreetMap,
        ProviderId::Mapbox,
        ProviderId::TomTom,
        ProviderId::Here,
        ProviderId::Azure,
        ProviderId::Replay,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProviderId::Google => "google",
            ProviderId::OpenStreetMap => "openstreetmap",
            ProviderId::Mapbox => "mapbox",
            ProviderId::TomTom => "tomtom",
            ProviderId::Here => "here",
            ProviderId::Azure => "azure",
            ProviderId::Replay => "replay",
        }
    }
}

impl fmt::Display for ProviderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProviderId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProviderId::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownProvider(s.to_string()))
    }
}

/// The five data-collection tools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ToolKind {
    TextSearch,
    PlaceDetails,
    NearbySearch,
    ComputeRoutes,
    SearchAlongRoute,
}

impl ToolKind {
    pub const ALL: [ToolKind; 5] = [
        ToolKind::TextSearch,
        ToolKind::PlaceDetails,
        ToolKind::NearbySearch,
        ToolKind::ComputeRoutes,
        ToolKind::SearchAlongRoute,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ToolKind::TextSearch => "TextSearch",
            ToolKind::PlaceDetails => "PlaceDetails",
            ToolKind::NearbySearch => "NearbySearch",
            ToolKind::ComputeRoutes => "ComputeRoutes",
            ToolKind::SearchAlongRoute => "SearchAlongRoute",
        }
    }

    /// URL slug used by the HTTP API (`text-search`, `compute-routes`, ...).
    pub fn slug(&self) -> &'static str {
        match self {
            ToolKind::TextSearch => "text-search",
            ToolKind::PlaceDetails => "place-details",
            ToolKind::NearbySearch => "nearby-search",
            ToolKind::ComputeRoutes => "compute-routes",
            ToolKind::SearchAlongRoute => "search-along-route",
        }
    }

    pub fn from_slug(slug: &str) -> Option<ToolKind> {
        ToolKind::ALL.into_iter().find(|t| t.slug() == slug)
    }

    pub fn is_routing(&self) -> bool {
        matches!(self, ToolKind::ComputeRoutes | ToolKind::SearchAlongRoute)
    }
}

impl fmt::Display for ToolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToolKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ToolKind::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s) || t.slug() == s)
            .ok_or_else(|| ModelError::UnknownTool(s.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accessibility {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wheelchair_accessible_entrance: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wheelchair_accessible_parking: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wheelchair_accessible_restroom: Option<bool>,
}

impl Accessibility {
    pub fn is_empty(&self) -> bool {
        self.wheelchair_accessible_entrance.is_none()
            && self.wheelchair_accessible_parking.is_none()
            && self.wheelchair_accessible_restroom.is_none()
    }
}

/// A point of interest in the unified schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Place {
    pub id: String,
    pub display_name: String,
    pub short_address: String,
    pub location: LatLng,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
    /// Tier 0 (free) to 4 (very expensive).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_level: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opening_hours: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviews: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accessibility: Option<Accessibility>,
    pub provider: ProviderId,
}

impl Place {
    pub fn new(
        provider: ProviderId,
        id: impl Into<String>,
        display_name: impl Into<String>,
        short_address: impl Into<String>,
        location: LatLng,
    ) -> Self {
        Place {
            id: id.into(),
            display_name: display_name.into(),
            short_address: short_address.into(),
            location,
            rating: None,
            price_level: None,
            opening_hours: None,
            reviews: None,
            accessibility: None,
            provider,
        }
    }

    /// Names of the optional attributes that carry a value.
    pub fn populated_fields(&self) -> Vec<&'static str> {
        let mut fields = vec!["id", "display_name", "short_address", "location", "provider"];
        if self.rating.is_some() {
            fields.push("rating");
        }
        if self.price_level.is_some() {
            fields.push("price_level");
        }
        if self.opening_hours.is_some() {
            fields.push("opening_hours");
        }
        if self.reviews.is_some() {
            fields.push("reviews");
        }
        if self.accessibility.is_some() {
            fields.push("accessibility");
        }
        fields
    }
}

/// One broken invariant, addressed by field name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

pub fn validate_place(place: &Place) -> Vec<Violation> {
    let mut out = Vec::new();
    if place.id.trim().is_empty() {
        out.push(Violation::new("id", "id empty"));
    }
    if place.display_name.trim().is_empty() {
        out.push(Violation::new("display_name", "display_name empty"));
    }
    if let Some(rating) = place.rating {
        if !(0.0..=5.0).contains(&rating) {
            out.push(Violation::new("rating", "rating out of [0,5]"));
        }
    }
    if let Some(tier) = place.price_level {
        if tier > 4 {
            out.push(Violation::new("price_level", "price_level out of [0,4]"));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TravelMode {
    Drive,
    Walk,
    Bicycle,
    TwoWheeler,
    /// Representable so it can be rejected; never produced by an adapter.
    Transit,
}

impl TravelMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TravelMode::Drive => "DRIVE",
            TravelMode::Walk => "WALK",
            TravelMode::Bicycle => "BICYCLE",
            TravelMode::TwoWheeler => "TWO_WHEELER",
            TravelMode::Transit => "TRANSIT",
        }
    }
}

impl fmt::Display for TravelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TravelMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "DRIVE" => Ok(TravelMode::Drive),
            "WALK" => Ok(TravelMode::Walk),
            "BICYCLE" => Ok(TravelMode::Bicycle),
            "TWO_WHEELER" => Ok(TravelMode::TwoWheeler),
            "TRANSIT" => Ok(TravelMode::Transit),
            _ => Err(ModelError::UnknownTravelMode(s.to_string())),
        }
    }
}

/// Route origin, destination or stop: a coordinate, optionally tied to a place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub location: LatLng,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub place_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Waypoint {
    pub fn at(location: LatLng) -> Self {
        Waypoint {
            location,
            place_id: None,
            label: None,
        }
    }

    pub fn describe(&self) -> String {
        match &self.label {
            Some(label) => label.clone(),
            None => format!("({:.5}, {:.5})", self.location.latitude, self.location.longitude),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteStep {
    pub instruction: String,
    pub distance_meters: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteResult {
    pub origin: Waypoint,
    pub destination: Waypoint,
    #[serde(default)]
    pub intermediates: Vec<Waypoint>,
    pub travel_mode: TravelMode,
    pub distance_meters: u64,
    pub duration_seconds: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub steps: Vec<RouteStep>,
    pub encoded_polyline: String,
    pub polyline_precision: u8,
    pub provider: ProviderId,
}

impl RouteResult {
    pub fn decoded_points(&self) -> Result<Vec<LatLng>, polyline::PolylineError> {
        polyline::decode_polyline(&self.encoded_polyline, self.polyline_precision)
    }
}

pub fn validate_route(route: &RouteResult) -> Vec<Violation> {
    let mut out = Vec::new();
    if route.travel_mode == TravelMode::Transit {
        out.push(Violation::new("travel_mode", "TRANSIT routes are not allowed"));
    }
    for (i, step) in route.steps.iter().enumerate() {
        if step.distance_meters > route.distance_meters {
            out.push(Violation::new(
                format!("steps[{i}].distance_meters"),
                "step longer than the whole route",
            ));
        }
    }
    if !matches!(route.polyline_precision, 5 | 6) {
        out.push(Violation::new("polyline_precision", "precision must be 5 or 6"));
    } else if let Err(e) = route.decoded_points() {
        out.push(Violation::new("encoded_polyline", e.to_string()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ll(lat: f64, lng: f64) -> LatLng {
        LatLng::new(lat, lng).unwrap()
    }

    #[test]
    fn haversine_identity_is_zero() {
        let p = ll(48.8584, 2.2945);
        assert_eq!(haversine_distance(p, p), 0.0);
    }

    #[test]
    fn haversine_antipodal_on_equator() {
        let d = haversine_distance(ll(0.0, 0.0), ll(0.0, 180.0));
        assert!((d - 20_015_086.796).abs() < 1.0, "{d}");
    }

    #[test]
    fn haversine_eiffel_to_westminster() {
        // Pinned from an independent unit-vector/atan2 great-circle calculation.
        let d = haversine_distance(ll(48.8584, 2.2945), ll(51.5007, -0.1246));
        let oracle = 340_538.92;
        assert!((d - oracle).abs() / oracle < 1e-3, "{d}");
    }

    #[test]
    fn coordinates_are_range_checked() {
        assert_eq!(LatLng::new(91.0, 0.0), Err(ModelError::Latitude(91.0)));
        assert_eq!(LatLng::new(0.0, -180.5), Err(ModelError::Longitude(-180.5)));
        assert!(LatLng::new(f64::NAN, 0.0).is_err());
        let err = serde_json::from_str::<LatLng>(r#"{"latitude":95,"longitude":0}"#);
        assert!(err.is_err());
    }

    #[test]
    fn place_validation() {
        let mut p = Place::new(ProviderId::TomTom, "", "Louvre", "Paris", ll(48.86, 2.33));
        assert_eq!(validate_place(&p), vec![Violation::new("id", "id empty")]);

        p.id = "X".into();
        p.rating = Some(4.2);
        assert!(validate_place(&p).is_empty());

        p.rating = Some(7.0);
        let v = validate_place(&p);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "rating out of [0,5]");
    }

    #[test]
    fn provider_and_tool_parse() {
        assert_eq!("TomTom".parse::<ProviderId>().unwrap(), ProviderId::TomTom);
        assert!("bing".parse::<ProviderId>().is_err());
        assert_eq!("compute-routes".parse::<ToolKind>().unwrap(), ToolKind::ComputeRoutes);
        assert_eq!(ToolKind::from_slug("nearby-search"), Some(ToolKind::NearbySearch));
        assert_eq!(
            serde_json::to_string(&ProviderId::OpenStreetMap).unwrap(),
            "\"openstreetmap\""
        );
        assert_eq!(serde_json::to_string(&TravelMode::TwoWheeler).unwrap(), "\"TWO_WHEELER\"");
    }
}
