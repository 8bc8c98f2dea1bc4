//! Ordered, append-only collections of tool results and their two renderings.

use std::collections::BTreeMap;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adapters::{AdapterError, NormalizedResponse, RequestTemplate, UnifiedQuery};
use crate::cache::CacheKey;
use crate::gateway::RawExchange;
use crate::model::{Place, ProviderId, RouteResult, ToolKind, Waypoint};
use crate::template::{Slots, Template, FORMATTED_V1};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContextError {
    #[error("context has no entries")]
    EmptyContext,
    #[error("entry is inconsistent: {0}")]
    InvalidEntry(String),
}

impl From<AdapterError> for ContextError {
    fn from(e: AdapterError) -> Self {
        ContextError::InvalidEntry(e.to_string())
    }
}

/// Raw exchange as it appears in the structured layer: UTF-8 bodies stay
/// readable text, anything else is carried as base64.
#[derive(Serialize, Deserialize)]
struct ExchangeRepr {
    request_template: RequestTemplate,
    status: u16,
    #[serde(flatten)]
    body: BodyRepr,
    latency_ms: u64,
    fetched_at: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BodyRepr {
    RawResponseText(String),
    RawResponseBase64(String),
}

mod exchange_repr {
    use super::*;

    pub fn serialize<S: Serializer>(raw: &RawExchange, s: S) -> Result<S::Ok, S::Error> {
        let body = match std::str::from_utf8(&raw.raw_response) {
            Ok(text) => BodyRepr::RawResponseText(text.to_string()),
            Err(_) => BodyRepr::RawResponseBase64(BASE64.encode(&raw.raw_response)),
        };
        ExchangeRepr {
            request_template: raw.request_template.clone(),
            status: raw.status,
            body,
            latency_ms: raw.latency_ms,
            fetched_at: raw.fetched_at,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RawExchange, D::Error> {
        let repr = ExchangeRepr::deserialize(d)?;
        let raw_response = match repr.body {
            BodyRepr::RawResponseText(text) => text.into_bytes(),
            BodyRepr::RawResponseBase64(b64) => BASE64.decode(b64).map_err(serde::de::Error::custom)?,
        };
        Ok(RawExchange {
            request_template: repr.request_template,
            status: repr.status,
            raw_response,
            latency_ms: repr.latency_ms,
            fetched_at: repr.fetched_at,
        })
    }
}

/// One tool invocation: query, raw exchange, normalized payload, metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub sequence_no: u64,
    pub tool: ToolKind,
    pub provider: ProviderId,
    pub unified_query: UnifiedQuery,
    #[serde(with = "exchange_repr")]
    pub raw: RawExchange,
    pub normalized: NormalizedResponse,
    pub fetched_at: DateTime<Utc>,
    pub cache_key: CacheKey,
}

impl ContextEntry {
    /// SHA-256 of the entry's canonical JSON.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(crate::canonical::to_string(self).as_bytes()))
    }
}

/// A checked entry awaiting its sequence number.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryDraft {
    provider: ProviderId,
    unified_query: UnifiedQuery,
    raw: RawExchange,
    normalized: NormalizedResponse,
    cache_key: CacheKey,
}

impl EntryDraft {
    pub fn new(
        provider: ProviderId,
        unified_query: UnifiedQuery,
        raw: RawExchange,
        normalized: NormalizedResponse,
        cache_key: CacheKey,
    ) -> Result<EntryDraft, ContextError> {
        if normalized.kind != unified_query.tool {
            return Err(ContextError::InvalidEntry(format!(
                "normalized kind {} does not match query tool {}",
                normalized.kind, unified_query.tool
            )));
        }
        normalized.check()?;
        Ok(EntryDraft {
            provider,
            unified_query,
            raw,
            normalized,
            cache_key,
        })
    }

    pub fn normalized(&self) -> &NormalizedResponse {
        &self.normalized
    }
}

/// An immutable snapshot. Appending yields a new snapshot that shares the
/// previous entries, so readers holding the old value never see a change.
#[derive(Debug, Clone)]
pub struct Context {
    id: String,
    title: String,
    entries: Vec<Arc<ContextEntry>>,
    places: BTreeMap<(ProviderId, String), Place>,
    names: BTreeMap<String, (ProviderId, String)>,
}

impl PartialEq for Context {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.title == other.title && self.entries == other.entries
    }
}

impl Context {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Context {
        Context {
            id: id.into(),
            title: title.into(),
            entries: Vec::new(),
            places: BTreeMap::new(),
            names: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn entries(&self) -> &[Arc<ContextEntry>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn index(&mut self, entry: &ContextEntry) {
        for place in &entry.normalized.places {
            let key = (place.provider, place.id.clone());
            if self.places.contains_key(&key) {
                continue;
            }
            self.names.entry(place.display_name.clone()).or_insert_with(|| key.clone());
            self.places.insert(key, place.clone());
        }
    }

    /// Returns a new snapshot with `draft` appended as the next entry.
    pub fn appended(&self, draft: EntryDraft) -> Context {
        let mut next = self.clone();
        let entry = ContextEntry {
            sequence_no: self.entries.len() as u64 + 1,
            tool: draft.unified_query.tool,
            provider: draft.provider,
            unified_query: draft.unified_query,
            fetched_at: draft.raw.fetched_at,
            raw: draft.raw,
            normalized: draft.normalized,
            cache_key: draft.cache_key,
        };
        next.index(&entry);
        next.entries.push(Arc::new(entry));
        next
    }

    /// Rebuilds a snapshot from stored entries, checking sequence density
    /// and tool consistency. Place values are not re-validated here.
    pub fn from_entries(
        id: impl Into<String>,
        title: impl Into<String>,
        entries: Vec<ContextEntry>,
    ) -> Result<Context, ContextError> {
        let mut ctx = Context::new(id, title);
        for (i, entry) in entries.into_iter().enumerate() {
            if entry.sequence_no != i as u64 + 1 {
                return Err(ContextError::InvalidEntry(format!(
                    "entry {i} has sequence_no {}, expected {}",
                    entry.sequence_no,
                    i + 1
                )));
            }
            if entry.tool != entry.unified_query.tool || entry.normalized.kind != entry.tool {
                return Err(ContextError::InvalidEntry(format!("entry {i} mixes tool kinds")));
            }
            ctx.index(&entry);
            ctx.entries.push(Arc::new(entry));
        }
        Ok(ctx)
    }

    /// Distinct places across all entries, keyed by (provider, id).
    pub fn places(&self) -> impl Iterator<Item = &Place> {
        self.places.values()
    }

    /// Display names in the place index, alphabetical.
    pub fn place_names(&self) -> impl Iterator<Item = &str> {
        self.names.keys().map(String::as_str)
    }

    pub fn place_by_name(&self, name: &str) -> Option<&Place> {
        self.names.get(name).and_then(|key| self.places.get(key))
    }

    /// Running hash chain over entry digests; entry k's link depends on
    /// every entry before it.
    pub fn hash_chain(&self) -> Vec<String> {
        let mut prev = String::new();
        self.entries
            .iter()
            .map(|e| {
                let mut h = Sha256::new();
                h.update(prev.as_bytes());
                h.update(e.digest().as_bytes());
                prev = hex::encode(h.finalize());
                prev.clone()
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ContextRepr {
    id: String,
    title: String,
    entries: Vec<ContextEntry>,
}

impl Serialize for Context {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Context", 3)?;
        let entries: Vec<&ContextEntry> = self.entries.iter().map(Arc::as_ref).collect();
        st.serialize_field("entries", &entries)?;
        st.serialize_field("id", &self.id)?;
        st.serialize_field("title", &self.title)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Context {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Context, D::Error> {
        let repr = ContextRepr::deserialize(d)?;
        Context::from_entries(repr.id, repr.title, repr.entries).map_err(serde::de::Error::custom)
    }
}

/// Canonical JSON of the whole context, raw and normalized layers included.
pub fn render_structured(ctx: &Context) -> String {
    crate::canonical::to_string(ctx)
}

pub const DEFAULT_FORMATTED_TEMPLATE: &str = FORMATTED_V1;

/// Compact plain-text rendering with the default template.
pub fn render_formatted(ctx: &Context) -> String {
    let template = Template::bundled(DEFAULT_FORMATTED_TEMPLATE).expect("bundled template parses");
    render_formatted_with(ctx, &template)
}

pub fn render_formatted_with(ctx: &Context, template: &Template) -> String {
    let blocks: Vec<String> = ctx.entries.iter().map(|e| render_entry(e, template)).collect();
    blocks.join("\n")
}

fn section(template: &Template, name: &str, slots: &Slots) -> String {
    template
        .render(name, slots)
        .unwrap_or_else(|e| panic!("template {} is incomplete: {e}", template.version()))
}

pub fn format_rating(rating: f64) -> String {
    format!("{rating:.1}")
}

pub fn format_price(level: u8) -> String {
    match level {
        0 => "free".to_string(),
        n => "$".repeat(n as usize),
    }
}

pub fn format_meters(meters: f64) -> String {
    format!("{} m", meters.round() as i64)
}

pub fn format_km(meters: u64) -> String {
    format!("{:.1}", meters as f64 / 1000.0)
}

pub fn format_minutes(seconds: u64) -> String {
    format!("{}", (seconds as f64 / 60.0).round() as u64)
}

fn yes_no(v: bool) -> &'static str {
    if v {
        "yes"
    } else {
        "no"
    }
}

fn place_slots(place: &Place) -> Slots {
    let accessibility = place.accessibility.as_ref().and_then(|a| {
        let parts: Vec<String> = [
            ("wheelchair entrance", a.wheelchair_accessible_entrance),
            ("wheelchair parking", a.wheelchair_accessible_parking),
            ("wheelchair restroom", a.wheelchair_accessible_restroom),
        ]
        .into_iter()
        .filter_map(|(label, v)| v.map(|v| format!("{label} {}", yes_no(v))))
        .collect();
        (!parts.is_empty()).then(|| parts.join(", "))
    });
    Slots::new()
        .set("name", place.display_name.clone())
        .set_opt("address", (!place.short_address.is_empty()).then(|| place.short_address.clone()))
        .set_opt("rating", place.rating.map(format_rating))
        .set_opt("price", place.price_level.map(format_price))
        .list("hours", place.opening_hours.clone().unwrap_or_default())
        .set_opt("accessibility", accessibility)
        .list("review", place.reviews.clone().unwrap_or_default())
}

fn entry_title(entry: &ContextEntry) -> String {
    let q = &entry.unified_query;
    let text = |k: &str| q.str_param(k).ok().flatten().unwrap_or_default().to_string();
    let point = |k: &str| {
        q.waypoint(k)
            .ok()
            .flatten()
            .map(|w: Waypoint| w.describe())
            .unwrap_or_default()
    };
    match entry.tool {
        ToolKind::TextSearch => format!("Search: {}", text("query")),
        ToolKind::PlaceDetails => "Place details".to_string(),
        ToolKind::NearbySearch => {
            let kind = q.str_param("place_type").ok().flatten().unwrap_or("places");
            format!("Nearby {kind} around {}, closest first", point("anchor"))
        }
        ToolKind::ComputeRoutes => {
            let mode = q.travel_mode().map(|m| m.as_str().to_lowercase()).unwrap_or_default();
            format!("Routes from {} to {} by {mode}", point("origin"), point("destination"))
        }
        ToolKind::SearchAlongRoute => format!("{} along the route, in route order", text("query")),
    }
}

fn route_slots(rank: usize, route: &RouteResult) -> Slots {
    let via = route.description.clone().or_else(|| {
        (!route.intermediates.is_empty()).then(|| {
            route
                .intermediates
                .iter()
                .map(Waypoint::describe)
                .collect::<Vec<_>>()
                .join(", ")
        })
    });
    let steps = route
        .steps
        .iter()
        .map(|s| format!("{} ({})", s.instruction, format_meters(s.distance_meters as f64)))
        .collect();
    Slots::new()
        .set("rank", rank.to_string())
        .set("distance", format_km(route.distance_meters))
        .set("duration", format_minutes(route.duration_seconds))
        .set_opt("via", via)
        .list("step", steps)
}

fn render_entry(entry: &ContextEntry, template: &Template) -> String {
    let mut out = section(template, "entry", &Slots::new().set("title", entry_title(entry)));
    let normalized = &entry.normalized;
    match entry.tool {
        ToolKind::TextSearch | ToolKind::PlaceDetails => {
            for place in &normalized.places {
                out.push_str(&section(template, "place", &place_slots(place)));
            }
        }
        ToolKind::NearbySearch => {
            for (i, place) in normalized.places.iter().enumerate() {
                let slots = place_slots(place)
                    .set("rank", (i + 1).to_string())
                    .set_opt("distance", normalized.distance_of(&place.id).map(|d| format_meters(d.meters)));
                out.push_str(&section(template, "nearby", &slots));
            }
        }
        ToolKind::ComputeRoutes => {
            for (i, route) in normalized.routes.iter().enumerate() {
                out.push_str(&section(template, "route", &route_slots(i + 1, route)));
            }
        }
        ToolKind::SearchAlongRoute => {
            for (i, place) in normalized.places.iter().enumerate() {
                let slots = place_slots(place).set("rank", (i + 1).to_string());
                out.push_str(&section(template, "along_route", &slots));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextStats {
    pub structured_chars: u64,
    pub formatted_chars: u64,
    pub reduction_pct: f64,
}

impl ContextStats {
    pub fn from_counts(structured_chars: u64, formatted_chars: u64) -> Result<ContextStats, ContextError> {
        if structured_chars == 0 {
            return Err(ContextError::EmptyContext);
        }
        let reduction_pct = 100.0 * (structured_chars as f64 - formatted_chars as f64) / structured_chars as f64;
        Ok(ContextStats {
            structured_chars,
            formatted_chars,
            reduction_pct,
        })
    }
}

/// Character counts are Unicode scalar values.
pub fn context_stats(ctx: &Context) -> Result<ContextStats, ContextError> {
    if ctx.is_empty() {
        return Err(ContextError::EmptyContext);
    }
    ContextStats::from_counts(
        render_structured(ctx).chars().count() as u64,
        render_formatted(ctx).chars().count() as u64,
    )
}

/// Place names from this context only, case-insensitive prefix match,
/// alphabetical.
pub fn suggest_places(ctx: &Context, prefix: &str) -> Vec<String> {
    let wanted = prefix.to_lowercase();
    let mut out: Vec<String> = ctx
        .place_names()
        .filter(|name| name.to_lowercase().starts_with(&wanted))
        .map(str::to_string)
        .collect();
    out.sort_by(|a, b| a.to_lowercase().cmp(&b.to_lowercase()).then_with(|| a.cmp(b)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{RequestTemplate, UnifiedQuery};
    use crate::model::LatLng;
    use chrono::TimeZone;

    fn place(id: &str, name: &str, rating: f64) -> Place {
        let mut p = Place::new(ProviderId::TomTom, id, name, "Paris", LatLng::new(48.86, 2.33).unwrap());
        p.rating = Some(rating);
        p.price_level = Some(2);
        p
    }

    fn draft(places: Vec<Place>) -> EntryDraft {
        let q = UnifiedQuery::new(ToolKind::TextSearch).with("query", "museum");
        let raw = RawExchange {
            request_template: RequestTemplate::get("https://api.example.test/search"),
            status: 200,
            raw_response: br#"{"results":[]}"#.to_vec(),
            latency_ms: 12,
            fetched_at: Utc.with_ymd_and_hms(2025, 1, 15, 10, 0, 0).unwrap(),
        };
        let key = CacheKey::parse(&"a".repeat(64)).unwrap();
        EntryDraft::new(ProviderId::TomTom, q, raw, NormalizedResponse::places(ToolKind::TextSearch, places), key)
            .unwrap()
    }

    #[test]
    fn append_assigns_dense_sequence_numbers() {
        let ctx = Context::new("c1", "Paris");
        let one = ctx.appended(draft(vec![place("1", "Louvre Museum", 4.7)]));
        assert_eq!(one.entries()[0].sequence_no, 1);
        let two = one.appended(draft(vec![place("2", "Eiffel Tower", 4.6)]));
        assert_eq!(two.entries()[1].sequence_no, 2);
        assert!(ctx.is_empty());
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn identical_appends_leave_index_unchanged() {
        let d = draft(vec![
            place("1", "Louvre Museum", 4.7),
            place("2", "Eiffel Tower", 4.6),
            place("1", "Louvre Museum", 4.7),
        ]);
        let once = Context::new("c", "t").appended(d.clone());
        assert_eq!(once.places().count(), 2);
        let twice = once.appended(d);
        assert_eq!(twice.len(), 2);
        assert_eq!(twice.places().count(), 2);
        assert_eq!(twice.place_names().collect::<Vec<_>>(), vec!["Eiffel Tower", "Louvre Museum"]);
    }

    #[test]
    fn renders_empty_context() {
        let ctx = Context::new("c", "t");
        assert_eq!(render_structured(&ctx), r#"{"entries":[],"id":"c","title":"t"}"#);
        assert_eq!(render_formatted(&ctx), "");
        assert_eq!(context_stats(&ctx), Err(ContextError::EmptyContext));
    }

    #[test]
    fn structured_round_trips() {
        let ctx = Context::new("c", "t").appended(draft(vec![place("1", "Louvre Museum", 4.7)]));
        let text = render_structured(&ctx);
        assert!(text.contains(r#""raw_response_text":"{\"results\":[]}""#));
        let back: Context = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ctx);
        assert_eq!(render_structured(&back), text);
        assert_eq!(back.place_names().collect::<Vec<_>>(), vec!["Louvre Museum"]);
    }

    #[test]
    fn non_utf8_bodies_use_base64() {
        let mut d = draft(vec![]);
        d.raw.raw_response = vec![0xff, 0x00];
        let ctx = Context::new("c", "t").appended(d);
        let text = render_structured(&ctx);
        assert!(text.contains(r#""raw_response_base64":"/wA=""#));
        assert_eq!(serde_json::from_str::<Context>(&text).unwrap(), ctx);
    }

    #[test]
    fn formatted_place_block() {
        let mut p = place("1", "Louvre Museum", 4.7);
        p.opening_hours = Some(vec!["Monday: 09:00-18:00".into(), "Tuesday: closed".into()]);
        let ctx = Context::new("c", "t").appended(draft(vec![p]));
        assert_eq!(
            render_formatted(&ctx),
            "== Search: museum ==\nLouvre Museum\n  Address: Paris\n  Rating: 4.7\n  Price: $$\n  Hours: Monday: 09:00-18:00\n  Hours: Tuesday: closed\n"
        );
    }

    #[test]
    fn stats_arithmetic() {
        let s = ContextStats::from_counts(17_534, 2_536).unwrap();
        assert!((s.reduction_pct - 85.54).abs() <= 0.01, "{}", s.reduction_pct);
        assert_eq!(ContextStats::from_counts(0, 0), Err(ContextError::EmptyContext));
        let ctx = Context::new("c", "t").appended(draft(vec![place("1", "Louvre Museum", 4.7)]));
        let s = context_stats(&ctx).unwrap();
        assert_eq!(s.structured_chars, render_structured(&ctx).chars().count() as u64);
        assert!(s.formatted_chars < s.structured_chars);
    }

    #[test]
    fn suggestions_come_from_context() {
        let ctx = Context::new("c", "t").appended(draft(vec![
            place("1", "Louvre Museum", 4.7),
            place("2", "Eiffel Tower", 4.6),
            place("3", "louis Cafe", 4.0),
        ]));
        assert_eq!(suggest_places(&ctx, "lou"), vec!["louis Cafe", "Louvre Museum"]);
        assert_eq!(suggest_places(&ctx, "LOUV"), vec!["Louvre Museum"]);
        assert_eq!(suggest_places(&ctx, "").len(), 3);
        assert!(suggest_places(&ctx, "zzz").is_empty());
    }

    #[test]
    fn hash_chain_is_stable_under_append() {
        let one = Context::new("c", "t").appended(draft(vec![place("1", "Louvre Museum", 4.7)]));
        let chain = one.hash_chain();
        let two = one.appended(draft(vec![place("2", "Eiffel Tower", 4.6)]));
        assert_eq!(&two.hash_chain()[..1], &chain[..]);
        assert_eq!(two.hash_chain().len(), 2);
    }
}
