//! Regenerates the replay corpus: `fixtures/recorded/*.json` (one recorded
//! exchange each), `fixtures/scenarios.json` (scripted sessions with their
//! QA pairs) and `fixtures/golden/dataset.json` (the replayed export).
//!
//! Responses come from a seeded synthetic map of central Paris served in
//! each provider's wire format, so the whole pipeline runs exactly as it
//! would against live endpoints, in record mode.
//!
//! ```text
//! cargo run -p geoqa-core --example gen_fixtures
//! ```

mod transport;
mod world;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{Duration, TimeZone, Utc};
use geoqa_core::adapters::{PlaceDistance, Registry, UnifiedQuery};
use geoqa_core::cache::ResponseCache;
use geoqa_core::context::{format_meters, format_minutes, format_price, format_rating, render_formatted, render_structured, Context};
use geoqa_core::dataset::export_json;
use geoqa_core::fixture::FixtureSet;
use geoqa_core::gateway::{Credentials, Gateway, GatewayConfig, GatewayMode};
use geoqa_core::pipeline::Workbench;
use geoqa_core::polyline::EncodedPolyline;
use geoqa_core::qa::{create_qa, AnswerFormat, Gold, QaDraft};
use geoqa_core::scenario::{build_dataset, Scenario, ScenarioFile, ScenarioQa, Step};
use geoqa_core::{Place, ProviderId, RouteResult, ToolKind, TravelMode};

use transport::WorldTransport;
use world::World;

const SEED: u64 = 20_250_115;

struct Session<'a> {
    wb: &'a Workbench,
    scenario: Scenario,
    ctx: Context,
}

fn waypoint(p: &Place) -> geoqa_core::model::Waypoint {
    geoqa_core::model::Waypoint {
        location: p.location,
        place_id: Some(p.id.clone()),
        label: Some(p.display_name.clone()),
    }
}

impl<'a> Session<'a> {
    fn new(wb: &'a Workbench, id: &str, title: &str) -> Self {
        Session {
            wb,
            scenario: Scenario {
                id: id.to_string(),
                title: title.to_string(),
                steps: Vec::new(),
                qa: Vec::new(),
            },
            ctx: Context::new(id, title),
        }
    }

    fn run(&mut self, provider: ProviderId, query: UnifiedQuery) -> geoqa_core::adapters::NormalizedResponse {
        let outcome = self
            .wb
            .run_tool(provider, &query)
            .unwrap_or_else(|e| panic!("{} {}: {e}", self.scenario.id, query.tool));
        self.scenario.steps.push(Step { provider, query });
        self.ctx = self.ctx.appended(outcome.draft);
        self.ctx.entries().last().unwrap().normalized.clone()
    }

    fn search(&mut self, provider: ProviderId, text: &str) -> Place {
        let n = self.run(provider, UnifiedQuery::new(ToolKind::TextSearch).with("query", text));
        n.places.first().cloned().unwrap_or_else(|| panic!("no result for {text}"))
    }

    fn details(&mut self, provider: ProviderId, place: &Place) -> Place {
        let n = self.run(provider, UnifiedQuery::new(ToolKind::PlaceDetails).with("place_id", &place.id));
        n.places[0].clone()
    }

    fn nearby(&mut self, provider: ProviderId, anchor: &Place, kind: &str, limit: u64, extra: &[(&str, serde_json::Value)]) -> (Vec<Place>, Vec<PlaceDistance>) {
        let mut q = UnifiedQuery::new(ToolKind::NearbySearch)
            .with("anchor", waypoint(anchor))
            .with("place_type", kind)
            .with("limit", limit);
        for (k, v) in extra {
            q.set(k, v);
        }
        let n = self.run(provider, q);
        (n.places, n.distances)
    }

    fn routes(&mut self, provider: ProviderId, stops: &[&Place], mode: TravelMode, alternatives: bool) -> Vec<RouteResult> {
        let mut q = UnifiedQuery::new(ToolKind::ComputeRoutes)
            .with("origin", waypoint(stops[0]))
            .with("destination", waypoint(stops[stops.len() - 1]))
            .with("travel_mode", mode.as_str());
        if stops.len() > 2 {
            let via: Vec<_> = stops[1..stops.len() - 1].iter().map(|p| waypoint(p)).collect();
            q.set("intermediates", via);
        }
        if alternatives {
            q.set("compute_alternatives", true);
        }
        self.run(provider, q).routes
    }

    fn along(&mut self, provider: ProviderId, route: &RouteResult, text: &str, limit: u64) -> Vec<Place> {
        let q = UnifiedQuery::new(ToolKind::SearchAlongRoute)
            .with("query", text)
            .with("route", EncodedPolyline::new(route.encoded_polyline.clone(), route.polyline_precision))
            .with("travel_mode", route.travel_mode.as_str())
            .with("limit", limit);
        self.run(provider, q).places
    }

    fn ask(&mut self, question: String, format: AnswerFormat, options: Vec<String>, gold: Gold, category: &str) {
        let qa = ScenarioQa {
            question,
            format,
            options,
            gold,
            categories: vec![category.to_string()],
        };
        let draft = QaDraft {
            context_id: self.scenario.id.clone(),
            question: qa.question.clone(),
            format: qa.format,
            options: qa.options.clone(),
            gold: qa.gold.clone(),
            categories: qa.categories.clone(),
            supersedes: None,
        };
        create_qa(&self.ctx, draft).unwrap_or_else(|e| panic!("{}: {e}", self.scenario.id));
        self.scenario.qa.push(qa);
    }

    fn ask_rating(&mut self, p: &Place) {
        if let Some(r) = p.rating {
            self.ask(
                format!("What is the rating of @{}?", p.display_name),
                AnswerFormat::OpenEnded,
                Vec::new(),
                Gold::Text(format_rating(r)),
                "rating",
            );
        }
    }

    fn ask_price(&mut self, p: &Place) {
        if let Some(tier) = p.price_level {
            self.ask(
                format!("What is the price level of @{}?", p.display_name),
                AnswerFormat::OpenEnded,
                Vec::new(),
                Gold::Text(format_price(tier)),
                "price",
            );
        }
    }

    fn ask_wheelchair(&mut self, p: &Place) {
        if let Some(flag) = p.accessibility.as_ref().and_then(|a| a.wheelchair_accessible_entrance) {
            self.ask(
                format!("Does @{} have a wheelchair accessible entrance?", p.display_name),
                AnswerFormat::YesNo,
                Vec::new(),
                Gold::Text(if flag { "Yes" } else { "No" }.into()),
                "accessibility",
            );
        }
    }

    /// Google-style hours ("Tuesday: Closed").
    fn ask_open_on(&mut self, p: &Place, day: &str) {
        let Some(line) = p.opening_hours.iter().flatten().find(|l| l.starts_with(day)) else {
            return;
        };
        let open = !line.ends_with("Closed");
        self.ask(
            format!("Is @{} open on {day}?", p.display_name),
            AnswerFormat::YesNo,
            Vec::new(),
            Gold::Text(if open { "Yes" } else { "No" }.into()),
            "hours",
        );
    }

    fn ask_address(&mut self, p: &Place) {
        self.ask(
            format!("What is the address of @{}?", p.display_name),
            AnswerFormat::OpenEnded,
            Vec::new(),
            Gold::Text(p.short_address.clone()),
            "address",
        );
    }

    /// Four options drawn from `places`; the gold is the one at rank 0.
    fn ask_first(&mut self, question: String, places: &[Place], category: &str) {
        if places.len() < 4 {
            return;
        }
        let picks = [0, places.len() / 3, places.len() / 2, places.len() - 1];
        let rotate = self.scenario.qa.len() % 4;
        let mut options: Vec<String> = picks.iter().map(|&i| places[i].display_name.clone()).collect();
        options.rotate_left(rotate);
        let gold = (4 - rotate) % 4;
        self.ask(question, AnswerFormat::SingleChoice, options, Gold::Index(gold), category);
    }

    fn ask_rated_at_least(&mut self, noun: &str, places: &[Place], min: f64) {
        let rated: Vec<&Place> = places.iter().filter(|p| p.rating.is_some()).collect();
        if rated.len() < 4 {
            return;
        }
        let picks: Vec<&Place> = (0..4).map(|i| rated[i * (rated.len() - 1) / 3]).collect();
        let gold: std::collections::BTreeSet<usize> = picks
            .iter()
            .enumerate()
            .filter(|(_, p)| p.rating.unwrap() >= min)
            .map(|(i, _)| i)
            .collect();
        if gold.is_empty() {
            return;
        }
        self.ask(
            format!("Which of these {noun} have a rating of at least {min:.1}?"),
            AnswerFormat::MultipleChoice,
            picks.iter().map(|p| p.display_name.clone()).collect(),
            Gold::Indices(gold),
            "rating",
        );
    }

    fn ask_distance(&mut self, anchor: &Place, places: &[Place], distances: &[PlaceDistance]) {
        let (Some(first), Some(d)) = (places.first(), distances.first()) else {
            return;
        };
        self.ask(
            format!("How far is @{} from @{}?", first.display_name, anchor.display_name),
            AnswerFormat::OpenEnded,
            Vec::new(),
            Gold::Text(format_meters(d.meters)),
            "distance",
        );
    }

    fn ask_routes(&mut self, routes: &[RouteResult]) {
        if let Some(r) = routes.first() {
            self.ask(
                "How many minutes does Route 1 take?".to_string(),
                AnswerFormat::OpenEnded,
                Vec::new(),
                Gold::Text(format!("{} min", format_minutes(r.duration_seconds))),
                "duration",
            );
        }
        if routes.len() >= 2 {
            let shorter = if routes[0].distance_meters <= routes[1].distance_meters { 0 } else { 1 };
            self.ask(
                "Which route is shorter?".to_string(),
                AnswerFormat::SingleChoice,
                vec!["Route 1".into(), "Route 2".into()],
                Gold::Index(shorter),
                "route",
            );
        }
    }

    fn ask_count_rated(&mut self, noun: &str, places: &[Place], min: f64) {
        let count = places.iter().filter(|p| p.rating.is_some_and(|r| r >= min)).count();
        self.ask(
            format!("How many of the listed {noun} have a rating of at least {min:.1}?"),
            AnswerFormat::OpenEnded,
            Vec::new(),
            Gold::Text(count.to_string()),
            "count",
        );
    }

    fn finish(self) -> (Scenario, Context) {
        assert!(!self.scenario.qa.is_empty(), "{} has no questions", self.scenario.id);
        (self.scenario, self.ctx)
    }
}

use ProviderId::{Google, OpenStreetMap as Osm, TomTom};

fn scenarios(wb: &Workbench) -> Vec<(Scenario, Context)> {
    let mut out = Vec::new();

    // Louvre details (Google).
    let mut s = Session::new(wb, "ctx-01-louvre-details", "Louvre Museum details");
    let hit = s.search(Google, "Louvre Museum");
    let louvre = s.details(Google, &hit);
    s.ask_rating(&louvre);
    s.ask_wheelchair(&louvre);
    s.ask_open_on(&louvre, "Tuesday");
    s.ask_open_on(&louvre, "Friday");
    out.push(s.finish());

    // Louvre details (TomTom).
    let mut s = Session::new(wb, "ctx-02-louvre-details-tomtom", "Louvre Museum details from TomTom");
    let hit = s.search(TomTom, "Louvre Museum");
    let louvre_tt = s.details(TomTom, &hit);
    s.ask_address(&louvre_tt);
    let closed = louvre_tt.opening_hours.iter().flatten().all(|l| !l.starts_with("2025-01-21"));
    s.ask(
        format!("Is @{} open on 2025-01-21?", louvre_tt.display_name),
        AnswerFormat::YesNo,
        Vec::new(),
        Gold::Text(if closed { "No" } else { "Yes" }.into()),
        "hours",
    );
    out.push(s.finish());

    // Twenty restaurants around the Louvre, closest first (TomTom).
    let mut s = Session::new(wb, "ctx-03-louvre-restaurants-tomtom", "Restaurants near the Louvre");
    let hit = s.search(TomTom, "Louvre Museum");
    let anchor = s.details(TomTom, &hit);
    let (places, distances) = s.nearby(TomTom, &anchor, "restaurant", 20, &[]);
    s.ask_first(format!("Which restaurant is closest to @{}?", anchor.display_name), &places, "distance");
    s.ask_distance(&anchor, &places, &distances);
    out.push(s.finish());

    // Twenty restaurants around the Louvre (Google, rated).
    let mut s = Session::new(wb, "ctx-04-louvre-restaurants-google", "Rated restaurants near the Louvre");
    let anchor = s.search(Google, "Louvre Museum");
    let (places, distances) = s.nearby(Google, &anchor, "restaurant", 20, &[]);
    s.ask_first(format!("Which restaurant is closest to @{}?", anchor.display_name), &places, "distance");
    s.ask_rated_at_least("restaurants", &places, 4.5);
    s.ask_distance(&anchor, &places, &distances);
    s.ask_price(&places[1]);
    out.push(s.finish());

    // Two driving routes from the Eiffel Tower to the Louvre (Google).
    let mut s = Session::new(wb, "ctx-05-eiffel-louvre-routes", "Eiffel Tower to the Louvre by car");
    let eiffel = s.search(Google, "Eiffel Tower");
    let louvre = s.search(Google, "Louvre Museum");
    let routes = s.routes(Google, &[&eiffel, &louvre], TravelMode::Drive, true);
    assert_eq!(routes.len(), 2);
    s.ask_routes(&routes);
    out.push(s.finish());

    // Twenty restaurants along the first route (Google).
    let mut s = Session::new(wb, "ctx-06-eiffel-louvre-along-google", "Restaurants along the Eiffel Tower to Louvre drive");
    let eiffel = s.search(Google, "Eiffel Tower");
    let louvre = s.search(Google, "Louvre Museum");
    let routes = s.routes(Google, &[&eiffel, &louvre], TravelMode::Drive, true);
    let along = s.along(Google, &routes[0], "restaurant", 20);
    assert_eq!(along.len(), 20, "the corridor should hold twenty restaurants");
    s.ask_first("Which restaurant comes first along the route?".into(), &along, "ordering");
    s.ask_rating(&along[2]);
    s.ask_count_rated("restaurants", &along, 4.5);
    out.push(s.finish());

    // The same drive and corridor through TomTom.
    let mut s = Session::new(wb, "ctx-07-eiffel-louvre-tomtom", "Eiffel Tower to the Louvre with TomTom");
    let eiffel = s.search(TomTom, "Eiffel Tower");
    let louvre = s.search(TomTom, "Louvre Museum");
    let routes = s.routes(TomTom, &[&eiffel, &louvre], TravelMode::Drive, true);
    let along = s.along(TomTom, &routes[0], "restaurant", 20);
    s.ask_routes(&routes);
    s.ask_first("Which restaurant comes first along the route?".into(), &along, "ordering");
    out.push(s.finish());

    // One query, two providers.
    let mut s = Session::new(wb, "ctx-08-louvre-search-compare", "Louvre search on Google and TomTom");
    let g = s.search(Google, "Louvre Museum");
    let t = s.search(TomTom, "Louvre Museum");
    s.ask_address(&t);
    assert_eq!(g.display_name, t.display_name);
    out.push(s.finish());

    // OpenStreetMap: Nominatim details and a GraphHopper walk.
    let mut s = Session::new(wb, "ctx-09-notre-dame-osm", "Notre-Dame to Sainte-Chapelle on foot (OpenStreetMap)");
    let hit = s.search(Osm, "Notre-Dame de Paris");
    let nd = s.details(Osm, &hit);
    let chapelle = s.search(Osm, "Sainte-Chapelle");
    let routes = s.routes(Osm, &[&nd, &chapelle], TravelMode::Walk, false);
    s.ask_wheelchair(&nd);
    s.ask_routes(&routes);
    out.push(s.finish());

    // Cafes near the Musée d'Orsay (Google).
    let mut s = Session::new(wb, "ctx-10-orsay-cafes", "Cafes near the Musée d'Orsay");
    let hit = s.search(Google, "Musée d'Orsay");
    let orsay = s.details(Google, &hit);
    let (places, distances) = s.nearby(Google, &orsay, "cafe", 10, &[]);
    s.ask_open_on(&orsay, "Monday");
    s.ask_first(format!("Which cafe is closest to @{}?", orsay.display_name), &places, "distance");
    s.ask_distance(&orsay, &places, &distances);
    out.push(s.finish());

    // Cafes near the Centre Pompidou (TomTom).
    let mut s = Session::new(wb, "ctx-11-pompidou-cafes-tomtom", "Cafes near the Centre Pompidou");
    let anchor = s.search(TomTom, "Centre Pompidou");
    let (places, distances) = s.nearby(TomTom, &anchor, "cafe", 10, &[]);
    s.ask_first(format!("Which cafe is closest to @{}?", anchor.display_name), &places, "distance");
    s.ask_distance(&anchor, &places, &distances);
    out.push(s.finish());

    // Multi-stop drive (TomTom).
    let mut s = Session::new(wb, "ctx-12-arc-concorde-opera", "Arc de Triomphe to Palais Garnier via Concorde");
    let arc = s.search(TomTom, "Arc de Triomphe");
    let concorde = s.search(TomTom, "Place de la Concorde");
    let opera = s.search(TomTom, "Palais Garnier");
    let routes = s.routes(TomTom, &[&arc, &concorde, &opera], TravelMode::Drive, false);
    s.ask_routes(&routes);
    out.push(s.finish());

    // Walk (Google).
    let mut s = Session::new(wb, "ctx-13-pantheon-luxembourg-walk", "Panthéon to the Jardin du Luxembourg on foot");
    let pantheon = s.search(Google, "Panthéon");
    let lux = s.search(Google, "Jardin du Luxembourg");
    let routes = s.routes(Google, &[&pantheon, &lux], TravelMode::Walk, true);
    s.ask_routes(&routes);
    out.push(s.finish());

    // Sacré-Cœur details and nearby restaurants (Google).
    let mut s = Session::new(wb, "ctx-14-sacre-coeur", "Sacré-Cœur and restaurants nearby");
    let hit = s.search(Google, "Sacré-Cœur Basilica");
    let sc = s.details(Google, &hit);
    let (places, _) = s.nearby(Google, &sc, "restaurant", 10, &[]);
    s.ask_rating(&sc);
    s.ask_rated_at_least("restaurants", &places, 4.3);
    out.push(s.finish());

    // Bicycle (TomTom).
    let mut s = Session::new(wb, "ctx-15-invalides-orsay-bike", "Les Invalides to the Musée d'Orsay by bicycle");
    let inv = s.search(TomTom, "Les Invalides");
    let orsay = s.search(TomTom, "Musée d'Orsay");
    let routes = s.routes(TomTom, &[&inv, &orsay], TravelMode::Bicycle, false);
    s.ask_routes(&routes);
    out.push(s.finish());

    // Cafes along a drive (Google).
    let mut s = Session::new(wb, "ctx-16-concorde-notre-dame-cafes", "Cafes between Concorde and Notre-Dame");
    let concorde = s.search(Google, "Place de la Concorde");
    let nd = s.search(Google, "Notre-Dame de Paris");
    let routes = s.routes(Google, &[&concorde, &nd], TravelMode::Drive, false);
    let along = s.along(Google, &routes[0], "cafe", 10);
    s.ask_first("Which cafe comes first along the route?".into(), &along, "ordering");
    s.ask_count_rated("cafes", &along, 4.0);
    out.push(s.finish());

    // Sainte-Chapelle details (OpenStreetMap).
    let mut s = Session::new(wb, "ctx-17-sainte-chapelle-osm", "Sainte-Chapelle on OpenStreetMap");
    let hit = s.search(Osm, "Sainte-Chapelle");
    let sc = s.details(Osm, &hit);
    s.ask_address(&sc);
    s.ask_wheelchair(&sc);
    out.push(s.finish());

    // Well rated restaurants near the opera (Google, client-side filter).
    let mut s = Session::new(wb, "ctx-18-opera-top-restaurants", "Restaurants rated 4.5+ near Palais Garnier");
    let opera = s.search(Google, "Palais Garnier");
    let (places, distances) = s.nearby(Google, &opera, "restaurant", 20, &[("min_rating", serde_json::json!(4.5))]);
    assert!(places.iter().all(|p| p.rating.is_some_and(|r| r >= 4.5)));
    s.ask_distance(&opera, &places, &distances);
    s.ask_rating(&places[0]);
    out.push(s.finish());

    // Bicycle alternatives (OpenStreetMap).
    let mut s = Session::new(wb, "ctx-19-luxembourg-pantheon-osm-bike", "Jardin du Luxembourg to the Panthéon by bicycle (OpenStreetMap)");
    let lux = s.search(Osm, "Jardin du Luxembourg");
    let pantheon = s.search(Osm, "Panthéon");
    let routes = s.routes(Osm, &[&lux, &pantheon], TravelMode::Bicycle, true);
    s.ask_routes(&routes);
    out.push(s.finish());

    // Walk and cafes along it (TomTom).
    let mut s = Session::new(wb, "ctx-20-eiffel-arc-walk", "Eiffel Tower to the Arc de Triomphe on foot");
    let eiffel = s.search(TomTom, "Eiffel Tower");
    let arc = s.search(TomTom, "Arc de Triomphe");
    let routes = s.routes(TomTom, &[&eiffel, &arc], TravelMode::Walk, false);
    let along = s.along(TomTom, &routes[0], "cafe", 10);
    s.ask_routes(&routes);
    s.ask_first("Which cafe comes first along the route?".into(), &along, "ordering");
    out.push(s.finish());

    // Notre-Dame details and cafes (Google).
    let mut s = Session::new(wb, "ctx-21-notre-dame-google", "Notre-Dame de Paris and cafes nearby");
    let hit = s.search(Google, "Notre-Dame de Paris");
    let nd = s.details(Google, &hit);
    let (places, distances) = s.nearby(Google, &nd, "cafe", 10, &[]);
    s.ask_wheelchair(&nd);
    s.ask_distance(&nd, &places, &distances);
    out.push(s.finish());

    // Drive (OpenStreetMap).
    let mut s = Session::new(wb, "ctx-22-pompidou-louvre-osm", "Centre Pompidou to the Louvre by car (OpenStreetMap)");
    let pompidou = s.search(Osm, "Centre Pompidou");
    let louvre = s.search(Osm, "Louvre Museum");
    let routes = s.routes(Osm, &[&pompidou, &louvre], TravelMode::Drive, false);
    s.ask_routes(&routes);
    out.push(s.finish());

    // Les Invalides details and restaurants (TomTom).
    let mut s = Session::new(wb, "ctx-23-invalides-tomtom", "Les Invalides and restaurants nearby");
    let hit = s.search(TomTom, "Les Invalides");
    let inv = s.details(TomTom, &hit);
    let (places, distances) = s.nearby(TomTom, &inv, "restaurant", 15, &[]);
    s.ask_first(format!("Which restaurant is closest to @{}?", inv.display_name), &places, "distance");
    s.ask_distance(&inv, &places, &distances);
    out.push(s.finish());

    // The restaurant closest to the Eiffel Tower, in detail (Google).
    let mut s = Session::new(wb, "ctx-24-eiffel-closest-restaurant", "The restaurant closest to the Eiffel Tower");
    let eiffel = s.search(Google, "Eiffel Tower");
    let (places, _) = s.nearby(Google, &eiffel, "restaurant", 20, &[]);
    let closest = s.details(Google, &places[0]);
    s.ask_rating(&closest);
    s.ask_price(&closest);
    s.ask_open_on(&closest, "Sunday");
    s.ask_wheelchair(&closest);
    out.push(s.finish());

    out
}

fn write_json(path: &Path, value: &impl serde::Serialize) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let mut text = geoqa_core::canonical::to_string_pretty(value);
    text.push('\n');
    std::fs::write(path, text).unwrap();
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let recorded = root.join("recorded");
    if recorded.exists() {
        std::fs::remove_dir_all(&recorded).unwrap();
    }

    let registry = Arc::new(Registry::with_defaults());
    let credentials = Credentials::new([
        ("GOOGLE_MAPS_API_KEY", "generator-google-key"),
        ("TOMTOM_API_KEY", "generator-tomtom-key"),
        ("GRAPHHOPPER_API_KEY", "generator-graphhopper-key"),
    ]);
    let config = GatewayConfig {
        mode: GatewayMode::Record,
        rate_limit_per_sec: 0.0,
        ..GatewayConfig::default()
    };
    let transport = Arc::new(WorldTransport { world: World::generate(SEED) });
    let gateway = Gateway::new(config, credentials, transport).expect("gateway");
    let cache = Arc::new(ResponseCache::in_memory(registry.clone()));
    let wb = Workbench::new(registry.clone(), cache.clone(), Arc::new(gateway));

    let sessions = scenarios(&wb);

    // Recording timestamps follow first use, one minute apart.
    let base = Utc.with_ymd_and_hms(2025, 1, 15, 9, 0, 0).unwrap();
    let mut order: BTreeMap<String, usize> = BTreeMap::new();
    for (_, ctx) in &sessions {
        for entry in ctx.entries() {
            let next = order.len();
            order.entry(entry.cache_key.as_str().to_string()).or_insert(next);
        }
    }
    for entry in cache.entries().expect("cache entries") {
        let mut fixture = entry.to_fixture();
        fixture.recorded_at = base + Duration::minutes(order[entry.key.as_str()] as i64);
        fixture.write(&recorded).expect("write fixture");
    }

    let file = ScenarioFile {
        scenarios: sessions.iter().map(|(s, _)| s.clone()).collect(),
    };
    write_json(&root.join("scenarios.json"), &file);

    // Replay from disk alone and freeze the export.
    let fixtures = FixtureSet::load_dir(&recorded).expect("load fixtures");
    let replay = Workbench::new(
        registry.clone(),
        Arc::new(ResponseCache::in_memory(registry.clone())),
        Arc::new(Gateway::replay_only(fixtures)),
    );
    let dataset = build_dataset(&replay, &file.scenarios).expect("replay");
    let bytes = export_json(&dataset).expect("export");
    std::fs::create_dir_all(root.join("golden")).unwrap();
    std::fs::write(root.join("golden/dataset.json"), &bytes).unwrap();

    let mut reductions = Vec::new();
    for c in &dataset.contexts {
        let s = render_structured(&c.context).chars().count() as f64;
        let f = render_formatted(&c.context).chars().count() as f64;
        reductions.push((s - f) / s * 100.0);
    }
    let mean = reductions.iter().sum::<f64>() / reductions.len() as f64;
    println!(
        "{} fixtures, {} contexts, {} QA pairs, mean reduction {mean:.2}%, export {} bytes",
        order.len(),
        dataset.contexts.len(),
        dataset.qa_pairs.len(),
        bytes.len()
    );
}
