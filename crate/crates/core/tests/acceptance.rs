//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Oracle values are fixed literals computed by hand.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::Ordering;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use geoqa_core::adapters::{
    convert_request, normalize_route_request, AdapterError, HttpMethod, NormalizedResponse, Registry, UnifiedQuery,
};
use geoqa_core::cache::ResponseCache;
use geoqa_core::context::{context_stats, render_structured, ContextStats};
use geoqa_core::dataset::{export_json, import_json, DatasetDocument, DatasetError};
use geoqa_core::fixture::FixtureSet;
use geoqa_core::gateway::{
    Credentials, Gateway, GatewayConfig, GatewayError, GatewayMode, HttpReply, ResolvedRequest, Transport,
    TransportError,
};
use geoqa_core::pipeline::{PipelineError, Workbench};
use geoqa_core::polyline::{decode_polyline, encode_polyline};
use geoqa_core::qa::Gold;
use geoqa_core::scenario::build_dataset;
use geoqa_core::{LatLng, ProviderId, ToolKind, TravelMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(detail.into())
    }
}

struct Run {
    failed: Vec<&'static str>,
    total: usize,
}

impl Run {
    fn check(&mut self, id: &'static str, f: impl FnOnce() -> Outcome) {
        self.total += 1;
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {id}: {detail}"),
            Err(detail) => {
                println!("FAIL {id}: {detail}");
                self.failed.push(id);
            }
        }
    }
}

/// Captures every log record so it can be scanned for secrets.
struct CaptureLog(Mutex<Vec<String>>);

impl log::Log for CaptureLog {
    fn enabled(&self, _: &log::Metadata) -> bool {
        true
    }

    fn log(&self, record: &log::Record) {
        self.0
            .lock()
            .unwrap()
            .push(format!("{} {} {}", record.level(), record.target(), record.args()));
    }

    fn flush(&self) {}
}

static LOGS: CaptureLog = CaptureLog(Mutex::new(Vec::new()));

// ---------------------------------------------------------------- polyline

const REFERENCE_LINE: &str = "_p~iF~ps|U_ulLnnqC_mqNvxq`@";
const REFERENCE_POINTS: [(f64, f64); 3] = [(38.5, -120.2), (40.7, -120.95), (43.252, -126.453)];

fn polyline_reference() -> Outcome {
    let points = decode_polyline(REFERENCE_LINE, 5).map_err(|e| e.to_string())?;
    ensure(points.len() == 3, format!("{} points", points.len()))?;
    for (p, (lat, lng)) in points.iter().zip(REFERENCE_POINTS) {
        ensure(
            (p.latitude() - lat).abs() < 1e-9 && (p.longitude() - lng).abs() < 1e-9,
            format!("got {p}, want {lat},{lng}"),
        )?;
    }
    let back = encode_polyline(&points, 5).map_err(|e| e.to_string())?;
    ensure(back == REFERENCE_LINE, format!("re-encoded as {back}"))?;
    Ok("decodes to (38.5,-120.2) (40.7,-120.95) (43.252,-126.453) and re-encodes".into())
}

fn random_points(rng: &mut ChaCha8Rng) -> Vec<LatLng> {
    let n = rng.gen_range(0..40);
    (0..n)
        .map(|_| LatLng::new(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0)).unwrap())
        .collect()
}

fn polyline_roundtrip(precision: u8, bound: f64, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for case in 0..10_000 {
        let points = random_points(&mut rng);
        let line = encode_polyline(&points, precision).map_err(|e| format!("case {case}: {e}"))?;
        let back = decode_polyline(&line, precision).map_err(|e| format!("case {case}: {e}"))?;
        ensure(back.len() == points.len(), format!("case {case}: length changed"))?;
        for (a, b) in points.iter().zip(&back) {
            worst = worst
                .max((a.latitude() - b.latitude()).abs())
                .max((a.longitude() - b.longitude()).abs());
        }
    }
    // 1e-12 absorbs binary floating point representation of the decimal grid.
    ensure(worst <= bound + 1e-12, format!("max error {worst:e} exceeds {bound:e}"))?;
    Ok(format!("10000 random lists, max error {worst:.3e} <= {bound:e}"))
}

fn polyline_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF022);
    let mut errors = 0;
    for case in 0..10_000 {
        let len = rng.gen_range(0..64);
        let bytes: Vec<u8> = (0..len)
            .map(|_| if rng.gen_bool(0.9) { rng.gen_range(63..127) } else { rng.gen() })
            .collect();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let precision = rng.gen_range(0..=12);
        let result = catch_unwind(|| decode_polyline(&text, precision));
        match result {
            Ok(Ok(_)) => {}
            Ok(Err(_)) => errors += 1,
            Err(_) => return Err(format!("case {case} panicked on {text:?} at precision {precision}")),
        }
    }
    Ok(format!("10000 random inputs, no panic ({errors} rejected with typed errors)"))
}

// --------------------------------------------------------------- reduction

fn reduction_arithmetic() -> Outcome {
    let stats = ContextStats::from_counts(17534, 2536).map_err(|e| e.to_string())?;
    // (17534 - 2536) / 17534 = 0.855366...
    ensure((stats.reduction_pct - 85.54).abs() <= 0.01, format!("{}", stats.reduction_pct))?;
    Ok(format!("17534 -> 2536 chars is {:.2}%", stats.reduction_pct))
}

fn golden() -> DatasetDocument {
    import_json(&std::fs::read(golden_path()).unwrap()).unwrap()
}

fn reduction_corpus(doc: &DatasetDocument) -> Outcome {
    ensure(doc.contexts.len() >= 20, format!("only {} contexts", doc.contexts.len()))?;
    let mut sum = 0.0;
    let mut min = f64::MAX;
    for c in &doc.contexts {
        let structured = render_structured(&c.context).chars().count() as u64;
        let formatted = c.formatted.chars().count() as u64;
        ensure(formatted < structured, format!("{}: formatted {formatted} >= structured {structured}", c.context.id()))?;
        let stats = context_stats(&c.context).map_err(|e| e.to_string())?;
        ensure(stats.formatted_chars == formatted, format!("{}: frozen rendering drifted", c.context.id()))?;
        sum += stats.reduction_pct;
        min = min.min(stats.reduction_pct);
    }
    let mean = sum / doc.contexts.len() as f64;
    ensure(mean >= 60.0, format!("mean reduction {mean:.2}%"))?;
    Ok(format!("{} contexts, all formatted < structured, mean {mean:.2}% (min {min:.2}%)", doc.contexts.len()))
}

// --------------------------------------------------------- reproducibility

fn replay_export() -> Result<Vec<u8>, String> {
    let wb = replay_workbench();
    let dataset = build_dataset(&wb, &scenarios()).map_err(|e| e.to_string())?;
    ensure(wb.gateway.network_calls() == 0, "replay touched the network")?;
    export_json(&dataset).map_err(|e| e.to_string())
}

fn reproducibility() -> Outcome {
    let tools: BTreeSet<ToolKind> = scenarios().iter().flat_map(|s| s.steps.iter().map(|st| st.query.tool)).collect();
    ensure(tools.len() == ToolKind::ALL.len(), format!("corpus covers only {tools:?}"))?;
    let first = replay_export()?;
    let second = replay_export()?;
    ensure(first == second, "two replay runs differ")?;
    let frozen = std::fs::read(golden_path()).map_err(|e| e.to_string())?;
    ensure(first == frozen, "replay differs from the frozen export")?;
    Ok(format!("two replay-only runs over all five tools give identical {} byte exports", first.len()))
}

// ---------------------------------------------------------- cache discipline

struct RefuseNetwork(std::sync::atomic::AtomicU64);

impl Transport for RefuseNetwork {
    fn send(&self, _: &ResolvedRequest, _: Duration) -> Result<HttpReply, TransportError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Err(TransportError("network refused in warm-cache run".into()))
    }
}

fn warm_cache_zero_network() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("cache.redb");
    let registry = Arc::new(Registry::with_defaults());
    let steps: usize = scenarios().iter().map(|s| s.steps.len()).sum();
    {
        let cache = Arc::new(ResponseCache::open(&path, registry.clone()).map_err(|e| e.to_string())?);
        let wb = Workbench::new(registry.clone(), cache, Arc::new(Gateway::replay_only(fixtures())));
        build_dataset(&wb, &scenarios()).map_err(|e| e.to_string())?;
    }
    let cache = Arc::new(ResponseCache::open(&path, registry.clone()).map_err(|e| e.to_string())?);
    let transport = Arc::new(RefuseNetwork(Default::default()));
    let config = GatewayConfig {
        mode: GatewayMode::Live,
        rate_limit_per_sec: 0.0,
        retries: 0,
        ..GatewayConfig::default()
    };
    let gateway = Gateway::new(config, Credentials::default(), transport.clone()).map_err(|e| e.to_string())?;
    let wb = Workbench::new(registry, cache.clone(), Arc::new(gateway));
    let dataset = build_dataset(&wb, &scenarios()).map_err(|e| e.to_string())?;
    let calls = wb.gateway.network_calls() + transport.0.load(Ordering::SeqCst);
    ensure(calls == 0, format!("{calls} network calls"))?;
    let stats = cache.stats().map_err(|e| e.to_string())?;
    ensure(stats.hits == steps as u64 && stats.misses == 0, format!("{stats:?}"))?;
    let bytes = export_json(&dataset).map_err(|e| e.to_string())?;
    ensure(bytes == std::fs::read(golden_path()).unwrap(), "warm rerun changed the export")?;
    Ok(format!("live-mode rerun on reopened store: {steps} hits, 0 misses, 0 network calls"))
}

fn cache_export_reimport() -> Outcome {
    let registry = Arc::new(Registry::with_defaults());
    let cache = Arc::new(ResponseCache::in_memory(registry.clone()));
    let wb = Workbench::new(registry.clone(), cache.clone(), Arc::new(Gateway::replay_only(fixtures())));
    build_dataset(&wb, &scenarios()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let written = cache.export_fixtures(dir.path()).map_err(|e| e.to_string())?;
    let restored = ResponseCache::in_memory(registry);
    let read = restored.import_fixtures(dir.path()).map_err(|e| e.to_string())?;
    let before = cache.entries().map_err(|e| e.to_string())?;
    let after = restored.entries().map_err(|e| e.to_string())?;
    ensure(written == read && before == after, format!("{written} written, {read} read, equal={}", before == after))?;
    Ok(format!("{written} entries exported and re-imported with identical keys, exchanges and payloads"))
}

fn sentinel_grep() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let registry = Arc::new(Registry::with_defaults());
    let credentials = Credentials::new(geoqa_core::gateway::KNOWN_CREDENTIALS.iter().map(|n| (*n, SENTINEL)));
    let config = GatewayConfig {
        mode: GatewayMode::Record,
        rate_limit_per_sec: 0.0,
        fixture_dir: Some(root.join("recorded")),
        ..GatewayConfig::default()
    };
    let transport = Arc::new(EchoingTransport::new(None));
    let gateway = Gateway::new(config.clone(), credentials.clone(), transport.clone()).map_err(|e| e.to_string())?;
    let cache = Arc::new(ResponseCache::open(&root.join("cache.redb"), registry.clone()).map_err(|e| e.to_string())?);
    let wb = Workbench::new(registry.clone(), cache.clone(), Arc::new(gateway));
    let dataset = build_dataset(&wb, &scenarios()).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(root.join("export")).unwrap();
    std::fs::write(root.join("export/dataset.json"), export_json(&dataset).map_err(|e| e.to_string())?).unwrap();
    cache.export_fixtures(&root.join("cache-export")).map_err(|e| e.to_string())?;

    // A provider rejecting the key and echoing it back.
    let failing = Gateway::new(
        GatewayConfig { fixture_dir: None, ..config },
        credentials,
        Arc::new(EchoingTransport::new(Some(403))),
    )
    .map_err(|e| e.to_string())?;
    let wb = Workbench::new(registry.clone(), Arc::new(ResponseCache::in_memory(registry)), Arc::new(failing));
    let err = wb
        .run_tool(ProviderId::TomTom, &UnifiedQuery::new(ToolKind::TextSearch).with("query", "Louvre Museum"))
        .expect_err("403 must surface");
    let body = match &err {
        PipelineError::Gateway(GatewayError::ProviderError { status: 403, body }) => String::from_utf8_lossy(body).into_owned(),
        other => return Err(format!("expected a 403 ProviderError, got {other}")),
    };
    std::fs::create_dir_all(root.join("logs")).unwrap();
    std::fs::write(root.join("logs/errors.txt"), format!("{err}\n{err:?}\n{body}\n")).unwrap();
    drop(cache);
    std::fs::write(root.join("logs/captured.log"), LOGS.0.lock().unwrap().join("\n")).unwrap();

    let seen = transport.sentinel_seen.load(Ordering::SeqCst);
    ensure(seen > 0, "the sentinel never reached the transport")?;
    let mut scanned = files_under(root);
    scanned.extend(files_under(&workspace_root().join("fixtures")));
    let hits: Vec<String> = scanned
        .iter()
        .filter(|p| contains_bytes(&std::fs::read(p).unwrap_or_default(), SENTINEL.as_bytes()))
        .map(|p| p.display().to_string())
        .collect();
    ensure(hits.is_empty(), format!("sentinel found in {hits:?}"))?;
    ensure(body.contains("[REDACTED]"), "echoed key was not redacted in the error body")?;
    Ok(format!(
        "{seen} requests carried the sentinel; 0 hits across {} files (cache, recordings, exports, logs, corpus)",
        scanned.len()
    ))
}

// ------------------------------------------------------ adapter conformance

fn tomtom_template() -> Outcome {
    let registry = Registry::with_defaults();
    let adapter = registry.lookup(ProviderId::TomTom, ToolKind::TextSearch).map_err(|e| e.to_string())?;
    let q = UnifiedQuery::new(ToolKind::TextSearch).with("query", "Louvre Museum");
    let t = convert_request(adapter.as_ref(), &q).map_err(|e| e.to_string())?;
    ensure(t.url == "https://api.tomtom.com/search/2/poiSearch/Louvre%20Museum.json", t.url.clone())?;
    ensure(t.method == HttpMethod::Get, "not GET")?;
    ensure(t.query_params.get("key").map(String::as_str) == Some("key:TOMTOM_API_KEY"), "key placeholder")?;
    ensure(t.query_params.get("limit").map(String::as_str) == Some("5"), "limit")?;
    ensure(t.query_params.get("language").map(String::as_str) == Some("en-US"), "language")?;
    let odd = UnifiedQuery::new(ToolKind::TextSearch).with("query", "Café & Bar/5");
    let t2 = convert_request(adapter.as_ref(), &odd).map_err(|e| e.to_string())?;
    ensure(t2.url.ends_with("/poiSearch/Caf%C3%A9%20%26%20Bar%2F5.json"), t2.url.clone())?;
    Ok("poiSearch URL, key:TOMTOM_API_KEY, limit=5, language=en-US, percent-encoded query".into())
}

/// The JSON type skeleton of a value: keys and leaf types, no values.
fn shape(v: &Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.iter().map(|(k, v)| (k.clone(), shape(v))).collect()),
        Value::Array(items) => {
            let shapes: BTreeSet<String> = items.iter().map(|i| shape(i).to_string()).collect();
            Value::Array(shapes.into_iter().map(Value::String).collect())
        }
        Value::String(_) => "string".into(),
        Value::Number(_) => "number".into(),
        Value::Bool(_) => "bool".into(),
        Value::Null => "null".into(),
    }
}

fn strip_provider(n: &NormalizedResponse) -> Value {
    let mut v = serde_json::to_value(n).unwrap();
    for p in v["places"].as_array_mut().unwrap() {
        p.as_object_mut().unwrap().remove("provider");
    }
    v
}

fn schema_identical() -> Outcome {
    let wb = replay_workbench();
    let q = UnifiedQuery::new(ToolKind::TextSearch).with("query", "Louvre Museum");
    let g = wb.run_tool(ProviderId::Google, &q).map_err(|e| e.to_string())?.draft.normalized().clone();
    let t = wb.run_tool(ProviderId::TomTom, &q).map_err(|e| e.to_string())?.draft.normalized().clone();
    ensure(!g.places.is_empty() && g.places.len() == t.places.len(), "result counts differ")?;
    ensure(shape(&strip_provider(&g)) == shape(&strip_provider(&t)), "normalized shapes differ")?;
    let names = |n: &NormalizedResponse| n.places.iter().map(|p| p.display_name.clone()).collect::<Vec<_>>();
    ensure(names(&g) == names(&t), "result names differ")?;
    Ok(format!("{} places each, same fields and types", g.places.len()))
}

fn unsupported_pair() -> Outcome {
    let registry = Registry::with_defaults();
    match registry.lookup(ProviderId::OpenStreetMap, ToolKind::NearbySearch) {
        Err(e @ AdapterError::UnsupportedPair { .. }) => Ok(format!("{} ({})", e.code(), e)),
        Err(other) => Err(format!("wrong error {other}")),
        Ok(_) => Err("an adapter was returned".into()),
    }
}

// ----------------------------------------------------------------- temporal

fn traffic_scan() -> Outcome {
    let registry = Registry::with_defaults();
    let mut checked = 0;
    let mut scan = |provider: ProviderId, query: &UnifiedQuery, template: Option<&geoqa_core::adapters::RequestTemplate>| -> Result<(), String> {
        if !query.tool.is_routing() {
            return Ok(());
        }
        let adapter = registry.lookup(provider, query.tool).map_err(|e| e.to_string())?;
        let mode = query.travel_mode().map_err(|e| e.to_string())?;
        ensure(mode != TravelMode::Transit, format!("TRANSIT in {provider} {}", query.tool))?;
        ensure(
            query.get("traffic_awareness").and_then(Value::as_str) == Some("TRAFFIC_UNAWARE"),
            format!("{provider} {} query is not pinned", query.tool),
        )?;
        let owned;
        let template = match template {
            Some(t) => t,
            None => {
                owned = convert_request(adapter.as_ref(), query).map_err(|e| e.to_string())?;
                &owned
            }
        };
        ensure(adapter.is_traffic_unaware(template), format!("{provider} {} template is traffic aware", query.tool))?;
        checked += 1;
        Ok(())
    };
    for s in scenarios() {
        for step in &s.steps {
            if step.query.tool.is_routing() {
                let q = normalize_route_request(&step.query).map_err(|e| e.to_string())?;
                scan(step.provider, &q, None)?;
            }
        }
    }
    for (_, f) in FixtureSet::load_dir(&fixture_dir()).map_err(|e| e.to_string())?.iter() {
        scan(f.provider, &f.unified_query, Some(&f.request_template))?;
    }
    for c in &golden().contexts {
        for e in c.context.entries() {
            scan(e.provider, &e.unified_query, Some(&e.raw.request_template))?;
        }
    }
    let transit = UnifiedQuery::new(ToolKind::ComputeRoutes).with("travel_mode", "TRANSIT");
    ensure(normalize_route_request(&transit).is_err(), "TRANSIT accepted")?;
    Ok(format!("{checked} routing templates across scenarios, recordings and export: all TRAFFIC_UNAWARE, none TRANSIT"))
}

// ------------------------------------------------------------------ dataset

fn dataset_roundtrip() -> Outcome {
    let frozen = std::fs::read(golden_path()).map_err(|e| e.to_string())?;
    let doc = import_json(&frozen).map_err(|e| e.to_string())?;
    ensure(export_json(&doc).map_err(|e| e.to_string())? == frozen, "re-export differs")?;
    let wb = replay_workbench();
    let mut checked = 1;
    for s in scenarios() {
        let d = build_dataset(&wb, std::slice::from_ref(&s)).map_err(|e| e.to_string())?;
        let back = import_json(&export_json(&d).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure(back == d, format!("{} does not round-trip", s.id))?;
        checked += 1;
    }
    let empty = DatasetDocument::empty();
    ensure(import_json(&export_json(&empty).unwrap()).unwrap() == empty, "empty dataset")?;
    Ok(format!("import(export(d)) == d for {checked} datasets plus the empty one"))
}

fn expect_pointer(bytes: &[u8], want: &str) -> Result<(), String> {
    match import_json(bytes) {
        Err(DatasetError::SchemaViolation { pointer, .. }) if pointer == want => Ok(()),
        Err(other) => Err(format!("want SchemaViolation at {want}, got {other:?}")),
        Ok(_) => Err(format!("corruption at {want} was accepted")),
    }
}

fn dataset_corruption() -> Outcome {
    let frozen = std::fs::read(golden_path()).map_err(|e| e.to_string())?;
    let doc: Value = serde_json::from_slice(&frozen).unwrap();
    let mutate = |f: &dyn Fn(&mut Value)| {
        let mut v = doc.clone();
        f(&mut v);
        serde_json::to_vec(&v).unwrap()
    };
    expect_pointer(&frozen[..frozen.len() / 2], "")?;
    expect_pointer(&mutate(&|v| v["contexts"][3]["entries"][1]["raw"]["status"] = "200".into()), "/contexts/3/entries/1/raw/status")?;
    expect_pointer(&mutate(&|v| v["qa_pairs"][5]["format"] = "Essay".into()), "/qa_pairs/5/format")?;
    expect_pointer(
        &mutate(&|v| v["contexts"][0]["entries"][0]["normalized"]["places"][0]["location"]["latitude"] = 123.0.into()),
        "/contexts/0/entries/0/normalized/places/0/location/latitude",
    )?;
    expect_pointer(&mutate(&|v| v["contexts"][2]["entries"][0]["cache_key"] = "xyz".into()), "/contexts/2/entries/0/cache_key")?;
    expect_pointer(&mutate(&|v| v["qa_pairs"][0]["context_id"] = "ctx-missing".into()), "/qa_pairs/0/context_id")?;
    Ok("truncation, wrong type, bad enum, out-of-range latitude, bad key and dangling reference each fail at the exact pointer".into())
}

// -------------------------------------------------------------------- tasks

fn task_louvre_details(doc: &DatasetDocument) -> Outcome {
    let c = doc.context("ctx-01-louvre-details").ok_or("context missing")?;
    let details = c.context.entries().iter().find(|e| e.tool == ToolKind::PlaceDetails).ok_or("no details entry")?;
    let louvre = &details.normalized.places[0];
    ensure(louvre.display_name == "Louvre Museum", louvre.display_name.clone())?;
    ensure(louvre.rating.is_some() && louvre.opening_hours.is_some() && louvre.accessibility.is_some(), "facts missing")?;
    let qa: Vec<_> = doc.qa_pairs.iter().filter(|q| q.context_id == c.context.id()).collect();
    let rating = qa.iter().find(|q| q.categories.contains(&"rating".to_string())).ok_or("no rating question")?;
    ensure(rating.gold == Gold::Text("4.7".into()), format!("{:?}", rating.gold))?;
    ensure(c.formatted.contains("Rating: 4.7") && c.formatted.contains("Tuesday: Closed"), "facts not rendered")?;
    Ok(format!("Louvre details with rating, hours and accessibility; {} QA pairs", qa.len()))
}

fn task_nearby(doc: &DatasetDocument) -> Outcome {
    let c = doc.context("ctx-03-louvre-restaurants-tomtom").ok_or("context missing")?;
    let e = c.context.entries().iter().find(|e| e.tool == ToolKind::NearbySearch).ok_or("no nearby entry")?;
    let anchor = e.unified_query.require_waypoint("anchor").map_err(|e| e.to_string())?;
    let n = &e.normalized;
    ensure(n.places.len() == 20, format!("{} places", n.places.len()))?;
    let oracle: Vec<f64> = n.places.iter().map(|p| oracle_haversine(anchor.location, p.location)).collect();
    ensure(oracle.windows(2).all(|w| w[0] <= w[1]), "not sorted by great-circle distance")?;
    let mut worst = 0.0_f64;
    for (p, want) in n.places.iter().zip(&oracle) {
        let got = n.distance_of(&p.id).ok_or("missing distance")?.meters;
        worst = worst.max((got - want).abs());
    }
    ensure(worst < 0.01, format!("reported distances differ from the oracle by {worst} m"))?;
    let lines = c.formatted.lines().filter(|l| l.ends_with(" m)")).count();
    ensure(lines == 20, format!("{lines} ranked lines"))?;
    Ok(format!("20 restaurants, ascending, max |reported - oracle| = {worst:.2e} m"))
}

fn task_routes(doc: &DatasetDocument) -> Outcome {
    let c = doc.context("ctx-05-eiffel-louvre-routes").ok_or("context missing")?;
    let e = c.context.entries().iter().find(|e| e.tool == ToolKind::ComputeRoutes).ok_or("no routes entry")?;
    let routes = &e.normalized.routes;
    ensure(routes.len() == 2, format!("{} routes", routes.len()))?;
    let eiffel = LatLng::new(48.8584, 2.2945).unwrap();
    let louvre = LatLng::new(48.8606, 2.3376).unwrap();
    for r in routes {
        let pts = r.decoded_points().map_err(|e| e.to_string())?;
        let (a, b) = (pts[0], pts[pts.len() - 1]);
        ensure(oracle_haversine(a, eiffel) < 50.0 && oracle_haversine(b, louvre) < 50.0, "endpoints off")?;
        ensure(r.travel_mode == TravelMode::Drive, "mode")?;
    }
    Ok(format!(
        "2 routes Eiffel Tower -> Louvre: {} m and {} m",
        routes[0].distance_meters, routes[1].distance_meters
    ))
}

fn task_along_route(doc: &DatasetDocument) -> Outcome {
    let c = doc.context("ctx-06-eiffel-louvre-along-google").ok_or("context missing")?;
    let e = c.context.entries().iter().find(|e| e.tool == ToolKind::SearchAlongRoute).ok_or("no along-route entry")?;
    let route = e.unified_query.route().map_err(|e| e.to_string())?.decode().map_err(|e| e.to_string())?;
    let places = &e.normalized.places;
    ensure(places.len() == 20, format!("{} places", places.len()))?;
    let mut last = 0;
    for p in places {
        let (idx, d) = route
            .iter()
            .enumerate()
            .map(|(i, v)| (i, oracle_haversine(*v, p.location)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        ensure(idx >= last, format!("{} is out of route order", p.display_name))?;
        ensure(d <= 250.0, format!("{} is {d:.0} m off the route", p.display_name))?;
        last = idx;
    }
    Ok("20 restaurants, each near the route, in route order".into())
}

fn main() {
    log::set_logger(&LOGS).expect("logger");
    log::set_max_level(log::LevelFilter::Trace);
    let mut run = Run { failed: Vec::new(), total: 0 };

    let started = Instant::now();
    run.check("polyline-reference-decode", polyline_reference);
    run.check("polyline-roundtrip-precision-5", || polyline_roundtrip(5, 0.5e-5, 5));
    run.check("polyline-roundtrip-precision-6", || polyline_roundtrip(6, 0.5e-6, 6));
    run.check("polyline-fuzz-no-crash", polyline_fuzz);
    let elapsed = started.elapsed();
    run.check("polyline-suite-under-10s", || {
        ensure(elapsed < Duration::from_secs(10), format!("{elapsed:?}"))?;
        Ok(format!("{:.2} s", elapsed.as_secs_f64()))
    });

    let doc = golden();
    run.check("reduction-reference-arithmetic", reduction_arithmetic);
    run.check("reduction-corpus", || reduction_corpus(&doc));
    run.check("replay-byte-identical-exports", reproducibility);
    run.check("cache-warm-rerun-zero-network", warm_cache_zero_network);
    run.check("cache-export-reimport-lossless", cache_export_reimport);
    run.check("secrets-sentinel-grep", sentinel_grep);
    run.check("adapter-tomtom-text-search-template", tomtom_template);
    run.check("adapter-google-tomtom-schema-identical", schema_identical);
    run.check("adapter-osm-nearby-unsupported-pair", unsupported_pair);
    run.check("routing-traffic-unaware-no-transit", traffic_scan);
    run.check("dataset-roundtrip", dataset_roundtrip);
    run.check("dataset-corruption-pointer", dataset_corruption);
    run.check("task-louvre-details", || task_louvre_details(&doc));
    run.check("task-20-nearby-restaurants-by-distance", || task_nearby(&doc));
    run.check("task-two-routes-eiffel-louvre", || task_routes(&doc));
    run.check("task-20-restaurants-along-route", || task_along_route(&doc));

    println!("NOT REPRODUCIBLE annotation-speedup-30x: measured with timed human annotators; no artifact here can re-run it");
    println!("NOT REPRODUCIBLE llm-accuracy-66.33-vs-86.67: depends on the original human-authored question set and model runs");

    println!("{}/{} criteria passed", run.total - run.failed.len(), run.total);
    if !run.failed.is_empty() {
        eprintln!("failed: {}", run.failed.join(", "));
        std::process::exit(1);
    }
    let _ = Path::new(".");
}
