#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use geoqa_core::adapters::Registry;
use geoqa_core::cache::ResponseCache;
use geoqa_core::fixture::FixtureSet;
use geoqa_core::gateway::Gateway;
use geoqa_core::pipeline::Workbench;
use geoqa_core::scenario::{Scenario, ScenarioFile};
use geoqa_core::LatLng;

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn fixture_dir() -> PathBuf {
    workspace_root().join("fixtures/recorded")
}

pub fn golden_path() -> PathBuf {
    workspace_root().join("fixtures/golden/dataset.json")
}

pub fn scenarios() -> Vec<Scenario> {
    ScenarioFile::load(&workspace_root().join("fixtures/scenarios.json"))
        .expect("scenario file")
        .scenarios
}

pub fn fixtures() -> FixtureSet {
    FixtureSet::load_dir(&fixture_dir()).expect("recorded fixtures")
}

/// Replay-only gateway over the recorded corpus and an in-memory cache.
pub fn replay_workbench() -> Workbench {
    let registry = Arc::new(Registry::with_defaults());
    Workbench::new(
        registry.clone(),
        Arc::new(ResponseCache::in_memory(registry)),
        Arc::new(Gateway::replay_only(fixtures())),
    )
}

/// Great-circle distance in meters on a sphere of radius 6,371,000 m,
/// written out here independently of the library.
pub fn oracle_haversine(a: LatLng, b: LatLng) -> f64 {
    let r = 6_371_000.0_f64;
    let (p1, p2) = (a.latitude().to_radians(), b.latitude().to_radians());
    let dp = p2 - p1;
    let dl = (b.longitude() - a.longitude()).to_radians();
    let x = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * r * x.sqrt().atan2((1.0 - x).sqrt())
}

/// Every regular file below `dir`.
pub fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(entries) = std::fs::read_dir(&d) else { continue };
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    out
}

pub fn contains_bytes(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

pub const SENTINEL: &str = "sk-SENTINEL-7f3a9c1e55d04b2a";

/// Serves recorded bodies to record-mode gateways. Every JSON object body
/// echoes the credential it was called with, as misbehaving providers do.
pub struct EchoingTransport {
    pub fixtures: Vec<geoqa_core::fixture::Fixture>,
    pub calls: std::sync::atomic::AtomicU64,
    pub sentinel_seen: std::sync::atomic::AtomicU64,
    /// Status to answer with instead of the recorded one.
    pub status_override: Option<u16>,
}

impl EchoingTransport {
    pub fn new(status_override: Option<u16>) -> Self {
        let set = fixtures();
        EchoingTransport {
            fixtures: set.iter().map(|(_, f)| f.clone()).collect(),
            calls: Default::default(),
            sentinel_seen: Default::default(),
            status_override,
        }
    }

    fn matches(f: &geoqa_core::fixture::Fixture, r: &geoqa_core::gateway::ResolvedRequest) -> bool {
        let t = &f.request_template;
        t.url == r.url
            && t.method == r.method
            && t.body == r.body
            && t.query_params.len() == r.query_params.len()
            && t.query_params.iter().all(|(k, v)| match geoqa_core::adapters::placeholder_name(v) {
                Some(_) => r.query_params.contains_key(k),
                None => r.query_params.get(k) == Some(v),
            })
    }
}

impl geoqa_core::gateway::Transport for EchoingTransport {
    fn send(
        &self,
        r: &geoqa_core::gateway::ResolvedRequest,
        _: std::time::Duration,
    ) -> Result<geoqa_core::gateway::HttpReply, geoqa_core::gateway::TransportError> {
        use std::sync::atomic::Ordering;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let secrets: Vec<&String> = r.query_params.values().filter(|v| v.as_str() == SENTINEL).collect();
        if !secrets.is_empty() {
            self.sentinel_seen.fetch_add(1, Ordering::SeqCst);
        }
        let fixture = self
            .fixtures
            .iter()
            .find(|f| Self::matches(f, r))
            .ok_or_else(|| geoqa_core::gateway::TransportError(format!("no recording for {}", r.url)))?;
        let mut body: serde_json::Value = serde_json::from_slice(&fixture.raw_response().unwrap()).unwrap();
        if let serde_json::Value::Object(map) = &mut body {
            let echo: Vec<String> = r.query_params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            map.insert("requestEcho".into(), serde_json::Value::String(echo.join("&")));
        }
        let status = self.status_override.unwrap_or(fixture.status);
        Ok(geoqa_core::gateway::HttpReply {
            status,
            body: serde_json::to_vec(&body).unwrap(),
        })
    }
}
