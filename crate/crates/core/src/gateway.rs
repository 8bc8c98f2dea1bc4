//! The only place secrets and the network meet. Templates arrive in
//! placeholder form; credentials are substituted into a [`ResolvedRequest`]
//! that never leaves this module, and everything returned or persisted keeps
//! the placeholder form.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::adapters::{placeholder_name, HttpMethod, RequestTemplate, UnifiedQuery};
use crate::cache::{canonical_key, CacheError, CacheKey};
use crate::fixture::{Fixture, FixtureError, FixtureSet};
use crate::model::{ProviderId, ToolKind};

/// Environment variables read at startup.
pub const KNOWN_CREDENTIALS: &[&str] = &["GOOGLE_MAPS_API_KEY", "TOMTOM_API_KEY", "GRAPHHOPPER_API_KEY"];

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("missing credential {0}")]
    MissingCredential(String),
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("provider returned HTTP {status}")]
    ProviderError { status: u16, body: Vec<u8> },
    #[error("no fixture recorded for request {0}")]
    ReplayMiss(CacheKey),
    #[error(transparent)]
    Key(#[from] CacheError),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::MissingCredential(_) => "MissingCredential",
            GatewayError::ProviderUnavailable(_) => "ProviderUnavailable",
            GatewayError::ProviderError { .. } => "ProviderError",
            GatewayError::ReplayMiss(_) => "ReplayMiss",
            GatewayError::Key(_) => "ResolvedTemplate",
            GatewayError::Fixture(_) => "FixtureError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GatewayMode {
    Live,
    Record,
    ReplayOnly,
}

impl FromStr for GatewayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(GatewayMode::Live),
            "record" => Ok(GatewayMode::Record),
            "replay-only" | "replay" => Ok(GatewayMode::ReplayOnly),
            other => Err(format!("unknown gateway mode '{other}' (live|record|replay-only)")),
        }
    }
}

impl fmt::Display for GatewayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatewayMode::Live => "live",
            GatewayMode::Record => "record",
            GatewayMode::ReplayOnly => "replay-only",
        })
    }
}

mod bytes_base64 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&BASE64.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        BASE64.decode(text).map_err(serde::de::Error::custom)
    }
}

/// One request/response pair. The request is kept in placeholder form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawExchange {
    pub request_template: RequestTemplate,
    pub status: u16,
    #[serde(with = "bytes_base64")]
    pub raw_response: Vec<u8>,
    pub latency_ms: u64,
    pub fetched_at: DateTime<Utc>,
}

/// Read-only map of credential name to secret. `Debug` never prints values.
#[derive(Clone, Default)]
pub struct Credentials {
    secrets: BTreeMap<String, String>,
}

impl fmt::Debug for Credentials {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.secrets.keys()).finish()
    }
}

impl Credentials {
    pub fn new<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Credentials {
            secrets: pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }

    /// Reads [`KNOWN_CREDENTIALS`] plus `extra` from the process environment.
    pub fn from_env(extra: &[String]) -> Self {
        let names = KNOWN_CREDENTIALS.iter().map(|s| s.to_string()).chain(extra.iter().cloned());
        Credentials {
            secrets: names
                .filter_map(|name| std::env::var(&name).ok().map(|v| (name, v)))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.secrets.get(name).map(String::as_str)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.secrets.keys().map(String::as_str)
    }

    /// Secret values, for hygiene checks in tests and audits.
    pub fn values(&self) -> impl Iterator<Item = &str> {
        self.secrets.values().map(String::as_str)
    }

    /// Replaces every occurrence of a known secret in `bytes` with
    /// `[REDACTED]`, so echoed keys never reach fixtures, caches or errors.
    pub fn redact(&self, bytes: &[u8]) -> Vec<u8> {
        let mut out = bytes.to_vec();
        for secret in self.values().filter(|s| !s.is_empty()) {
            let needle = secret.as_bytes();
            let mut scrubbed = Vec::with_capacity(out.len());
            let mut i = 0;
            while i < out.len() {
                if out[i..].starts_with(needle) {
                    scrubbed.extend_from_slice(b"[REDACTED]");
                    i += needle.len();
                } else {
                    scrubbed.push(out[i]);
                    i += 1;
                }
            }
            out = scrubbed;
        }
        out
    }
}

/// A template with every placeholder substituted. Not serializable and
/// redacted in `Debug`.
#[derive(Clone, PartialEq)]
pub struct ResolvedRequest {
    pub url: String,
    pub method: HttpMethod,
    pub query_params: BTreeMap<String, String>,
    pub body: Option<Value>,
}

impl fmt::Debug for ResolvedRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ResolvedRequest")
            .field("method", &self.method)
            .field("url", &self.url)
            .field("query_params", &format_args!("<{} redacted>", self.query_params.len()))
            .finish()
    }
}

/// Substitutes every `key:<ENV>` placeholder. All missing names are checked
/// before anything is built; the first one missing is reported.
pub fn inject_credentials(template: &RequestTemplate, credentials: &Credentials) -> Result<ResolvedRequest, GatewayError> {
    if let Some(missing) = template
        .placeholders()
        .into_iter()
        .find(|name| credentials.get(name).is_none())
    {
        return Err(GatewayError::MissingCredential(missing.to_string()));
    }
    let query_params = template
        .query_params
        .iter()
        .map(|(k, v)| {
            let value = match placeholder_name(v) {
                Some(name) => credentials.get(name).expect("checked above").to_string(),
                None => v.clone(),
            };
            (k.clone(), value)
        })
        .collect();
    Ok(ResolvedRequest {
        url: template.url.clone(),
        method: template.method,
        query_params,
        body: template.body.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: Vec<u8>,
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct TransportError(pub String);

pub trait Transport: Send + Sync {
    fn send(&self, request: &ResolvedRequest, timeout: Duration) -> Result<HttpReply, TransportError>;
}

/// Blocking HTTP client transport.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    origin: Option<reqwest::Url>,
}

impl HttpTransport {
    pub fn new() -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(concat!("geoqa/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpTransport { client, origin: None })
    }

    /// Sends every request to `origin` (scheme, host and port) instead of
    /// the provider host, keeping path and query. Used for local proxies
    /// and test doubles.
    pub fn with_origin(mut self, origin: &str) -> Result<Self, TransportError> {
        let url = reqwest::Url::parse(origin).map_err(|e| TransportError(format!("invalid origin: {e}")))?;
        self.origin = Some(url);
        Ok(self)
    }

    fn target(&self, url: &str) -> Result<reqwest::Url, TransportError> {
        let mut target = reqwest::Url::parse(url).map_err(|_| TransportError("invalid request URL".into()))?;
        if let Some(origin) = &self.origin {
            let mut rebased = origin.clone();
            rebased.set_path(target.path());
            rebased.set_query(target.query());
            target = rebased;
        }
        Ok(target)
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &ResolvedRequest, timeout: Duration) -> Result<HttpReply, TransportError> {
        let url = self.target(&request.url)?;
        let builder = match request.method {
            HttpMethod::Get => self.client.get(url),
            HttpMethod::Post => self.client.post(url),
        };
        let mut builder = builder.query(&request.query_params).timeout(timeout);
        if let Some(body) = &request.body {
            builder = builder
                .header("content-type", "application/json")
                .body(serde_json::to_vec(body).map_err(|e| TransportError(e.to_string()))?);
        }
        // reqwest errors may embed the URL (and thus resolved query params).
        let response = builder.send().map_err(|e| TransportError(redact(&e)))?;
        let status = response.status().as_u16();
        let body = response.bytes().map_err(|e| TransportError(redact(&e)))?.to_vec();
        Ok(HttpReply { status, body })
    }
}

fn redact(error: &reqwest::Error) -> String {
    let kind = if error.is_timeout() {
        "timeout"
    } else if error.is_connect() {
        "connection failed"
    } else {
        "transport error"
    };
    match error.url() {
        Some(url) => format!("{kind} ({})", url.host_str().unwrap_or("unknown host")),
        None => kind.to_string(),
    }
}

/// Per-provider spacing of live requests: at most `rate` requests per second,
/// no bursts beyond one.
pub struct RateLimiter {
    interval: Option<Duration>,
    next_slot: Mutex<HashMap<ProviderId, Instant>>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        let interval = (requests_per_second > 0.0 && requests_per_second.is_finite())
            .then(|| Duration::from_secs_f64(1.0 / requests_per_second));
        RateLimiter {
            interval,
            next_slot: Mutex::new(HashMap::new()),
        }
    }

    /// Returns how long the caller must wait before sending.
    pub fn reserve(&self, provider: ProviderId) -> Duration {
        let Some(interval) = self.interval else {
            return Duration::ZERO;
        };
        let now = Instant::now();
        let mut slots = self.next_slot.lock().expect("rate limiter lock");
        let slot = slots.entry(provider).or_insert(now);
        let start = (*slot).max(now);
        *slot = start + interval;
        start - now
    }

    pub fn acquire(&self, provider: ProviderId) {
        let wait = self.reserve(provider);
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub mode: GatewayMode,
    pub timeout_secs: f64,
    /// Retries after the first attempt, transport errors only.
    pub retries: u32,
    pub backoff_ms: u64,
    pub rate_limit_per_sec: f64,
    pub fixture_dir: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            mode: GatewayMode::ReplayOnly,
            timeout_secs: 15.0,
            retries: 2,
            backoff_ms: 250,
            rate_limit_per_sec: 1.0,
            fixture_dir: None,
        }
    }
}

/// What the gateway needs to run (and, in record mode, persist) one exchange.
pub struct ExchangeRequest<'a> {
    pub provider: ProviderId,
    pub query: &'a UnifiedQuery,
    pub template: &'a RequestTemplate,
}

impl ExchangeRequest<'_> {
    pub fn tool(&self) -> ToolKind {
        self.query.tool
    }

    pub fn key(&self) -> Result<CacheKey, CacheError> {
        canonical_key(self.template, self.provider, self.query.tool)
    }
}

pub struct Gateway {
    config: GatewayConfig,
    credentials: Credentials,
    transport: Arc<dyn Transport>,
    fixtures: RwLock<FixtureSet>,
    limiter: RateLimiter,
    network_calls: AtomicU64,
}

impl Gateway {
    pub fn new(config: GatewayConfig, credentials: Credentials, transport: Arc<dyn Transport>) -> Result<Self, GatewayError> {
        let fixtures = match &config.fixture_dir {
            Some(dir) if dir.exists() => FixtureSet::load_dir(dir)?,
            _ => FixtureSet::new(),
        };
        Ok(Gateway {
            limiter: RateLimiter::new(config.rate_limit_per_sec),
            config,
            credentials,
            transport,
            fixtures: RwLock::new(fixtures),
            network_calls: AtomicU64::new(0),
        })
    }

    /// A gateway that never touches the network.
    pub fn replay_only(fixtures: FixtureSet) -> Self {
        Gateway {
            limiter: RateLimiter::new(0.0),
            config: GatewayConfig::default(),
            credentials: Credentials::default(),
            transport: Arc::new(NoNetwork),
            fixtures: RwLock::new(fixtures),
            network_calls: AtomicU64::new(0),
        }
    }

    pub fn mode(&self) -> GatewayMode {
        self.config.mode
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// Transport attempts made so far (retries included).
    pub fn network_calls(&self) -> u64 {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn fixture_count(&self) -> usize {
        self.fixtures.read().expect("fixture lock").len()
    }

    pub fn add_fixture(&self, fixture: Fixture) -> Result<CacheKey, GatewayError> {
        Ok(self.fixtures.write().expect("fixture lock").insert(fixture)?)
    }

    fn replay(&self, key: &CacheKey) -> Result<RawExchange, GatewayError> {
        let fixtures = self.fixtures.read().expect("fixture lock");
        let fixture = fixtures
            .get(key)
            .ok_or_else(|| GatewayError::ReplayMiss(key.clone()))?;
        fixture.to_exchange().map_err(|e| {
            GatewayError::Fixture(FixtureError::Invalid {
                path: PathBuf::from(key.as_str()),
                detail: e.to_string(),
            })
        })
    }

    pub fn execute(&self, request: &ExchangeRequest<'_>) -> Result<RawExchange, GatewayError> {
        let key = request.key()?;
        let replay_url = request.template.url.starts_with(crate::adapters::REPLAY_SCHEME);
        if self.config.mode == GatewayMode::ReplayOnly || replay_url {
            return self.replay(&key);
        }
        let resolved = inject_credentials(request.template, &self.credentials)?;
        self.limiter.acquire(request.provider);
        let started = Instant::now();
        let reply = self.send_with_retries(&resolved)?;
        let exchange = RawExchange {
            request_template: request.template.clone(),
            status: reply.status,
            raw_response: self.credentials.redact(&reply.body),
            latency_ms: started.elapsed().as_millis() as u64,
            fetched_at: Utc::now(),
        };
        if exchange.status >= 400 {
            return Err(GatewayError::ProviderError {
                status: exchange.status,
                body: exchange.raw_response,
            });
        }
        if self.config.mode == GatewayMode::Record {
            let fixture = Fixture::from_exchange(request.provider, request.query, &exchange);
            if let Some(dir) = &self.config.fixture_dir {
                let path = fixture.write(dir)?;
                log::info!("recorded {}", path.display());
            }
            self.add_fixture(fixture)?;
        }
        Ok(exchange)
    }

    fn send_with_retries(&self, request: &ResolvedRequest) -> Result<HttpReply, GatewayError> {
        let timeout = Duration::from_secs_f64(self.config.timeout_secs.max(0.001));
        let mut attempt = 0;
        loop {
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            match self.transport.send(request, timeout) {
                Ok(reply) => return Ok(reply),
                Err(e) if attempt < self.config.retries => {
                    let backoff = self.config.backoff_ms.saturating_mul(1 << attempt.min(16));
                    log::warn!("transport error ({e}); retry {} in {backoff} ms", attempt + 1);
                    std::thread::sleep(Duration::from_millis(backoff));
                    attempt += 1;
                }
                Err(e) => return Err(GatewayError::ProviderUnavailable(e.0)),
            }
        }
    }
}

struct NoNetwork;

impl Transport for NoNetwork {
    fn send(&self, _: &ResolvedRequest, _: Duration) -> Result<HttpReply, TransportError> {
        Err(TransportError("network disabled".into()))
    }
}
