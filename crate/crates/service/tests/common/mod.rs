#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use geoqa_core::fixture::FixtureSet;

pub const SENTINEL: &str = "sk-SENTINEL-2b9e0d4c71aa4f08";

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn fixture_dir() -> PathBuf {
    workspace_root().join("fixtures/recorded")
}

pub fn fixtures() -> FixtureSet {
    FixtureSet::load_dir(&fixture_dir()).unwrap()
}

/// Tiny HTTP/1.1 server on 127.0.0.1 answering every request with
/// `respond(path_and_query) -> (status, body)`. Counts requests.
pub struct StubServer {
    pub origin: String,
    pub requests: Arc<AtomicU64>,
}

impl StubServer {
    pub fn start<F>(respond: F) -> StubServer
    where
        F: Fn(&str) -> (u16, Vec<u8>) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let origin = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(AtomicU64::new(0));
        let counter = requests.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    continue;
                }
                let mut content_length = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        content_length = v.trim().parse().unwrap_or(0);
                    }
                }
                let mut body = vec![0; content_length];
                let _ = reader.read_exact(&mut body);
                counter.fetch_add(1, Ordering::SeqCst);
                let target = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
                let (status, payload) = respond(&target);
                let head = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
                    payload.len()
                );
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(&payload);
            }
        });
        StubServer { origin, requests }
    }

    pub fn count(&self) -> u64 {
        self.requests.load(Ordering::SeqCst)
    }
}

/// Raw recorded body of the TomTom "Louvre Museum" text search.
pub fn tomtom_louvre_body() -> Vec<u8> {
    fixtures()
        .iter()
        .map(|(_, f)| f)
        .find(|f| f.request_template.url.ends_with("/poiSearch/Louvre%20Museum.json"))
        .expect("recorded TomTom Louvre search")
        .raw_response()
        .unwrap()
}

/// Every credential the gateway knows resolves to the sentinel.
pub fn set_sentinel_credentials() {
    for name in geoqa_core::gateway::KNOWN_CREDENTIALS {
        std::env::set_var(name, SENTINEL);
    }
}

pub fn contains(haystack: &[u8], needle: &str) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle.as_bytes())
}

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
    out
}
