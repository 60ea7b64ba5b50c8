use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Mutex, RwLock};
use std::time::{Duration, Instant};

/// Outcome of looking up a host's robots.txt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RobotsLookup {
    Found(String),
    /// The host has no robots.txt.
    Missing,
    /// The lookup could not be completed (timeout, server error).
    Unknown(String),
}

pub trait RobotsProvider: Send + Sync {
    fn lookup(&self, host: &str) -> RobotsLookup;
}

/// Directory of cached robots.txt files, one per punycoded host name.
/// A missing file means the host had no robots.txt; an empty file is an
/// empty robots.txt.
#[derive(Debug, Clone)]
pub struct SnapshotProvider {
    dir: PathBuf,
}

impl SnapshotProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SnapshotProvider { dir: dir.into() }
    }
}

impl RobotsProvider for SnapshotProvider {
    fn lookup(&self, host: &str) -> RobotsLookup {
        if host.is_empty() || host.contains(['/', '\\']) || host.starts_with('.') {
            return RobotsLookup::Missing;
        }
        match std::fs::read(self.dir.join(host)) {
            Ok(bytes) => RobotsLookup::Found(String::from_utf8_lossy(&bytes).into_owned()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => RobotsLookup::Missing,
            Err(e) => RobotsLookup::Unknown(e.to_string()),
        }
    }
}

/// Fetches robots.txt over the network with a timeout and a per-host
/// minimum interval between requests. Results are cached.
pub struct LiveProvider {
    client: reqwest::blocking::Client,
    scheme: String,
    port: Option<u16>,
    min_interval: Duration,
    cache: RwLock<HashMap<String, RobotsLookup>>,
    last_request: Mutex<HashMap<String, Instant>>,
}

impl LiveProvider {
    pub fn new(timeout: Duration, min_interval: Duration) -> Result<Self, reqwest::Error> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent("CCBot-compliance-check")
            .build()?;
        Ok(LiveProvider {
            client,
            scheme: "https".into(),
            port: None,
            min_interval,
            cache: RwLock::new(HashMap::new()),
            last_request: Mutex::new(HashMap::new()),
        })
    }

    /// Overrides scheme and port, e.g. for a local test server.
    pub fn with_endpoint(mut self, scheme: &str, port: Option<u16>) -> Self {
        self.scheme = scheme.to_string();
        self.port = port;
        self
    }

    fn wait_turn(&self, host: &str) {
        let wait = {
            let mut last = self.last_request.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let next = last.get(host).map_or(now, |t| (*t + self.min_interval).max(now));
            last.insert(host.to_string(), next);
            next - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }

    fn fetch(&self, host: &str) -> RobotsLookup {
        self.wait_turn(host);
        let authority = match self.port {
            Some(p) => format!("{host}:{p}"),
            None => host.to_string(),
        };
        let url = format!("{}://{authority}/robots.txt", self.scheme);
        match self.client.get(&url).send() {
            Ok(resp) if resp.status().is_success() => match resp.text() {
                Ok(body) => RobotsLookup::Found(body),
                Err(e) => RobotsLookup::Unknown(e.to_string()),
            },
            Ok(resp) if resp.status().is_client_error() => RobotsLookup::Missing,
            Ok(resp) => RobotsLookup::Unknown(format!("status {}", resp.status())),
            Err(e) => RobotsLookup::Unknown(e.to_string()),
        }
    }
}

impl RobotsProvider for LiveProvider {
    fn lookup(&self, host: &str) -> RobotsLookup {
        if let Some(hit) = self.cache.read().expect("cache poisoned").get(host) {
            return hit.clone();
        }
        let result = self.fetch(host);
        // Unknown results are not cached so a later run can retry.
        if !matches!(result, RobotsLookup::Unknown(_)) {
            self.cache.write().expect("cache poisoned").insert(host.to_string(), result.clone());
        }
        result
    }
}

/// Fixed answers, for tests and dry runs.
#[derive(Debug, Clone, Default)]
pub struct StaticProvider(pub HashMap<String, RobotsLookup>);

impl RobotsProvider for StaticProvider {
    fn lookup(&self, host: &str) -> RobotsLookup {
        self.0.get(host).cloned().unwrap_or(RobotsLookup::Missing)
    }
}
