//! Live and replay transports behind one interface, so tests and CI
//! exercise the identical code path as production fetches.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::{ClientError, MeasurementSpec};

/// One HTTP exchange as the transport sees it.
#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
    /// Server-provided retry hint, when present.
    pub retry_after_ms: Option<u64>,
}

/// Minimal blocking HTTP surface, injectable for tests.
pub trait HttpBackend: Send + Sync {
    fn get(&self, url: &str, api_key: &str) -> Result<HttpResponse, ClientError>;
    fn post(&self, url: &str, api_key: &str, body: &str) -> Result<HttpResponse, ClientError>;
}

/// Production backend.
pub struct ReqwestBackend {
    client: reqwest::blocking::Client,
}

impl ReqwestBackend {
    pub fn new() -> Self {
        ReqwestBackend {
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl Default for ReqwestBackend {
    fn default() -> Self {
        Self::new()
    }
}

fn retry_after_ms(headers: &reqwest::header::HeaderMap) -> Option<u64> {
    headers
        .get(reqwest::header::RETRY_AFTER)
        .and_then(|v| v.to_str().ok())
        .and_then(|s| s.parse::<u64>().ok())
        .map(|secs| secs * 1000)
}

impl HttpBackend for ReqwestBackend {
    fn get(&self, url: &str, api_key: &str) -> Result<HttpResponse, ClientError> {
        let resp = self
            .client
            .get(url)
            .header("Authorization", format!("Key {api_key}"))
            .send()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let retry = retry_after_ms(resp.headers());
        let body = resp.text().map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(HttpResponse {
            status,
            body,
            retry_after_ms: retry,
        })
    }

    fn post(&self, url: &str, api_key: &str, body: &str) -> Result<HttpResponse, ClientError> {
        let resp = self
            .client
            .post(url)
            .header("Authorization", format!("Key {api_key}"))
            .header("Content-Type", "application/json")
            .body(body.to_string())
            .send()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let retry = retry_after_ms(resp.headers());
        let body = resp.text().map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(HttpResponse {
            status,
            body,
            retry_after_ms: retry,
        })
    }
}

/// Rate-limit handling: how long to sleep between attempts when the
/// platform answers 429, and how many attempts to make. The platform's
/// published workflow leaves the pause unspecified, so it is configuration
/// with a 1000 ms default.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub sleep_ms: u64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            sleep_ms: 1000,
            max_attempts: 5,
        }
    }
}

/// Live REST transport.
pub struct LiveTransport {
    pub base_url: String,
    pub api_key: String,
    pub retry: RetryPolicy,
    pub backend: Box<dyn HttpBackend>,
}

impl LiveTransport {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        LiveTransport {
            base_url: base_url.into(),
            api_key: api_key.into(),
            retry: RetryPolicy::default(),
            backend: Box::new(ReqwestBackend::new()),
        }
    }

    pub fn with_backend(mut self, backend: Box<dyn HttpBackend>) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }
}

/// Offline transport reading recorded measurement results from
/// `fixture_dir/<measurement_id>.jsonl`.
pub struct ReplayTransport {
    pub fixture_dir: PathBuf,
}

impl ReplayTransport {
    pub fn new(fixture_dir: impl Into<PathBuf>) -> Self {
        ReplayTransport {
            fixture_dir: fixture_dir.into(),
        }
    }
}

/// Either a live endpoint or a replay directory.
pub enum Transport {
    Live(LiveTransport),
    Replay(ReplayTransport),
}

/// Deterministic replay id: a hash of the spec's canonical serialization.
fn replay_id(spec: &MeasurementSpec) -> String {
    let canonical = serde_json::to_string(spec).expect("spec serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("replay-{hex}")
}

/// Submits one measurement request and returns the platform id. Replay mode
/// derives the id from the spec itself, so resubmitting an identical spec
/// is idempotent.
pub fn create_measurement(
    spec: &MeasurementSpec,
    transport: &Transport,
) -> Result<String, ClientError> {
    if spec.probes.is_empty() {
        return Err(ClientError::EmptyProbes);
    }
    if spec.packets < 1 {
        return Err(ClientError::InvalidPackets(spec.packets));
    }
    match transport {
        Transport::Replay(_) => Ok(replay_id(spec)),
        Transport::Live(live) => {
            let url = format!("{}/measurements", live.base_url.trim_end_matches('/'));
            let body = serde_json::to_string(spec).expect("spec serializes");
            let mut attempt = 0;
            loop {
                attempt += 1;
                let resp = live.backend.post(&url, &live.api_key, &body)?;
                match resp.status {
                    200 | 201 => {
                        let parsed: serde_json::Value = serde_json::from_str(&resp.body)
                            .map_err(|e| ClientError::Transport(format!("bad response: {e}")))?;
                        let id = parsed["measurements"]
                            .get(0)
                            .and_then(|v| v.as_str().map(String::from).or_else(|| v.as_u64().map(|n| n.to_string())))
                            .ok_or_else(|| {
                                ClientError::Transport("response missing measurement id".into())
                            })?;
                        return Ok(id);
                    }
                    429 => {
                        if attempt >= live.retry.max_attempts {
                            return Err(ClientError::QuotaExceeded(resp.body));
                        }
                        let pause = resp.retry_after_ms.unwrap_or(live.retry.sleep_ms);
                        std::thread::sleep(std::time::Duration::from_millis(pause));
                    }
                    status => {
                        return Err(ClientError::Transport(format!(
                            "unexpected status {status}: {}",
                            resp.body
                        )))
                    }
                }
            }
        }
    }
}

/// Fetches one measurement's results as traceroute JSON-lines. Live fetches
/// follow pagination, concatenating pages in order; the fetch is idempotent.
pub fn fetch_results(measurement_id: &str, transport: &Transport) -> Result<String, ClientError> {
    match transport {
        Transport::Replay(replay) => {
            let path = replay.fixture_dir.join(format!("{measurement_id}.jsonl"));
            match std::fs::read_to_string(&path) {
                Ok(contents) => Ok(contents),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    Err(ClientError::NotFound(measurement_id.to_string()))
                }
                Err(e) => Err(ClientError::Io(e)),
            }
        }
        Transport::Live(live) => {
            let mut url = format!(
                "{}/measurements/{measurement_id}/results",
                live.base_url.trim_end_matches('/')
            );
            let mut out = String::new();
            loop {
                let resp = live.backend.get(&url, &live.api_key)?;
                match resp.status {
                    200 => {}
                    202 => {
                        return Err(ClientError::Incomplete {
                            id: measurement_id.to_string(),
                            retry_after_ms: resp.retry_after_ms.unwrap_or(live.retry.sleep_ms),
                        })
                    }
                    404 => return Err(ClientError::NotFound(measurement_id.to_string())),
                    status => {
                        return Err(ClientError::Transport(format!(
                            "unexpected status {status}: {}",
                            resp.body
                        )))
                    }
                }
                let parsed: serde_json::Value = serde_json::from_str(&resp.body)
                    .map_err(|e| ClientError::Transport(format!("bad response: {e}")))?;
                let results = parsed["results"]
                    .as_array()
                    .ok_or_else(|| ClientError::Transport("response missing results".into()))?;
                for item in results {
                    out.push_str(&serde_json::to_string(item).expect("value serializes"));
                    out.push('\n');
                }
                match parsed["next"].as_str() {
                    Some(next) if !next.is_empty() => url = next.to_string(),
                    _ => break,
                }
            }
            Ok(out)
        }
    }
}

/// Fetches many measurements with at most `max_in_flight` concurrent
/// requests. Results come back in request order regardless of completion
/// order or retries.
pub fn fetch_all(
    ids: &[String],
    transport: &Transport,
    max_in_flight: usize,
) -> Vec<Result<String, ClientError>> {
    let workers = max_in_flight.max(1).min(ids.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<String, ClientError>>>> =
        ids.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= ids.len() {
                    break;
                }
                let result = fetch_results(&ids[i], transport);
                *slots[i].lock().expect("result slot") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("result slot").expect("worker filled slot"))
        .collect()
}
