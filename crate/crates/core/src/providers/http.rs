//! Remote embedding client: batching, bounded concurrency, a sliding-window
//! rate limiter, retries with exponential backoff and the on-disk cache.
//!
//! Wire format (POST `endpoint_url`):
//! request `{"model": str, "input": [str, ...]}`,
//! response `{"data": [{"index": int, "embedding": [float, ...]}, ...]}`.
//! The bearer token is read from `EMBED_API_KEY`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::cache::EmbeddingCache;
use super::{validate_texts, EmbeddingProvider};
use crate::embed::{normalize_slice, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::hashing::text_hash;

pub const API_KEY_ENV: &str = "EMBED_API_KEY";
pub const CACHE_DIR_ENV: &str = "BITEXT_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub request_batch_size: usize,
    pub max_concurrent_requests: usize,
    pub requests_per_minute: usize,
    pub cache_dir: PathBuf,
    pub timeout_secs: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/embeddings".to_string(),
            model_id: "text-embedding-3-small".to_string(),
            request_batch_size: 96,
            max_concurrent_requests: 4,
            requests_per_minute: 3000,
            cache_dir: PathBuf::from(".bitext-cache"),
            timeout_secs: 60,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("request_batch_size", self.request_batch_size),
            ("max_concurrent_requests", self.max_concurrent_requests),
            ("requests_per_minute", self.requests_per_minute),
        ];
        for (key, value) in positive {
            if value == 0 {
                return Err(Error::InvalidConfig(format!("{key} must be >= 1")));
            }
        }
        if self.timeout_secs == 0 {
            return Err(Error::InvalidConfig("timeout_secs must be >= 1".to_string()));
        }
        if self.model_id.is_empty() {
            return Err(Error::InvalidConfig("model_id must not be empty".to_string()));
        }
        Ok(())
    }

    /// `BITEXT_CACHE_DIR` wins over the configured directory.
    pub fn resolved_cache_dir(&self) -> PathBuf {
        std::env::var_os(CACHE_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| self.cache_dir.clone())
    }
}

/// Monotonic time source; tests substitute [`VirtualClock`].
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    start: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { start: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Clock whose `sleep` advances time instantly.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<Duration>,
    slept: Mutex<Vec<Duration>>,
}

impl VirtualClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }

    /// Every sleep requested so far, in order.
    pub fn sleeps(&self) -> Vec<Duration> {
        self.slept.lock().unwrap().clone()
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.slept.lock().unwrap().push(d);
        self.advance(d);
    }
}

/// Admits at most `limit` acquisitions in any half-open window of `window`.
pub struct RateLimiter {
    limit: usize,
    window: Duration,
    clock: Arc<dyn Clock>,
    sent: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn per_minute(limit: usize, clock: Arc<dyn Clock>) -> Self {
        Self::new(limit, Duration::from_secs(60), clock)
    }

    pub fn new(limit: usize, window: Duration, clock: Arc<dyn Clock>) -> Self {
        assert!(limit > 0, "rate limit must be positive");
        Self { limit, window, clock, sent: Mutex::new(VecDeque::new()) }
    }

    /// Blocks until a slot is free and records the acquisition time.
    pub fn acquire(&self) -> Duration {
        loop {
            let wait = {
                let mut sent = self.sent.lock().unwrap();
                let now = self.clock.now();
                while sent.front().is_some_and(|&t| t + self.window <= now) {
                    sent.pop_front();
                }
                if sent.len() < self.limit {
                    sent.push_back(now);
                    return now;
                }
                sent[0] + self.window - now
            };
            self.clock.sleep(wait);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResponse {
    pub status: u16,
    pub body: String,
}

/// Network-level failure (connect, timeout, broken body).
#[derive(Debug, Clone, PartialEq)]
pub struct TransportFailure(pub String);

pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> std::result::Result<TransportResponse, TransportFailure>;
}

/// Blocking HTTP transport.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl Default for UreqTransport {
    fn default() -> Self {
        let config = ureq::Agent::config_builder().http_status_as_error(false).build();
        Self { agent: ureq::Agent::new_with_config(config) }
    }
}

impl Transport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> std::result::Result<TransportResponse, TransportFailure> {
        let mut req = self
            .agent
            .post(url)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .header("Content-Type", "application/json");
        if let Some(token) = bearer {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(|e| TransportFailure(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| TransportFailure(e.to_string()))?;
        Ok(TransportResponse { status, body })
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

fn upstream_message(body: &str) -> String {
    serde_json::from_str::<serde_json::Value>(body)
        .ok()
        .and_then(|v| {
            v.pointer("/error/message")
                .or_else(|| v.get("error"))
                .or_else(|| v.get("message"))
                .and_then(|m| m.as_str().map(str::to_string))
        })
        .unwrap_or_else(|| body.chars().take(500).collect())
}

/// Sends `body` with retries. Transport failures, 429 and 5xx are retried;
/// other non-2xx statuses fail immediately.
pub(crate) fn post_with_retries(
    transport: &dyn Transport,
    clock: &dyn Clock,
    retry: &RetryPolicy,
    url: &str,
    bearer: Option<&str>,
    body: &serde_json::Value,
    timeout: Duration,
) -> Result<String> {
    let mut attempt = 0;
    loop {
        let outcome = transport.post_json(url, bearer, body, timeout);
        let err = match outcome {
            Ok(resp) if (200..300).contains(&resp.status) => return Ok(resp.body),
            Ok(resp) => {
                let err = Error::Provider { status: resp.status, message: upstream_message(&resp.body) };
                if resp.status != 429 && resp.status < 500 {
                    return Err(err);
                }
                err
            }
            Err(TransportFailure(msg)) => Error::Transport(msg),
        };
        attempt += 1;
        if attempt >= retry.max_attempts {
            return Err(err);
        }
        let wait = retry.backoff(attempt - 1);
        warn!("request to {url} failed ({err}); retry {attempt}/{} in {wait:?}", retry.max_attempts - 1);
        clock.sleep(wait);
    }
}

/// Embedding provider backed by a remote embeddings endpoint.
pub struct HttpEmbedder {
    config: ProviderConfig,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    limiter: RateLimiter,
    retry: RetryPolicy,
    cache: EmbeddingCache,
    api_key: Option<String>,
}

impl HttpEmbedder {
    /// Real network transport and system clock; API key from `EMBED_API_KEY`.
    pub fn from_config(config: ProviderConfig) -> Result<Self> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::with_parts(config, Arc::new(UreqTransport::default()), Arc::new(SystemClock::default()), key)
    }

    pub fn with_parts(
        config: ProviderConfig,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
        api_key: Option<String>,
    ) -> Result<Self> {
        config.validate()?;
        let cache = EmbeddingCache::new(config.resolved_cache_dir())?;
        let limiter = RateLimiter::per_minute(config.requests_per_minute, clock.clone());
        Ok(Self { config, transport, clock, limiter, retry: RetryPolicy::default(), cache, api_key })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn cache(&self) -> &EmbeddingCache {
        &self.cache
    }

    fn request_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        self.limiter.acquire();
        let body = json!({ "model": self.config.model_id, "input": texts });
        let raw = post_with_retries(
            self.transport.as_ref(),
            self.clock.as_ref(),
            &self.retry,
            &self.config.endpoint_url,
            self.api_key.as_deref(),
            &body,
            Duration::from_secs(self.config.timeout_secs),
        )?;
        let parsed: EmbeddingResponse = serde_json::from_str(&raw)
            .map_err(|e| Error::Provider { status: 200, message: format!("malformed response: {e}") })?;
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        for datum in parsed.data {
            let slot = slots.get_mut(datum.index).ok_or_else(|| Error::Provider {
                status: 200,
                message: format!("response index {} out of range", datum.index),
            })?;
            *slot = Some(datum.embedding);
        }
        slots
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| Error::Provider { status: 200, message: format!("missing embedding for input {i}") })
            })
            .collect()
    }

    /// Fetches `misses` in batches on up to `max_concurrent_requests` workers.
    fn fetch(&self, misses: &[(u64, String)]) -> Result<HashMap<u64, Vec<f32>>> {
        let chunks: Vec<&[(u64, String)]> = misses.chunks(self.config.request_batch_size).collect();
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let results = Mutex::new(HashMap::with_capacity(misses.len()));
        let first_error: Mutex<Option<Error>> = Mutex::new(None);
        let workers = self.config.max_concurrent_requests.min(chunks.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if failed.load(Ordering::SeqCst) {
                        return;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(chunk) = chunks.get(i) else { return };
                    let texts: Vec<String> = chunk.iter().map(|(_, t)| t.clone()).collect();
                    let outcome = self.request_batch(&texts).and_then(|vectors| {
                        let mut stored = Vec::with_capacity(vectors.len());
                        for ((hash, _), v) in chunk.iter().zip(vectors) {
                            let unit: Vec<f32> = normalize_slice(&v)?.as_slice().iter().map(|&x| x as f32).collect();
                            self.cache.put(&self.config.model_id, *hash, &unit)?;
                            stored.push((*hash, unit));
                        }
                        Ok(stored)
                    });
                    match outcome {
                        Ok(stored) => results.lock().unwrap().extend(stored),
                        Err(e) => {
                            failed.store(true, Ordering::SeqCst);
                            first_error.lock().unwrap().get_or_insert(e);
                            return;
                        }
                    }
                });
            }
        });
        if let Some(e) = first_error.into_inner().unwrap() {
            return Err(e);
        }
        Ok(results.into_inner().unwrap())
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn model_id(&self) -> &str {
        &self.config.model_id
    }

    fn embed(&self, texts: &[String]) -> Result<EmbeddingMatrix> {
        if texts.is_empty() {
            return Err(Error::InvalidMatrix("no texts to embed".to_string()));
        }
        validate_texts(texts)?;
        let hashes: Vec<u64> = texts.iter().map(|t| text_hash(t)).collect();
        let mut found: HashMap<u64, Vec<f32>> = HashMap::new();
        let mut misses = Vec::new();
        let mut pending = HashSet::new();
        for (hash, text) in hashes.iter().zip(texts) {
            if found.contains_key(hash) || pending.contains(hash) {
                continue;
            }
            match self.cache.get(&self.config.model_id, *hash)? {
                Some(v) => {
                    found.insert(*hash, v);
                }
                None => {
                    pending.insert(*hash);
                    misses.push((*hash, text.clone()));
                }
            }
        }
        debug!("{} texts: {} cached, {} to fetch", texts.len(), found.len(), misses.len());
        if !misses.is_empty() {
            found.extend(self.fetch(&misses)?);
        }
        let dim = found[&hashes[0]].len();
        let mut data = Vec::with_capacity(texts.len() * dim);
        for hash in &hashes {
            let stored = &found[hash];
            if stored.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: stored.len() });
            }
            let widened: Vec<f64> = stored.iter().map(|&x| f64::from(x)).collect();
            data.extend(normalize_slice(&widened)?.into_inner());
        }
        EmbeddingMatrix::from_flat(dim, data, (0..texts.len()).map(|i| i.to_string()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU32;

    /// Fake endpoint: embeds each input as a deterministic 3-vector and
    /// counts requests. Optionally fails the first `fail_first` calls.
    #[derive(Default)]
    struct FakeTransport {
        calls: AtomicU32,
        fail_first: u32,
        status_on_fail: Option<u16>,
        batch_sizes: Mutex<Vec<usize>>,
    }

    impl Transport for FakeTransport {
        fn post_json(
            &self,
            _url: &str,
            bearer: Option<&str>,
            body: &serde_json::Value,
            _timeout: Duration,
        ) -> std::result::Result<TransportResponse, TransportFailure> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            assert_eq!(bearer, Some("secret"));
            if n < self.fail_first {
                return match self.status_on_fail {
                    Some(status) => Ok(TransportResponse { status, body: r#"{"error":{"message":"slow down"}}"#.into() }),
                    None => Err(TransportFailure("connection reset".into())),
                };
            }
            let inputs = body["input"].as_array().unwrap();
            self.batch_sizes.lock().unwrap().push(inputs.len());
            let data: Vec<_> = inputs
                .iter()
                .enumerate()
                .rev()
                .map(|(i, t)| {
                    let h = text_hash(t.as_str().unwrap());
                    json!({"index": i, "embedding": [1.0 + (h % 7) as f64, (h % 13) as f64, 2.0]})
                })
                .collect();
            Ok(TransportResponse { status: 200, body: json!({ "data": data }).to_string() })
        }
    }

    fn embedder(dir: &std::path::Path, transport: Arc<FakeTransport>, batch: usize) -> HttpEmbedder {
        let config = ProviderConfig {
            endpoint_url: "http://fake/v1/embeddings".into(),
            model_id: "fake-model".into(),
            request_batch_size: batch,
            max_concurrent_requests: 3,
            requests_per_minute: 1000,
            cache_dir: dir.to_path_buf(),
            timeout_secs: 5,
        };
        HttpEmbedder::with_parts(config, transport, Arc::new(VirtualClock::default()), Some("secret".into())).unwrap()
    }

    fn texts(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("text number {i}")).collect()
    }

    #[test]
    fn request_count_follows_batch_size() {
        let dir = tempfile::tempdir().unwrap();
        let fake = Arc::new(FakeTransport::default());
        let e = embedder(dir.path(), fake.clone(), 96);
        let m = e.embed(&texts(1000)).unwrap();
        assert_eq!(m.nrows(), 1000);
        assert_eq!(fake.calls.load(Ordering::SeqCst), 11);
        let mut sizes = fake.batch_sizes.lock().unwrap().clone();
        sizes.sort();
        assert_eq!(sizes.iter().sum::<usize>(), 1000);
        assert_eq!(sizes[0], 1000 - 10 * 96);
    }

    #[test]
    fn second_call_is_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let fake = Arc::new(FakeTransport::default());
        let e = embedder(dir.path(), fake.clone(), 8);
        let hello = vec!["hello".to_string()];
        let first = e.embed(&hello).unwrap();
        let second = e.embed(&hello).unwrap();
        assert_eq!(fake.calls.load(Ordering::SeqCst), 1);
        let bits = |m: &EmbeddingMatrix| m.as_flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&first), bits(&second));
        let n: f64 = first.row(0).iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_issues_no_request() {
        let dir = tempfile::tempdir().unwrap();
        let fake = Arc::new(FakeTransport::default());
        let e = embedder(dir.path(), fake.clone(), 8);
        let err = e.embed(&["".to_string(), "x".to_string()]).unwrap_err();
        assert!(matches!(err, Error::EmptyText(0)));
        assert_eq!(fake.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn rows_follow_input_order() {
        let dir = tempfile::tempdir().unwrap();
        let fake = Arc::new(FakeTransport::default());
        let e = embedder(dir.path(), fake, 4);
        let forward = texts(30);
        let mut shuffled = forward.clone();
        shuffled.reverse();
        shuffled.swap(3, 17);
        let a = e.embed(&forward).unwrap();
        let b = e.embed(&shuffled).unwrap();
        for (i, t) in shuffled.iter().enumerate() {
            let j = forward.iter().position(|f| f == t).unwrap();
            assert_eq!(b.row(i), a.row(j));
        }
    }

    #[test]
    fn transient_failures_are_retried() {
        let dir = tempfile::tempdir().unwrap();
        let fake = Arc::new(FakeTransport { fail_first: 2, ..Default::default() });
        let e = embedder(dir.path(), fake.clone(), 8);
        assert!(e.embed(&texts(3)).is_ok());
        assert_eq!(fake.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn persistent_failures_surface_as_errors() {
        let dir = tempfile::tempdir().unwrap();
        let fake = Arc::new(FakeTransport { fail_first: 100, ..Default::default() });
        let e = embedder(dir.path(), fake.clone(), 8);
        assert!(matches!(e.embed(&texts(3)), Err(Error::Transport(_))));
        assert_eq!(fake.calls.load(Ordering::SeqCst), RetryPolicy::default().max_attempts);

        let dir = tempfile::tempdir().unwrap();
        let fake = Arc::new(FakeTransport { fail_first: 100, status_on_fail: Some(401), ..Default::default() });
        let e = embedder(dir.path(), fake.clone(), 8);
        match e.embed(&texts(3)) {
            Err(Error::Provider { status, message }) => {
                assert_eq!(status, 401);
                assert_eq!(message, "slow down");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(fake.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn backoff_grows_exponentially() {
        let clock = VirtualClock::default();
        let fake = FakeTransport { fail_first: 3, status_on_fail: Some(503), ..Default::default() };
        let body = json!({"model": "m", "input": ["a"]});
        post_with_retries(&fake, &clock, &RetryPolicy::default(), "u", Some("secret"), &body, Duration::from_secs(1))
            .unwrap();
        assert_eq!(
            clock.sleeps(),
            vec![Duration::from_millis(500), Duration::from_millis(1000), Duration::from_millis(2000)]
        );
    }

    #[test]
    fn rate_limiter_respects_sliding_window() {
        let clock = Arc::new(VirtualClock::default());
        let limiter = RateLimiter::per_minute(7, clock.clone());
        let mut stamps = Vec::new();
        for i in 0..50 {
            if i % 5 == 0 {
                clock.advance(Duration::from_millis(3700));
            }
            stamps.push(limiter.acquire());
        }
        for (i, &start) in stamps.iter().enumerate() {
            let in_window = stamps[i..].iter().filter(|&&t| t < start + Duration::from_secs(60)).count();
            assert!(in_window <= 7, "window starting at {start:?} holds {in_window}");
        }
        assert!(stamps.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rate_limiter_shared_across_threads() {
        let clock = Arc::new(VirtualClock::default());
        let limiter = Arc::new(RateLimiter::per_minute(5, clock.clone()));
        let stamps = Mutex::new(Vec::new());
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    for _ in 0..6 {
                        let t = limiter.acquire();
                        stamps.lock().unwrap().push(t);
                    }
                });
            }
        });
        let mut stamps = stamps.into_inner().unwrap();
        stamps.sort();
        assert_eq!(stamps.len(), 24);
        for (i, &start) in stamps.iter().enumerate() {
            let n = stamps[i..].iter().filter(|&&t| t < start + Duration::from_secs(60)).count();
            assert!(n <= 5);
        }
    }

    #[test]
    fn config_validation() {
        let bad = ProviderConfig { request_batch_size: 0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(m)) if m.contains("request_batch_size")));
        assert!(ProviderConfig::default().validate().is_ok());
    }
}
