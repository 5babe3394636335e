//! Client for the public discussion archive.
//!
//! Products are listed one day at a time through
//! `api/1/nws/afos/list.json?pil=AFD{office}&date=YYYY-MM-DD` and fetched
//! through `api/1/nwstext/{product_id}`. All traffic goes through a
//! [`Transport`], so tests replay recorded response bodies from disk.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::Deserialize;
use thiserror::Error;

use super::{sample_from_product, Sample};

pub const DEFAULT_BASE_URL: &str = "https://mesonet.agron.iastate.edu/";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("network error: {0}")]
    Network(String),
    #[error("no recorded fixture `{0}`")]
    MissingFixture(String),
    #[error("fixture I/O: {0}")]
    Io(String),
}

impl TransportError {
    /// Worth retrying: connection trouble, throttling and server errors.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportError::Status(code) => *code == 429 || *code >= 500,
            TransportError::Network(_) => true,
            TransportError::MissingFixture(_) | TransportError::Io(_) => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("request `{path}` failed after {attempts} attempt(s): {source}")]
    Request {
        path: String,
        attempts: u32,
        source: TransportError,
    },
    #[error("malformed response for `{path}`: {message}; payload starts `{excerpt}`")]
    Malformed {
        path: String,
        message: String,
        excerpt: String,
    },
}

/// Performs a GET for a path relative to the archive root.
pub trait Transport: Send + Sync {
    fn get(&self, path: &str) -> Result<String, TransportError>;
}

impl<T: Transport + ?Sized> Transport for &T {
    fn get(&self, path: &str) -> Result<String, TransportError> {
        (**self).get(path)
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn get(&self, path: &str) -> Result<String, TransportError> {
        (**self).get(path)
    }
}

/// File name under which the response body for `path` is stored.
pub fn fixture_name(path: &str) -> String {
    path.trim_start_matches('/')
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Serves response bodies recorded by [`RecordingTransport`].
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl Transport for FixtureTransport {
    fn get(&self, path: &str) -> Result<String, TransportError> {
        let name = fixture_name(path);
        match fs::read_to_string(self.dir.join(&name)) {
            Ok(body) => Ok(body),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(TransportError::MissingFixture(name))
            }
            Err(e) => Err(TransportError::Io(e.to_string())),
        }
    }
}

/// Forwards to an inner transport and stores every successful body.
#[derive(Debug)]
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Result<Self, std::io::Error> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { inner, dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn get(&self, path: &str) -> Result<String, TransportError> {
        let body = self.inner.get(path)?;
        fs::write(self.dir.join(fixture_name(path)), &body)
            .map_err(|e| TransportError::Io(e.to_string()))?;
        Ok(body)
    }
}

#[cfg(feature = "http")]
pub use http::HttpTransport;

#[cfg(feature = "http")]
mod http {
    use super::{Transport, TransportError};
    use std::time::Duration;

    /// Live HTTP transport.
    #[derive(Debug, Clone)]
    pub struct HttpTransport {
        base_url: String,
        agent: ureq::Agent,
    }

    impl HttpTransport {
        pub fn new(base_url: &str, timeout: Duration) -> Self {
            let agent = ureq::Agent::config_builder()
                .timeout_global(Some(timeout))
                .user_agent(concat!("synoptic-space/", env!("CARGO_PKG_VERSION")))
                .build()
                .into();
            let mut base_url = base_url.to_string();
            if !base_url.ends_with('/') {
                base_url.push('/');
            }
            Self { base_url, agent }
        }
    }

    impl Transport for HttpTransport {
        fn get(&self, path: &str) -> Result<String, TransportError> {
            let url = format!("{}{}", self.base_url, path.trim_start_matches('/'));
            match self.agent.get(&url).call() {
                Ok(mut resp) => resp
                    .body_mut()
                    .read_to_string()
                    .map_err(|e| TransportError::Network(e.to_string())),
                Err(ureq::Error::StatusCode(code)) => Err(TransportError::Status(code)),
                Err(e) => Err(TransportError::Network(e.to_string())),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based), doubling each time.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

/// Spaces requests at least `interval` apart across all threads.
struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn wait_time(&self) -> Duration {
        let now = Instant::now();
        let mut next = self.next.lock().expect("rate limiter lock");
        let slot = next.map_or(now, |t| t.max(now));
        *next = Some(slot + self.interval);
        slot - now
    }
}

/// One listed product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawProduct {
    pub product_id: String,
    pub entered: DateTime<Utc>,
    pub text: String,
}

#[derive(Deserialize)]
struct Listing {
    data: Vec<ListingEntry>,
}

#[derive(Deserialize)]
struct ListingEntry {
    product_id: String,
    #[serde(default)]
    entered: Option<String>,
}

fn excerpt(body: &str) -> String {
    let mut s: String = body.chars().take(120).collect();
    if s.len() < body.len() {
        s.push_str("...");
    }
    s
}

fn parse_entered(entry: &ListingEntry) -> Option<DateTime<Utc>> {
    if let Some(raw) = entry.entered.as_deref() {
        if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
            return Some(t.with_timezone(&Utc));
        }
        for fmt in ["%Y-%m-%dT%H:%MZ", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
            if let Ok(t) = NaiveDateTime::parse_from_str(raw, fmt) {
                return Some(t.and_utc());
            }
        }
    }
    // Product ids begin with the UTC entry time as YYYYMMDDHHMM.
    let stamp = entry.product_id.get(..12)?;
    NaiveDateTime::parse_from_str(stamp, "%Y%m%d%H%M").ok().map(|t| t.and_utc())
}

pub struct ArchiveClient<T> {
    transport: T,
    retry: RetryPolicy,
    limiter: Option<RateLimiter>,
    sleeper: Sleeper,
}

impl<T: Transport> ArchiveClient<T> {
    pub fn new(transport: T) -> Self {
        Self {
            transport,
            retry: RetryPolicy::default(),
            limiter: None,
            sleeper: Arc::new(thread::sleep),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Caps the request rate across all threads sharing this client.
    pub fn with_rate_limit(mut self, requests_per_second: f64) -> Self {
        self.limiter = (requests_per_second > 0.0).then(|| RateLimiter {
            interval: Duration::from_secs_f64(1.0 / requests_per_second),
            next: Mutex::new(None),
        });
        self
    }

    /// Replaces the sleep used for backoff and rate limiting.
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Arc::new(sleeper);
        self
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn get(&self, path: &str) -> Result<String, IngestError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            if let Some(limiter) = &self.limiter {
                let wait = limiter.wait_time();
                if !wait.is_zero() {
                    (self.sleeper)(wait);
                }
            }
            match self.transport.get(path) {
                Ok(body) => return Ok(body),
                Err(e) if e.is_transient() && attempt < self.retry.max_attempts => {
                    log::debug!("{path}: {e}; retry {attempt}");
                    (self.sleeper)(self.retry.delay(attempt));
                }
                Err(source) => {
                    return Err(IngestError::Request {
                        path: path.to_string(),
                        attempts: attempt,
                        source,
                    })
                }
            }
        }
    }

    /// Products listed for `office` on one UTC day, in listing order.
    pub fn list_day(&self, office: &str, day: NaiveDate) -> Result<Vec<(String, DateTime<Utc>)>, IngestError> {
        let path = format!(
            "api/1/nws/afos/list.json?pil=AFD{}&date={}",
            office.to_ascii_uppercase(),
            day.format("%Y-%m-%d")
        );
        let body = self.get(&path)?;
        let listing: Listing = serde_json::from_str(&body).map_err(|e| IngestError::Malformed {
            path: path.clone(),
            message: e.to_string(),
            excerpt: excerpt(&body),
        })?;
        listing
            .data
            .into_iter()
            .map(|entry| match parse_entered(&entry) {
                Some(t) => Ok((entry.product_id, t)),
                None => Err(IngestError::Malformed {
                    path: path.clone(),
                    message: format!("entry `{}` has no usable entry time", entry.product_id),
                    excerpt: excerpt(&body),
                }),
            })
            .collect()
    }

    pub fn product_text(&self, product_id: &str) -> Result<String, IngestError> {
        self.get(&format!("api/1/nwstext/{product_id}"))
    }

    /// Every discussion from `office` entered between `start` and `end`
    /// (inclusive UTC days), oldest first. An inverted range is empty.
    pub fn fetch_afds(&self, office: &str, start: NaiveDate, end: NaiveDate) -> Result<Vec<RawProduct>, IngestError> {
        let mut listed = Vec::new();
        for day in start.iter_days().take_while(|d| *d <= end) {
            listed.extend(self.list_day(office, day)?);
        }
        listed.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));
        listed.dedup_by(|a, b| a.0 == b.0);
        listed
            .into_iter()
            .map(|(product_id, entered)| {
                let text = self.product_text(&product_id)?;
                Ok(RawProduct { product_id, entered, text })
            })
            .collect()
    }

    /// Fetches several offices on up to `jobs` threads and converts the
    /// products to samples. Output follows the order of `offices`.
    pub fn ingest(
        &self,
        offices: &[String],
        start: NaiveDate,
        end: NaiveDate,
        jobs: usize,
    ) -> Result<Vec<Sample>, IngestError> {
        let jobs = jobs.clamp(1, offices.len().max(1));
        let chunk = offices.len().div_ceil(jobs).max(1);
        let results: Vec<Result<Vec<Sample>, IngestError>> = thread::scope(|scope| {
            let handles: Vec<_> = offices
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        let mut out = Vec::new();
                        for office in part {
                            for product in self.fetch_afds(office, start, end)? {
                                out.extend(sample_from_product(office, &product));
                            }
                        }
                        Ok(out)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("ingest worker panicked"))
                .collect()
        });
        let mut samples = Vec::new();
        for r in results {
            samples.extend(r?);
        }
        Ok(samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Scripted {
        responses: Mutex<HashMap<String, Vec<Result<String, TransportError>>>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(entries: Vec<(&str, Vec<Result<String, TransportError>>)>) -> Self {
            Self {
                responses: Mutex::new(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl Transport for Scripted {
        fn get(&self, path: &str) -> Result<String, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let mut map = self.responses.lock().unwrap();
            let queue = map.get_mut(path).unwrap_or_else(|| panic!("unexpected {path}"));
            queue.remove(0)
        }
    }

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2025, 1, d).unwrap()
    }

    #[test]
    fn retries_transient_then_succeeds() {
        let t = Scripted::new(vec![(
            "api/1/nwstext/X",
            vec![Err(TransportError::Status(503)), Err(TransportError::Network("reset".into())), Ok("body".into())],
        )]);
        let slept = Arc::new(Mutex::new(Vec::new()));
        let log = slept.clone();
        let client = ArchiveClient::new(&t).with_sleeper(move |d| log.lock().unwrap().push(d));
        assert_eq!(client.product_text("X").unwrap(), "body");
        assert_eq!(*slept.lock().unwrap(), [Duration::from_millis(500), Duration::from_millis(1000)]);
    }

    #[test]
    fn retries_are_bounded() {
        let t = Scripted::new(vec![("api/1/nwstext/X", vec![Err(TransportError::Status(500)); 4])]);
        let client = ArchiveClient::new(&t).with_sleeper(|_| {});
        let err = client.product_text("X").unwrap_err();
        assert!(matches!(err, IngestError::Request { attempts: 4, .. }));
        assert_eq!(t.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn client_errors_not_retried() {
        let t = Scripted::new(vec![("api/1/nwstext/X", vec![Err(TransportError::Status(404))])]);
        let client = ArchiveClient::new(&t).with_sleeper(|_| panic!("no sleep expected"));
        assert!(matches!(client.product_text("X"), Err(IngestError::Request { attempts: 1, .. })));
    }

    #[test]
    fn backoff_is_capped() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(1), Duration::from_millis(500));
        assert_eq!(p.delay(4), Duration::from_secs(4));
        assert_eq!(p.delay(10), Duration::from_secs(8));
        assert_eq!(p.delay(64), Duration::from_secs(8));
    }

    #[test]
    fn listing_sorted_and_deduplicated() {
        let list = |body: &str| vec![Ok(body.to_string())];
        let t = Scripted::new(vec![
            (
                "api/1/nws/afos/list.json?pil=AFDBOU&date=2025-01-06",
                list(r#"{"data":[{"product_id":"202501062300-KBOU-FXUS65-AFDBOU","entered":"2025-01-06T23:00:00Z"},{"product_id":"202501061100-KBOU-FXUS65-AFDBOU"}]}"#),
            ),
            (
                "api/1/nws/afos/list.json?pil=AFDBOU&date=2025-01-07",
                list(r#"{"data":[{"product_id":"202501062300-KBOU-FXUS65-AFDBOU","entered":"2025-01-06 23:00"}]}"#),
            ),
            ("api/1/nwstext/202501061100-KBOU-FXUS65-AFDBOU", list("a")),
            ("api/1/nwstext/202501062300-KBOU-FXUS65-AFDBOU", list("b")),
        ]);
        let client = ArchiveClient::new(&t);
        let got = client.fetch_afds("bou", day(6), day(7)).unwrap();
        let texts: Vec<_> = got.iter().map(|p| p.text.as_str()).collect();
        assert_eq!(texts, ["a", "b"]);
        assert!(client.fetch_afds("BOU", day(7), day(6)).unwrap().is_empty());
    }

    #[test]
    fn malformed_listing() {
        let t = Scripted::new(vec![(
            "api/1/nws/afos/list.json?pil=AFDBOU&date=2025-01-06",
            vec![Ok("<html>oops</html>".into())],
        )]);
        let err = ArchiveClient::new(&t).fetch_afds("BOU", day(6), day(6)).unwrap_err();
        match err {
            IngestError::Malformed { excerpt, .. } => assert_eq!(excerpt, "<html>oops</html>"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let t = Scripted::new(vec![("api/1/nwstext/X-1", vec![Ok("text".into())])]);
        let rec = RecordingTransport::new(&t, dir.path()).unwrap();
        assert_eq!(ArchiveClient::new(&rec).product_text("X-1").unwrap(), "text");
        let replay = ArchiveClient::new(FixtureTransport::new(dir.path()));
        assert_eq!(replay.product_text("X-1").unwrap(), "text");
        assert!(matches!(
            replay.product_text("Y"),
            Err(IngestError::Request { source: TransportError::MissingFixture(_), .. })
        ));
    }

    #[test]
    fn fixture_names() {
        assert_eq!(
            fixture_name("/api/1/nws/afos/list.json?pil=AFDBOU&date=2025-01-07"),
            "api_1_nws_afos_list.json_pil_AFDBOU_date_2025-01-07"
        );
    }
}
