use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarvestQuery;
use crate::model::Source;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FetchError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("no fixture page {page_index} in {dir}")]
    MissingFixture { dir: PathBuf, page_index: usize },
    #[error("offline mode and no cached response for {0}")]
    Offline(String),
    #[error("no endpoint configured for {0}")]
    NoEndpoint(Source),
    #[error("I/O error: {0}")]
    Io(String),
}

impl FetchError {
    /// Transport failures, 429 and 5xx are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            FetchError::Transport(_) => true,
            FetchError::Status(code) => *code == 429 || (500..600).contains(code),
            _ => false,
        }
    }
}

/// One page request in a harvest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageRequest {
    pub query: HarvestQuery,
    pub cursor: Option<String>,
    /// Zero-based position of the page within the harvest.
    pub page_index: usize,
}

impl PageRequest {
    /// Cache file name: SHA-256 over source, canonical query and cursor.
    pub fn cache_key(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.query.source.slug().as_bytes());
        hasher.update([0]);
        hasher.update(self.query.canonical().as_bytes());
        hasher.update([0]);
        if let Some(cursor) = &self.cursor {
            hasher.update([1]);
            hasher.update(cursor.as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// Something that returns the raw payload for a page request.
pub trait Fetcher {
    fn fetch(&self, request: &PageRequest) -> Result<Vec<u8>, FetchError>;
}

impl<F: Fetcher + ?Sized> Fetcher for &F {
    fn fetch(&self, request: &PageRequest) -> Result<Vec<u8>, FetchError> {
        (**self).fetch(request)
    }
}

impl<F: Fetcher + ?Sized> Fetcher for Box<F> {
    fn fetch(&self, request: &PageRequest) -> Result<Vec<u8>, FetchError> {
        (**self).fetch(request)
    }
}

/// Serves page files from a directory in lexicographic file-name order;
/// page `i` of a harvest is the `i`-th file.
#[derive(Debug)]
pub struct FixtureFetcher {
    dir: PathBuf,
    pages: Vec<PathBuf>,
    fetches: AtomicUsize,
}

impl FixtureFetcher {
    pub fn new(dir: impl AsRef<Path>) -> std::io::Result<FixtureFetcher> {
        let dir = dir.as_ref().to_path_buf();
        let mut pages = Vec::new();
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_file() && !path.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')) {
                pages.push(path);
            }
        }
        pages.sort();
        Ok(FixtureFetcher {
            dir,
            pages,
            fetches: AtomicUsize::new(0),
        })
    }

    pub fn page_count(&self) -> usize {
        self.pages.len()
    }

    pub fn fetch_count(&self) -> usize {
        self.fetches.load(Ordering::SeqCst)
    }
}

impl Fetcher for FixtureFetcher {
    fn fetch(&self, request: &PageRequest) -> Result<Vec<u8>, FetchError> {
        self.fetches.fetch_add(1, Ordering::SeqCst);
        let path = self.pages.get(request.page_index).ok_or_else(|| FetchError::MissingFixture {
            dir: self.dir.clone(),
            page_index: request.page_index,
        })?;
        std::fs::read(path).map_err(|e| FetchError::Io(format!("{}: {e}", path.display())))
    }
}

/// On-disk response cache in front of another fetcher. Files are written
/// to a temporary name and renamed into place.
#[derive(Debug)]
pub struct CachingFetcher<F> {
    inner: F,
    dir: PathBuf,
    offline: bool,
    live: AtomicUsize,
    hits: AtomicUsize,
}

impl<F: Fetcher> CachingFetcher<F> {
    pub fn new(inner: F, dir: impl AsRef<Path>) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir.as_ref())?;
        Ok(CachingFetcher {
            inner,
            dir: dir.as_ref().to_path_buf(),
            offline: false,
            live: AtomicUsize::new(0),
            hits: AtomicUsize::new(0),
        })
    }

    /// Misses fail with [`FetchError::Offline`] instead of reaching `inner`.
    pub fn offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    /// Requests forwarded to the inner fetcher.
    pub fn live_fetches(&self) -> usize {
        self.live.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }

    fn store(&self, key: &str, payload: &[u8]) -> std::io::Result<()> {
        use std::io::Write;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(payload)?;
        tmp.persist(self.dir.join(key)).map_err(|e| e.error)?;
        Ok(())
    }
}

impl<F: Fetcher> Fetcher for CachingFetcher<F> {
    fn fetch(&self, request: &PageRequest) -> Result<Vec<u8>, FetchError> {
        let key = request.cache_key();
        let path = self.dir.join(&key);
        match std::fs::read(&path) {
            Ok(bytes) => {
                self.hits.fetch_add(1, Ordering::SeqCst);
                return Ok(bytes);
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(FetchError::Io(format!("{}: {e}", path.display()))),
        }
        if self.offline {
            return Err(FetchError::Offline(format!("{} page {}", request.query.source, request.page_index)));
        }
        self.live.fetch_add(1, Ordering::SeqCst);
        let payload = self.inner.fetch(request)?;
        self.store(&key, &payload)
            .map_err(|e| FetchError::Io(format!("{}: {e}", path.display())))?;
        Ok(payload)
    }
}

/// Token bucket allowing `rate` requests per second with bursts up to `rate`.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate_per_sec: f64) -> TokenBucket {
        Self::starting_at(rate_per_sec, Instant::now())
    }

    pub fn starting_at(rate_per_sec: f64, now: Instant) -> TokenBucket {
        let capacity = rate_per_sec.max(1.0);
        TokenBucket {
            rate: rate_per_sec,
            capacity,
            state: Mutex::new((capacity, now)),
        }
    }

    /// Takes a token at `now`, or returns how long to wait for one.
    pub fn try_acquire_at(&self, now: Instant) -> Result<(), Duration> {
        let mut state = self.state.lock().expect("token bucket poisoned");
        let (tokens, last) = *state;
        let elapsed = now.saturating_duration_since(last).as_secs_f64();
        let tokens = (tokens + elapsed * self.rate).min(self.capacity);
        if tokens >= 1.0 {
            *state = (tokens - 1.0, now);
            Ok(())
        } else {
            *state = (tokens, now);
            Err(Duration::from_secs_f64((1.0 - tokens) / self.rate))
        }
    }

    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire_at(Instant::now()) {
            std::thread::sleep(wait);
        }
    }
}

/// How to address one source's HTTP API. Parameter values may use the
/// placeholders `{country}`, `{country_lower}`, `{year_from}`, `{year_to}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    pub page_size_param: String,
    pub cursor_param: String,
    /// Cursor sent with the first request, e.g. `*` for OpenAlex.
    #[serde(default)]
    pub initial_cursor: Option<String>,
}

impl EndpointConfig {
    /// Public endpoints for the two publication APIs. CORDIS and Kohesio
    /// have no paginated JSON API; their pages come from converted exports.
    pub fn default_for(source: Source) -> Option<EndpointConfig> {
        let params = |pairs: &[(&str, &str)]| pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        match source {
            Source::OpenAlex => Some(EndpointConfig {
                base_url: "https://api.openalex.org/works".into(),
                params: params(&[(
                    "filter",
                    "authorships.institutions.country_code:{country_lower},publication_year:{year_from}-{year_to}",
                )]),
                page_size_param: "per-page".into(),
                cursor_param: "cursor".into(),
                initial_cursor: Some("*".into()),
            }),
            Source::OpenAIRE => Some(EndpointConfig {
                base_url: "https://api.openaire.eu/graph/v1/researchProducts".into(),
                params: params(&[
                    ("countryCode", "{country}"),
                    ("fromPublicationDate", "{year_from}-01-01"),
                    ("toPublicationDate", "{year_to}-12-31"),
                    ("type", "publication"),
                ]),
                page_size_param: "pageSize".into(),
                cursor_param: "cursor".into(),
                initial_cursor: Some("*".into()),
            }),
            Source::CORDIS | Source::Kohesio => None,
        }
    }

    pub fn url(&self, request: &PageRequest) -> String {
        let q = &request.query;
        let render = |v: &str| {
            v.replace("{country}", &q.country_code.to_ascii_uppercase())
                .replace("{country_lower}", &q.country_code.to_ascii_lowercase())
                .replace("{year_from}", &q.year_from.to_string())
                .replace("{year_to}", &q.year_to.to_string())
        };
        let mut pairs: Vec<(String, String)> = self.params.iter().map(|(k, v)| (k.clone(), render(v))).collect();
        pairs.push((self.page_size_param.clone(), q.page_size.to_string()));
        if let Some(cursor) = request.cursor.as_ref().or(self.initial_cursor.as_ref()) {
            pairs.push((self.cursor_param.clone(), cursor.clone()));
        }
        let query: Vec<String> = pairs
            .iter()
            .map(|(k, v)| format!("{}={}", percent_encode(k), percent_encode(v)))
            .collect();
        format!("{}?{}", self.base_url, query.join("&"))
    }
}

fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' | b',' | b':' | b'*' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

/// Live HTTP fetcher with one token bucket per source.
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
    endpoints: BTreeMap<Source, EndpointConfig>,
    limiters: BTreeMap<Source, TokenBucket>,
    requests: AtomicUsize,
}

impl HttpFetcher {
    pub fn new(endpoints: BTreeMap<Source, EndpointConfig>, rate_per_sec: f64) -> Result<HttpFetcher, FetchError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(concat!("sti-mapper/", env!("CARGO_PKG_VERSION")))
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| FetchError::Transport(e.to_string()))?;
        let limiters = endpoints.keys().map(|&s| (s, TokenBucket::new(rate_per_sec))).collect();
        Ok(HttpFetcher {
            client,
            endpoints,
            limiters,
            requests: AtomicUsize::new(0),
        })
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, request: &PageRequest) -> Result<Vec<u8>, FetchError> {
        let source = request.query.source;
        let endpoint = self.endpoints.get(&source).ok_or(FetchError::NoEndpoint(source))?;
        if let Some(limiter) = self.limiters.get(&source) {
            limiter.acquire();
        }
        self.requests.fetch_add(1, Ordering::SeqCst);
        let response = self
            .client
            .get(endpoint.url(request))
            .send()
            .map_err(|e| FetchError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(FetchError::Status(status.as_u16()));
        }
        response
            .bytes()
            .map(|b| b.to_vec())
            .map_err(|e| FetchError::Transport(e.to_string()))
    }
}
