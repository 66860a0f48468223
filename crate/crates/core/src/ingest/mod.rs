//! Harvesting records from the four sources.
//!
//! [`harvest`] walks a source page by page through a [`Fetcher`], parses
//! every item, and keeps the records attached to the target country within
//! the year window. Fetchers are interchangeable: [`FixtureFetcher`] reads
//! bundled page files, [`HttpFetcher`] talks to live APIs, and
//! [`CachingFetcher`] stores raw payloads on disk in front of either.

mod export;
mod fetch;
mod parse;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{Corpus, CorpusError, FetchMetadata, Source, StiRecord};

pub use export::{cordis_pages_from_export, kohesio_pages_from_csv, ExportError};
pub use fetch::{CachingFetcher, EndpointConfig, FetchError, Fetcher, FixtureFetcher, HttpFetcher, PageRequest, TokenBucket};
pub use parse::{
    decode_page, parse_cordis_project, parse_item, parse_kohesio_project, parse_openalex_work, parse_openaire_result,
    reconstruct_inverted_abstract, DecodedPage, ParseError,
};

/// Largest page size each source accepts.
pub fn max_page_size(source: Source) -> usize {
    match source {
        Source::OpenAlex => 200,
        Source::OpenAIRE => 100,
        Source::CORDIS => 1000,
        Source::Kohesio => 100,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestQuery {
    pub source: Source,
    pub country_code: String,
    pub year_from: i32,
    pub year_to: i32,
    pub page_size: usize,
    pub max_records: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("year_from {year_from} is after year_to {year_to}")]
    YearRange { year_from: i32, year_to: i32 },
    #[error("page size {page_size} outside 1..={max} for {origin}")]
    PageSize { origin: Source, page_size: usize, max: usize },
    #[error("country code {0:?} is not ISO 3166 alpha-2")]
    Country(String),
}

impl HarvestQuery {
    /// Denmark, 2014 to 2019, largest page size.
    pub fn new(source: Source) -> HarvestQuery {
        HarvestQuery {
            source,
            country_code: "DK".into(),
            year_from: 2014,
            year_to: 2019,
            page_size: max_page_size(source),
            max_records: None,
        }
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if self.year_from > self.year_to {
            return Err(QueryError::YearRange {
                year_from: self.year_from,
                year_to: self.year_to,
            });
        }
        let max = max_page_size(self.source);
        if !(1..=max).contains(&self.page_size) {
            return Err(QueryError::PageSize {
                origin: self.source,
                page_size: self.page_size,
                max,
            });
        }
        if self.country_code.len() != 2 || !self.country_code.bytes().all(|b| b.is_ascii_alphabetic()) {
            return Err(QueryError::Country(self.country_code.clone()));
        }
        Ok(())
    }

    /// Stable textual form of the query, used for cache keys and provenance.
    pub fn canonical(&self) -> String {
        format!(
            "country={}&page_size={}&source={}&year_from={}&year_to={}",
            self.country_code.to_ascii_uppercase(),
            self.page_size,
            self.source.slug(),
            self.year_from,
            self.year_to
        )
    }

    /// Country and year filter.
    pub fn accepts(&self, record: &StiRecord) -> bool {
        record.in_country(&self.country_code) && (self.year_from..=self.year_to).contains(&record.year)
    }
}

/// A fetched page before its items are parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePage {
    pub raw_payload: Vec<u8>,
    /// Absent on the final page.
    pub cursor: Option<String>,
    pub records_in_page: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        RetryPolicy {
            max_retries,
            base_delay: Duration::ZERO,
        }
    }

    fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }

    /// Runs `op`, retrying retryable errors with exponential backoff.
    /// Returns the last error and the number of attempts made.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, FetchError>) -> Result<T, (FetchError, u32)> {
        let mut attempt = 0;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    std::thread::sleep(self.delay(attempt));
                    attempt += 1;
                }
                Err(e) => return Err((e, attempt + 1)),
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarvestError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("{origin} page {page_index}: fetch failed after {attempts} attempt(s): {error}")]
    Fetch {
        origin: Source,
        page_index: usize,
        attempts: u32,
        error: FetchError,
    },
    #[error("{origin} page {page_index}: {error}")]
    Parse {
        origin: Source,
        page_index: usize,
        error: ParseError,
    },
    #[error("{origin} page {page_index}: cursor {cursor:?} did not advance")]
    StuckCursor {
        origin: Source,
        page_index: usize,
        cursor: String,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Fetches and parses one page.
pub fn fetch_page(fetcher: &impl Fetcher, request: &PageRequest, retry: &RetryPolicy) -> Result<(SourcePage, Vec<StiRecord>), HarvestError> {
    let source = request.query.source;
    let page_index = request.page_index;
    let payload = retry
        .run(|| fetcher.fetch(request))
        .map_err(|(error, attempts)| HarvestError::Fetch {
            origin: source,
            page_index,
            attempts,
            error,
        })?;
    let parse_err = |error| HarvestError::Parse { origin: source, page_index, error };
    let decoded = decode_page(source, &payload).map_err(parse_err)?;
    let records = decoded
        .items
        .iter()
        .map(|item| parse_item(source, item))
        .collect::<Result<Vec<_>, _>>()
        .map_err(parse_err)?;
    let page = SourcePage {
        raw_payload: payload,
        cursor: decoded.next_cursor,
        records_in_page: records.len(),
    };
    Ok((page, records))
}

/// Pages through one source until the cursor runs out or `max_records`
/// filtered records are collected. Any fetch or parse failure aborts.
pub fn harvest(query: &HarvestQuery, fetcher: &impl Fetcher, retry: &RetryPolicy) -> Result<Corpus, HarvestError> {
    query.validate()?;
    let cap = query.max_records.unwrap_or(usize::MAX);
    let mut records = Vec::new();
    let mut meta = FetchMetadata {
        fetched_at: None,
        query: query.canonical(),
        page_count: 0,
        page_sizes: Vec::new(),
    };
    let mut cursor: Option<String> = None;
    while records.len() < cap {
        let request = PageRequest {
            query: query.clone(),
            cursor: cursor.clone(),
            page_index: meta.page_count,
        };
        let (page, parsed) = fetch_page(fetcher, &request, retry)?;
        let before = records.len();
        records.extend(parsed.into_iter().filter(|r| query.accepts(r)).take(cap - before));
        meta.page_sizes.push(records.len() - before);
        meta.page_count += 1;
        match page.cursor {
            None => break,
            Some(next) if Some(&next) == cursor.as_ref() => {
                return Err(HarvestError::StuckCursor {
                    origin: query.source,
                    page_index: request.page_index,
                    cursor: next,
                })
            }
            next => cursor = next,
        }
    }
    let mut corpus = Corpus::new(records)?;
    corpus.provenance.insert(query.source, meta);
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Pages(Vec<String>);

    impl Fetcher for Pages {
        fn fetch(&self, request: &PageRequest) -> Result<Vec<u8>, FetchError> {
            Ok(self.0[request.page_index].clone().into_bytes())
        }
    }

    fn work(id: usize, year: i32, country: &str) -> String {
        format!(
            r#"{{"id": "W{id}", "title": "t{id}", "publication_year": {year}, "authorships": [{{"institutions": [{{"country_code": "{country}"}}]}}]}}"#
        )
    }

    fn page(works: &[String], next: Option<&str>) -> String {
        let next = next.map_or("null".to_string(), |c| format!("\"{c}\""));
        format!(r#"{{"meta": {{"next_cursor": {next}}}, "results": [{}]}}"#, works.join(","))
    }

    #[test]
    fn filters_country_and_year() {
        let fetcher = Pages(vec![
            page(&[work(1, 2015, "DK"), work(2, 2013, "DK"), work(3, 2016, "SE")], Some("c1")),
            page(&[work(4, 2019, "dk"), work(5, 2020, "DK")], None),
        ]);
        let corpus = harvest(&HarvestQuery::new(Source::OpenAlex), &fetcher, &RetryPolicy::no_delay(0)).unwrap();
        let ids: Vec<&str> = corpus.records().iter().map(|r| r.record_id.as_str()).collect();
        assert_eq!(ids, ["openalex:W1", "openalex:W4"]);
        let meta = &corpus.provenance[&Source::OpenAlex];
        assert_eq!((meta.page_count, meta.page_sizes.clone()), (2, vec![1, 1]));
    }

    #[test]
    fn stuck_cursor_is_an_error() {
        let fetcher = Pages(vec![page(&[], Some("same")), page(&[], Some("same"))]);
        let err = harvest(&HarvestQuery::new(Source::OpenAlex), &fetcher, &RetryPolicy::no_delay(0)).unwrap_err();
        assert!(matches!(err, HarvestError::StuckCursor { page_index: 1, .. }));
    }

    #[test]
    fn malformed_page_carries_excerpt() {
        let fetcher = Pages(vec!["not json at all".into()]);
        let err = harvest(&HarvestQuery::new(Source::OpenAlex), &fetcher, &RetryPolicy::no_delay(0)).unwrap_err();
        assert!(err.to_string().contains("not json at all"), "{err}");
    }

    #[test]
    fn transport_failure_reports_page_after_bounded_retries() {
        struct Down(AtomicUsize);
        impl Fetcher for Down {
            fn fetch(&self, _: &PageRequest) -> Result<Vec<u8>, FetchError> {
                self.0.fetch_add(1, Ordering::SeqCst);
                Err(FetchError::Status(503))
            }
        }
        let down = Down(AtomicUsize::new(0));
        let err = harvest(&HarvestQuery::new(Source::OpenAlex), &down, &RetryPolicy::no_delay(3)).unwrap_err();
        assert!(matches!(err, HarvestError::Fetch { page_index: 0, attempts: 4, .. }));
        assert_eq!(down.0.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn non_retryable_error_fails_fast() {
        let policy = RetryPolicy::no_delay(3);
        let calls = AtomicUsize::new(0);
        let result: Result<(), _> = policy.run(|| {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(FetchError::Status(404))
        });
        assert_eq!(result.unwrap_err().1, 1);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn default_backoff_schedule() {
        let p = RetryPolicy::default();
        let delays: Vec<u64> = (0..p.max_retries).map(|r| p.delay(r).as_secs()).collect();
        assert_eq!(delays, [1, 2, 4]);
    }

    #[test]
    fn query_validation() {
        let mut q = HarvestQuery::new(Source::OpenAIRE);
        assert!(q.validate().is_ok());
        q.page_size = 101;
        assert!(matches!(q.validate(), Err(QueryError::PageSize { max: 100, .. })));
        q.page_size = 0;
        assert!(q.validate().is_err());
        let mut q = HarvestQuery::new(Source::CORDIS);
        q.year_from = 2020;
        assert!(matches!(q.validate(), Err(QueryError::YearRange { .. })));
        q.year_from = 2014;
        q.country_code = "DNK".into();
        assert!(matches!(q.validate(), Err(QueryError::Country(_))));
    }
}
