//! Domain types shared by every stage: records, corpora, tag results, plus
//! DOI normalization and share arithmetic.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The four open data sources, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    OpenAlex,
    OpenAIRE,
    CORDIS,
    Kohesio,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::OpenAlex, Source::OpenAIRE, Source::CORDIS, Source::Kohesio];

    /// Lowercase slug used in file names, config keys and record id prefixes.
    pub fn slug(self) -> &'static str {
        match self {
            Source::OpenAlex => "openalex",
            Source::OpenAIRE => "openaire",
            Source::CORDIS => "cordis",
            Source::Kohesio => "kohesio",
        }
    }

    pub fn kind(self) -> Kind {
        match self {
            Source::OpenAlex | Source::OpenAIRE => Kind::Publication,
            Source::CORDIS | Source::Kohesio => Kind::Project,
        }
    }

    /// Source owning a canonical record id, read off its prefix.
    pub fn from_record_id(record_id: &str) -> Option<Source> {
        let (prefix, _) = record_id.split_once(':')?;
        prefix.parse().ok()
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Source::OpenAlex => "OpenAlex",
            Source::OpenAIRE => "OpenAIRE",
            Source::CORDIS => "CORDIS",
            Source::Kohesio => "Kohesio",
        };
        f.write_str(name)
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Source::ALL
            .into_iter()
            .find(|src| src.slug().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown source `{s}` (expected one of openalex, openaire, cordis, kohesio)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Publication,
    Project,
}

/// One publication or project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StiRecord {
    pub record_id: String,
    pub source: Source,
    pub kind: Kind,
    pub title: String,
    pub body: String,
    pub year: i32,
    pub country_codes: BTreeSet<String>,
    pub doi: Option<String>,
}

impl StiRecord {
    /// Text that tagging and classification operate on.
    pub fn text(&self) -> String {
        let mut text = String::with_capacity(self.title.len() + self.body.len() + 1);
        text.push_str(&self.title);
        text.push('\n');
        text.push_str(&self.body);
        text
    }

    /// True when any affiliation or beneficiary country matches.
    pub fn in_country(&self, country_code: &str) -> bool {
        self.country_codes.iter().any(|c| c.eq_ignore_ascii_case(country_code))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("empty record id at line {0}")]
    EmptyId(usize),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How one source's records were obtained.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchMetadata {
    /// RFC 3339 timestamp of the harvest, absent in fixture mode.
    pub fetched_at: Option<String>,
    pub query: String,
    pub page_count: usize,
    /// Records kept from each page after filtering.
    pub page_sizes: Vec<usize>,
}

/// An ordered, id-unique collection of records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<StiRecord>,
    pub provenance: BTreeMap<Source, FetchMetadata>,
}

impl Corpus {
    pub fn new(records: Vec<StiRecord>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.record_id.is_empty() {
                return Err(CorpusError::EmptyId(i + 1));
            }
            if !seen.insert(r.record_id.as_str()) {
                return Err(CorpusError::DuplicateId(r.record_id.clone()));
            }
        }
        Ok(Corpus {
            records,
            provenance: BTreeMap::new(),
        })
    }

    pub fn records(&self) -> &[StiRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count_by_source(&self) -> BTreeMap<Source, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.source).or_insert(0) += 1;
        }
        counts
    }

    /// Concatenates corpora, keeping provenance of all parts.
    pub fn merge(parts: impl IntoIterator<Item = Corpus>) -> Result<Corpus, CorpusError> {
        let mut records = Vec::new();
        let mut provenance = BTreeMap::new();
        for part in parts {
            records.extend(part.records);
            provenance.extend(part.provenance);
        }
        let mut corpus = Corpus::new(records)?;
        corpus.provenance = provenance;
        Ok(corpus)
    }

    /// Reads the canonical newline-delimited JSON format.
    pub fn read_jsonl(reader: impl BufRead) -> Result<Corpus, CorpusError> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: StiRecord =
                serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: i + 1, source })?;
            records.push(record);
        }
        Corpus::new(records)
    }

    /// Writes one compact JSON object per line, LF terminated.
    pub fn write_jsonl(&self, mut writer: impl Write) -> Result<(), CorpusError> {
        for r in &self.records {
            serde_json::to_writer(&mut writer, r).map_err(std::io::Error::from)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Outcome of controlled-vocabulary tagging for one record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdgTagResult {
    pub record_id: String,
    /// `(term_id, start, end)` with byte offsets into the record text.
    pub matched_terms: Vec<(String, usize, usize)>,
    pub matched_rules: Vec<String>,
    pub is_sdg13: bool,
}

/// Strips URL prefixes and whitespace and lowercases a DOI. Returns `None`
/// when no `10.`-prefixed DOI is present.
pub fn normalize_doi(raw: &str) -> Option<String> {
    let lower = raw.trim().to_lowercase();
    let start = find_doi_start(&lower)?;
    let doi = lower[start..].trim();
    let (registrant, suffix) = doi.split_once('/')?;
    if registrant.len() <= 3 || suffix.is_empty() || doi.chars().any(char::is_whitespace) {
        return None;
    }
    Some(doi.to_string())
}

fn find_doi_start(s: &str) -> Option<usize> {
    // first `10.` that begins the string or follows a separator
    s.match_indices("10.").map(|(i, _)| i).find(|&i| {
        let prev = s[..i].chars().next_back();
        let digits = s[i + 3..].chars().take_while(char::is_ascii_digit).count();
        digits > 0
            && s[i + 3 + digits..].starts_with('/')
            && prev.is_none_or(|c| matches!(c, '/' | ':' | ' '))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ShareError {
    #[error("share of {numerator} over a zero denominator")]
    ZeroDenominator { numerator: u64 },
    #[error("numerator {numerator} exceeds denominator {denominator}")]
    NumeratorTooLarge { numerator: u64, denominator: u64 },
}

/// A percentage held exactly in tenths of a percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Share(u32);

impl Share {
    pub fn from_tenths(tenths: u32) -> Share {
        Share(tenths)
    }

    pub fn tenths(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl fmt::Display for Share {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl FromStr for Share {
    type Err = String;

    /// Accepts exactly one decimal place, as printed by `Display`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("`{s}` is not a percentage with one decimal");
        let (whole, frac) = s.split_once('.').ok_or_else(bad)?;
        if frac.len() != 1 || whole.is_empty() || !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: u32 = whole.parse().map_err(|_| bad())?;
        let frac: u32 = frac.parse().map_err(|_| bad())?;
        whole.checked_mul(10).and_then(|w| w.checked_add(frac)).map(Share).ok_or_else(bad)
    }
}

impl Serialize for Share {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Share {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `100 * numerator / denominator`, rounded half away from zero to one
/// decimal, computed in integer arithmetic.
pub fn share(numerator: u64, denominator: u64) -> Result<Share, ShareError> {
    if denominator == 0 {
        return Err(ShareError::ZeroDenominator { numerator });
    }
    if numerator > denominator {
        return Err(ShareError::NumeratorTooLarge { numerator, denominator });
    }
    let num = u128::from(numerator) * 1000 * 2 + u128::from(denominator);
    let tenths = num / (2 * u128::from(denominator));
    Ok(Share(tenths as u32))
}
