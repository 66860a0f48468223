//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use sti_mapper::ingest::{harvest, FixtureFetcher, HarvestQuery, RetryPolicy};
use sti_mapper::model::{Corpus, Source};
use sti_mapper::vocab::{normalize_text, Vocabulary};

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixtures() -> PathBuf {
    crate_dir().join("tests").join("fixtures")
}

pub fn pages(source: Source) -> PathBuf {
    fixtures().join("pages").join(source.slug())
}

pub fn pipeline_config() -> PathBuf {
    fixtures().join("pipeline.json")
}

pub fn vocabulary_path() -> PathBuf {
    crate_dir().join("data").join("sdg13_vocabulary.json")
}

pub fn manifest() -> serde_json::Value {
    let text = std::fs::read_to_string(fixtures().join("manifest.json")).expect("manifest");
    serde_json::from_str(&text).expect("manifest json")
}

/// The page sizes the fixture config uses per source.
pub fn fixture_query(source: Source) -> HarvestQuery {
    let page_size = match source {
        Source::OpenAlex | Source::OpenAIRE => 25,
        Source::CORDIS => 20,
        Source::Kohesio => 10,
    };
    HarvestQuery { page_size, ..HarvestQuery::new(source) }
}

pub fn harvest_fixture(source: Source) -> Corpus {
    let fetcher = FixtureFetcher::new(pages(source)).expect("fixture dir");
    harvest(&fixture_query(source), &fetcher, &RetryPolicy::no_delay(0)).expect("fixture harvest")
}

/// All four fixture sources merged: the 200-document corpus.
pub fn fixture_corpus() -> Corpus {
    Corpus::merge(Source::ALL.map(harvest_fixture)).expect("merge")
}

/// Token-window oracle: every run of whole normalized tokens equal to a
/// normalized surface form, reported as original-text byte offsets.
pub fn naive_matches(vocabulary: &Vocabulary, text: &str) -> BTreeSet<(String, usize, usize)> {
    let norm = normalize_text(text);
    let s = norm.as_str();
    // (start, end) byte span of every token in the normalized text
    let mut spans = Vec::new();
    let mut start = None;
    for (i, b) in s.bytes().enumerate() {
        match (b == b' ', start) {
            (false, None) => start = Some(i),
            (true, Some(st)) => {
                spans.push((st, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(st) = start {
        spans.push((st, s.len()));
    }
    let tokens: Vec<&str> = spans.iter().map(|&(a, b)| &s[a..b]).collect();
    let mut out = BTreeSet::new();
    for (term_id, surfaces) in &vocabulary.terms {
        for surface in surfaces {
            let ns = normalize_text(surface);
            let want: Vec<&str> = ns.tokens().collect();
            if want.is_empty() || want.len() > tokens.len() {
                continue;
            }
            for i in 0..=tokens.len() - want.len() {
                if tokens[i..i + want.len()] == want[..] {
                    let (a, b) = norm.original_span(spans[i].0, spans[i + want.len() - 1].1);
                    out.insert((term_id.clone(), a, b));
                }
            }
        }
    }
    out
}

/// `x (x+1) ... (x+n-1)`.
fn rising(x: f64, n: u32) -> f64 {
    (0..n).map(|i| x + f64::from(i)).product()
}

/// Exact collapsed LDA posterior over every assignment of the tokens in
/// `docs` (word indices) to `k` topics, in lexicographic state order with
/// the first token as the most significant digit.
pub fn exact_lda_posterior(docs: &[Vec<usize>], vocab: usize, k: usize, alpha: f64, beta: f64) -> Vec<(Vec<usize>, f64)> {
    let tokens: Vec<(usize, usize)> = docs.iter().enumerate().flat_map(|(d, doc)| doc.iter().map(move |&w| (d, w))).collect();
    let t = tokens.len();
    let states = k.pow(t as u32);
    let mut out = Vec::with_capacity(states);
    for code in 0..states {
        let mut z = vec![0; t];
        let mut c = code;
        for slot in z.iter_mut().rev() {
            *slot = c % k;
            c /= k;
        }
        let mut ndk = vec![vec![0u32; k]; docs.len()];
        let mut nkw = vec![vec![0u32; vocab]; k];
        for (&(d, w), &topic) in tokens.iter().zip(&z) {
            ndk[d][topic] += 1;
            nkw[topic][w] += 1;
        }
        // Dirichlet-multinomial marginals; the Gamma ratios become rising
        // factorials and constant factors cancel in the normalization.
        let mut p = 1.0;
        for row in &ndk {
            let n: u32 = row.iter().sum();
            p *= row.iter().map(|&c| rising(alpha, c)).product::<f64>() / rising(k as f64 * alpha, n);
        }
        for row in &nkw {
            let n: u32 = row.iter().sum();
            p *= row.iter().map(|&c| rising(beta, c)).product::<f64>() / rising(vocab as f64 * beta, n);
        }
        out.push((z, p));
    }
    let total: f64 = out.iter().map(|(_, p)| p).sum();
    out.into_iter().map(|(z, p)| (z, p / total)).collect()
}

/// Mean silhouette under Euclidean distance.
pub fn silhouette(points: &[[f64; 2]], labels: &[usize]) -> f64 {
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let clusters: BTreeSet<usize> = labels.iter().copied().collect();
    let mut total = 0.0;
    for (i, &p) in points.iter().enumerate() {
        let mean_to = |c: usize| {
            let ds: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i && labels[j] == c)
                .map(|(_, &q)| dist(p, q))
                .collect();
            ds.iter().sum::<f64>() / ds.len() as f64
        };
        let a = mean_to(labels[i]);
        let b = clusters.iter().filter(|&&c| c != labels[i]).map(|&c| mean_to(c)).fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / points.len() as f64
}

pub struct Clusters {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

pub fn tsne_clusters() -> Clusters {
    let text = std::fs::read_to_string(fixtures().join("tsne_clusters.json")).expect("cluster fixture");
    let v: serde_json::Value = serde_json::from_str(&text).expect("json");
    Clusters {
        points: serde_json::from_value(v["points"].clone()).expect("points"),
        labels: serde_json::from_value(v["labels"].clone()).expect("labels"),
    }
}

/// Runs the CLI in-process.
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = sti_mapper::cli::run(std::iter::once("sti-mapper").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).expect("utf8"), String::from_utf8(err).expect("utf8"))
}

pub const GOLDEN_FILES: [&str; 6] = [
    "summary.csv",
    "panel_histogram.csv",
    "topic_model.json",
    "layout.csv",
    "fig1_topics.svg",
    "fig2_panels.svg",
];

pub fn golden_dir() -> PathBuf {
    fixtures().join("golden")
}
