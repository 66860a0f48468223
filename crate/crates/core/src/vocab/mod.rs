//! Controlled-vocabulary tagging.
//!
//! A [`Vocabulary`] holds surface forms per term and boolean rules over
//! document-level term presence. Compiling it yields a [`CompiledMatcher`]
//! which finds every token-aligned occurrence of every surface form; rules
//! are then evaluated on the set of terms found.
//!
//! ```
//! use sti_mapper::vocab::{CompiledMatcher, Vocabulary};
//!
//! let vocab: Vocabulary = serde_json::from_str(r#"{
//!     "sdg_id": "SDG13",
//!     "terms": {"t1": ["climate change"], "t2": ["adaptation"]},
//!     "rules": [{"rule_id": "r1", "all_of": ["t1"], "any_of": [], "none_of": []}]
//! }"#).unwrap();
//! vocab.validate().unwrap();
//! let matcher = CompiledMatcher::new(&vocab);
//! let hits = matcher.match_text("Climate change adaptation");
//! assert_eq!((hits[0].term_id.as_str(), hits[0].start, hits[0].end), ("t1", 0, 14));
//! ```

mod automaton;
mod normalize;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{Corpus, SdgTagResult, Source};
use automaton::Automaton;
pub use normalize::{normalize_text, NormalizedText};

#[derive(Debug, thiserror::Error)]
pub enum VocabError {
    #[error("cannot read vocabulary {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("vocabulary {path} does not match the schema: {source}")]
    Schema {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("vocabulary defines no terms")]
    NoTerms,
    #[error("term `{term_id}` has no surface forms")]
    NoSurfaceForms { term_id: String },
    #[error("term `{term_id}` has a surface form that is empty after normalization: {surface:?}")]
    EmptySurface { term_id: String, surface: String },
    #[error("rule `{rule_id}` references unknown term `{term_id}`")]
    DanglingTerm { rule_id: String, term_id: String },
    #[error("rule `{rule_id}` requires nothing (all_of and any_of are both empty)")]
    EmptyRule { rule_id: String },
    #[error("rule `{rule_id}` lists term `{term_id}` in more than one clause")]
    OverlappingClauses { rule_id: String, term_id: String },
    #[error("duplicate rule id `{0}`")]
    DuplicateRule(String),
}

/// Boolean co-occurrence rule over document-level term presence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRule {
    pub rule_id: String,
    #[serde(default)]
    pub all_of: BTreeSet<String>,
    #[serde(default)]
    pub any_of: BTreeSet<String>,
    #[serde(default)]
    pub none_of: BTreeSet<String>,
}

impl MatchRule {
    pub fn is_satisfied(&self, found: &BTreeSet<String>) -> bool {
        self.all_of.iter().all(|t| found.contains(t))
            && (self.any_of.is_empty() || self.any_of.iter().any(|t| found.contains(t)))
            && !self.none_of.iter().any(|t| found.contains(t))
    }

    fn validate(&self, terms: &BTreeMap<String, Vec<String>>) -> Result<(), VocabError> {
        if self.all_of.is_empty() && self.any_of.is_empty() {
            return Err(VocabError::EmptyRule {
                rule_id: self.rule_id.clone(),
            });
        }
        let clauses = [&self.all_of, &self.any_of, &self.none_of];
        for (i, clause) in clauses.iter().enumerate() {
            for term_id in clause.iter() {
                if !terms.contains_key(term_id) {
                    return Err(VocabError::DanglingTerm {
                        rule_id: self.rule_id.clone(),
                        term_id: term_id.clone(),
                    });
                }
                if clauses[i + 1..].iter().any(|other| other.contains(term_id)) {
                    return Err(VocabError::OverlappingClauses {
                        rule_id: self.rule_id.clone(),
                        term_id: term_id.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub sdg_id: String,
    pub terms: BTreeMap<String, Vec<String>>,
    pub rules: Vec<MatchRule>,
}

impl Vocabulary {
    pub fn validate(&self) -> Result<(), VocabError> {
        if self.terms.is_empty() {
            return Err(VocabError::NoTerms);
        }
        for (term_id, surfaces) in &self.terms {
            if surfaces.is_empty() {
                return Err(VocabError::NoSurfaceForms {
                    term_id: term_id.clone(),
                });
            }
            if let Some(s) = surfaces.iter().find(|s| normalize_text(s).is_empty()) {
                return Err(VocabError::EmptySurface {
                    term_id: term_id.clone(),
                    surface: s.clone(),
                });
            }
        }
        let mut ids = BTreeSet::new();
        for rule in &self.rules {
            if !ids.insert(rule.rule_id.as_str()) {
                return Err(VocabError::DuplicateRule(rule.rule_id.clone()));
            }
            rule.validate(&self.terms)?;
        }
        Ok(())
    }

    /// Rule ids satisfied by `found_terms`, in vocabulary order.
    pub fn evaluate_rules(&self, found_terms: &BTreeSet<String>) -> Vec<String> {
        evaluate_rules(self, found_terms)
    }
}

/// Reads and validates a vocabulary file.
pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Vocabulary, VocabError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| VocabError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let vocab: Vocabulary = serde_json::from_slice(&bytes).map_err(|source| VocabError::Schema {
        path: path.to_path_buf(),
        source,
    })?;
    vocab.validate()?;
    Ok(vocab)
}

pub fn evaluate_rules(vocabulary: &Vocabulary, found_terms: &BTreeSet<String>) -> Vec<String> {
    vocabulary
        .rules
        .iter()
        .filter(|r| r.is_satisfied(found_terms))
        .map(|r| r.rule_id.clone())
        .collect()
}

/// A term occurrence with byte offsets into the original text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermMatch {
    pub term_id: String,
    pub start: usize,
    pub end: usize,
}

/// A term occurrence in normalized-text coordinates; `term` indexes
/// [`CompiledMatcher::term_ids`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NormalizedMatch {
    pub term: usize,
    pub start: usize,
    pub end: usize,
}

/// Multi-pattern matcher over normalized surface forms.
#[derive(Debug, Clone)]
pub struct CompiledMatcher {
    automaton: Automaton,
    // pattern index -> term index
    pattern_terms: Vec<usize>,
    term_ids: Vec<String>,
}

impl CompiledMatcher {
    pub fn new(vocabulary: &Vocabulary) -> CompiledMatcher {
        Self::from_terms(vocabulary.terms.iter().map(|(id, forms)| (id.as_str(), forms.as_slice())))
    }

    /// Builds a matcher from `(term_id, surface forms)` pairs. Surface forms
    /// that normalize to the empty string are skipped.
    pub fn from_terms<'a, S: AsRef<str> + 'a>(terms: impl IntoIterator<Item = (&'a str, &'a [S])>) -> CompiledMatcher {
        let mut term_ids = Vec::new();
        let mut patterns = Vec::new();
        let mut pattern_terms = Vec::new();
        for (term, (term_id, forms)) in terms.into_iter().enumerate() {
            term_ids.push(term_id.to_string());
            for form in forms {
                let normalized = normalize_text(form.as_ref());
                if normalized.is_empty() {
                    continue;
                }
                patterns.push(normalized.as_str().to_string());
                pattern_terms.push(term);
            }
        }
        CompiledMatcher {
            automaton: Automaton::new(&patterns),
            pattern_terms,
            term_ids,
        }
    }

    pub fn term_ids(&self) -> &[String] {
        &self.term_ids
    }

    /// Token-aligned matches in normalized coordinates, sorted and deduplicated.
    pub fn find_normalized(&self, text: &NormalizedText) -> Vec<NormalizedMatch> {
        let bytes = text.as_str().as_bytes();
        let mut found: Vec<NormalizedMatch> = self
            .automaton
            .find_overlapping(bytes)
            .into_iter()
            .filter(|m| {
                (m.start == 0 || bytes[m.start - 1] == b' ') && (m.end == bytes.len() || bytes[m.end] == b' ')
            })
            .map(|m| NormalizedMatch {
                term: self.pattern_terms[m.pattern as usize],
                start: m.start,
                end: m.end,
            })
            .collect();
        found.sort_unstable();
        found.dedup();
        found
    }

    /// Every token-aligned occurrence of every surface form, with offsets
    /// into `text`.
    pub fn match_text(&self, text: &str) -> Vec<TermMatch> {
        let normalized = normalize_text(text);
        let mut out: Vec<TermMatch> = self
            .find_normalized(&normalized)
            .into_iter()
            .map(|m| {
                let (start, end) = normalized.original_span(m.start, m.end);
                TermMatch {
                    term_id: self.term_ids[m.term].clone(),
                    start,
                    end,
                }
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Distinct term ids present in `text`.
    pub fn found_terms(&self, text: &str) -> BTreeSet<String> {
        let normalized = normalize_text(text);
        self.find_normalized(&normalized)
            .into_iter()
            .map(|m| self.term_ids[m.term].clone())
            .collect()
    }
}

pub fn match_text(matcher: &CompiledMatcher, text: &str) -> Vec<TermMatch> {
    matcher.match_text(text)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub total: u64,
    pub tagged: u64,
}

/// Per-source `(total, tagged)` counts.
pub type TagSummary = BTreeMap<Source, SourceCounts>;

/// Compiled vocabulary ready to tag records.
#[derive(Debug, Clone)]
pub struct Tagger<'v> {
    vocabulary: &'v Vocabulary,
    matcher: CompiledMatcher,
}

impl<'v> Tagger<'v> {
    pub fn new(vocabulary: &'v Vocabulary) -> Self {
        Tagger {
            vocabulary,
            matcher: CompiledMatcher::new(vocabulary),
        }
    }

    pub fn tag(&self, record_id: &str, text: &str) -> SdgTagResult {
        let matches = self.matcher.match_text(text);
        let found: BTreeSet<String> = matches.iter().map(|m| m.term_id.clone()).collect();
        let matched_rules = evaluate_rules(self.vocabulary, &found);
        SdgTagResult {
            record_id: record_id.to_string(),
            matched_terms: matches.into_iter().map(|m| (m.term_id, m.start, m.end)).collect(),
            is_sdg13: !matched_rules.is_empty(),
            matched_rules,
        }
    }
}

/// Tags every record (title + newline + body). Results are sorted by
/// record id; the summary holds one entry per source present in the corpus.
pub fn tag_corpus(corpus: &Corpus, vocabulary: &Vocabulary) -> (Vec<SdgTagResult>, TagSummary) {
    let tagger = Tagger::new(vocabulary);
    let mut summary = TagSummary::new();
    let mut results = Vec::with_capacity(corpus.len());
    for record in corpus.records() {
        let result = tagger.tag(&record.record_id, &record.text());
        let counts = summary.entry(record.source).or_default();
        counts.total += 1;
        counts.tagged += u64::from(result.is_sdg13);
        results.push(result);
    }
    results.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    (results, summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab(terms: &[(&str, &[&str])], rules: Vec<MatchRule>) -> Vocabulary {
        Vocabulary {
            sdg_id: "SDG13".into(),
            terms: terms
                .iter()
                .map(|(id, forms)| (id.to_string(), forms.iter().map(|s| s.to_string()).collect()))
                .collect(),
            rules,
        }
    }

    fn rule(id: &str, all: &[&str], any: &[&str], none: &[&str]) -> MatchRule {
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        MatchRule {
            rule_id: id.into(),
            all_of: set(all),
            any_of: set(any),
            none_of: set(none),
        }
    }

    fn found(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn boundary_rejects_inner_token_match() {
        let v = vocab(&[("t1", &["climate"])], vec![]);
        assert!(CompiledMatcher::new(&v).match_text("to acclimate quickly").is_empty());
        assert!(CompiledMatcher::new(&v).match_text("climates").is_empty());
    }

    #[test]
    fn multi_token_case_folded_match() {
        let v = vocab(&[("t1", &["climate change"])], vec![]);
        let hits = CompiledMatcher::new(&v).match_text("Climate change adaptation");
        assert_eq!(
            hits,
            vec![TermMatch {
                term_id: "t1".into(),
                start: 0,
                end: 14
            }]
        );
    }

    #[test]
    fn matches_span_punctuation_and_newlines() {
        let v = vocab(&[("co2", &["CO2 emissions"]), ("ghg", &["greenhouse gas"])], vec![]);
        let text = "Cutting CO2-emissions\nand Greenhouse  gas.";
        let hits = CompiledMatcher::new(&v).match_text(text);
        let spans: Vec<&str> = hits.iter().map(|m| &text[m.start..m.end]).collect();
        assert_eq!(spans, vec!["CO2-emissions", "Greenhouse  gas"]);
    }

    #[test]
    fn overlapping_terms_all_reported() {
        let v = vocab(&[("a", &["sea level"]), ("b", &["sea level rise"]), ("c", &["level rise"])], vec![]);
        let terms = CompiledMatcher::new(&v).found_terms("global sea level rise");
        assert_eq!(terms, found(&["a", "b", "c"]));
    }

    #[test]
    fn rule_examples() {
        let r = rule("r", &["greenhouse_gas"], &[], &[]);
        assert!(r.is_satisfied(&found(&["greenhouse_gas"])));
        let r = rule("r", &["emission"], &["reduction", "mitigation"], &[]);
        assert!(!r.is_satisfied(&found(&["emission"])));
        assert!(r.is_satisfied(&found(&["emission", "mitigation"])));
        let r = rule("r", &["climate"], &[], &["organizational_climate"]);
        assert!(!r.is_satisfied(&found(&["climate", "organizational_climate"])));
    }

    #[test]
    fn validation_errors() {
        let v = vocab(&[("t1", &["x"])], vec![rule("r1", &["t999"], &[], &[])]);
        let err = v.validate().unwrap_err();
        assert!(matches!(&err, VocabError::DanglingTerm { rule_id, term_id } if rule_id == "r1" && term_id == "t999"));
        assert!(err.to_string().contains("t999"));

        let v = vocab(&[], vec![rule("r1", &["t1"], &[], &[])]);
        assert!(matches!(v.validate(), Err(VocabError::NoTerms)));

        let v = vocab(&[("t1", &["x"])], vec![rule("r1", &[], &[], &["t1"])]);
        assert!(matches!(v.validate(), Err(VocabError::EmptyRule { .. })));

        let v = vocab(&[("t1", &["x"])], vec![rule("r1", &["t1"], &["t1"], &[])]);
        assert!(matches!(v.validate(), Err(VocabError::OverlappingClauses { .. })));

        let v = vocab(&[("t1", &["--"])], vec![]);
        assert!(matches!(v.validate(), Err(VocabError::EmptySurface { .. })));

        let v = vocab(&[("t1", &["x"])], vec![rule("r1", &["t1"], &[], &[]), rule("r1", &["t1"], &[], &[])]);
        assert!(matches!(v.validate(), Err(VocabError::DuplicateRule(_))));
    }

    #[test]
    fn schema_error_names_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.json");
        std::fs::write(&path, r#"{"sdg_id": "SDG13", "terms": {"t1": ["x"]}}"#).unwrap();
        let err = load_vocabulary(&path).unwrap_err();
        assert!(err.to_string().contains("rules"), "{err}");
        assert!(matches!(load_vocabulary(dir.path().join("nope.json")), Err(VocabError::Io { .. })));
    }

    #[test]
    fn tag_empty_corpus() {
        let v = vocab(&[("t1", &["x"])], vec![rule("r1", &["t1"], &[], &[])]);
        let (results, summary) = tag_corpus(&Corpus::default(), &v);
        assert!(results.is_empty());
        assert!(summary.is_empty());
    }

    proptest! {
        #[test]
        fn case_invariance(text in "[a-zA-Z ,.-]{0,80}") {
            let v = vocab(&[("a", &["sea level"]), ("b", &["ice"]), ("c", &["co"]), ("d", &["Level Ice"])], vec![]);
            let m = CompiledMatcher::new(&v);
            let lower = m.find_normalized(&normalize_text(&text));
            let upper = m.find_normalized(&normalize_text(&text.to_uppercase()));
            prop_assert_eq!(lower, upper);
        }

        #[test]
        fn rules_monotone_without_none_of(
            base in prop::collection::btree_set(0usize..6, 0..6),
            extra in prop::collection::btree_set(0usize..6, 0..6),
            all in prop::collection::btree_set(0usize..3, 0..3),
            any in prop::collection::btree_set(3usize..6, 0..3),
        ) {
            let name = |i: &usize| format!("t{i}");
            let r = MatchRule {
                rule_id: "r".into(),
                all_of: all.iter().map(name).collect(),
                any_of: any.iter().map(name).collect(),
                none_of: BTreeSet::new(),
            };
            let small: BTreeSet<String> = base.iter().map(name).collect();
            let large: BTreeSet<String> = base.union(&extra).map(name).collect();
            prop_assert!(!r.is_satisfied(&small) || r.is_satisfied(&large));
        }
    }
}
