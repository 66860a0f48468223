//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.
//!
//! Each token's topic is resampled in turn from
//!
//! ```text
//! p(z = k | rest) ∝ (n_dk + alpha) (n_kw + beta) / (n_k + V beta)
//! ```
//!
//! with the token's own assignment removed from the counts. After the last
//! sweep the point estimates are
//! `phi_kw = (n_kw + beta) / (n_k + V beta)` and
//! `theta_dk = (n_dk + alpha) / (n_d + K alpha)`. Only the final sample is
//! kept, so a fixed seed reproduces the model bit for bit.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::rng::SeededRng;
use crate::vocab::normalize_text;

const STOPWORDS: &str = include_str!("stopwords.txt");

/// Bundled English stopword list.
pub fn default_stopwords() -> HashSet<String> {
    STOPWORDS.lines().map(str::trim).filter(|w| !w.is_empty()).map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopicError {
    #[error("no texts to build a corpus from")]
    NoTexts,
    #[error("no document keeps {min_doc_len} or more tokens after filtering")]
    EmptyCorpus { min_doc_len: usize },
    #[error("{k} topics requested but the corpus has only {tokens} tokens")]
    TooManyTopics { k: usize, tokens: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("topic {topic} out of range (K = {k})")]
    TopicOutOfRange { topic: usize, k: usize },
    #[error("document {doc} out of range (D = {d})")]
    DocOutOfRange { doc: usize, d: usize },
}

/// Documents as token-index sequences over a shared vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BowCorpus {
    pub vocabulary: Vec<String>,
    pub documents: Vec<Vec<usize>>,
    /// Identifier of each retained document.
    pub doc_ids: Vec<String>,
    /// Identifiers of documents dropped for being too short.
    pub dropped: Vec<String>,
}

impl BowCorpus {
    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }

    /// Builds from `(id, text)` pairs. Tokens that are stopwords, shorter
    /// than three characters, or in fewer than `min_df` texts are removed;
    /// documents left with fewer than `min_doc_len` tokens are dropped.
    /// Vocabulary indices follow first occurrence in the retained documents.
    pub fn build<I: AsRef<str>, T: AsRef<str>>(
        items: &[(I, T)],
        stopwords: &HashSet<String>,
        min_df: usize,
        min_doc_len: usize,
    ) -> Result<BowCorpus, TopicError> {
        if items.is_empty() {
            return Err(TopicError::NoTexts);
        }
        let tokenized: Vec<Vec<String>> = items
            .iter()
            .map(|(_, text)| {
                normalize_text(text.as_ref())
                    .tokens()
                    .filter(|t| t.chars().count() >= 3 && !stopwords.contains(*t))
                    .map(str::to_string)
                    .collect()
            })
            .collect();
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in &tokenized {
            let distinct: HashSet<&str> = doc.iter().map(String::as_str).collect();
            for t in distinct {
                *df.entry(t).or_insert(0) += 1;
            }
        }

        let mut index: HashMap<String, usize> = HashMap::new();
        let mut bow = BowCorpus {
            vocabulary: Vec::new(),
            documents: Vec::new(),
            doc_ids: Vec::new(),
            dropped: Vec::new(),
        };
        for ((id, _), doc) in items.iter().zip(&tokenized) {
            let kept: Vec<&String> = doc.iter().filter(|t| df[t.as_str()] >= min_df).collect();
            if kept.len() < min_doc_len || kept.is_empty() {
                bow.dropped.push(id.as_ref().to_string());
                continue;
            }
            let seq = kept
                .into_iter()
                .map(|t| {
                    *index.entry(t.clone()).or_insert_with(|| {
                        bow.vocabulary.push(t.clone());
                        bow.vocabulary.len() - 1
                    })
                })
                .collect();
            bow.documents.push(seq);
            bow.doc_ids.push(id.as_ref().to_string());
        }
        if bow.documents.is_empty() {
            return Err(TopicError::EmptyCorpus { min_doc_len });
        }
        Ok(bow)
    }
}

/// [`BowCorpus::build`] with document ids `"0"`, `"1"`, ... .
pub fn build_bow<S: AsRef<str>>(
    texts: &[S],
    stopwords: &HashSet<String>,
    min_df: usize,
    min_doc_len: usize,
) -> Result<BowCorpus, TopicError> {
    let items: Vec<(String, &str)> = texts.iter().enumerate().map(|(i, t)| (i.to_string(), t.as_ref())).collect();
    BowCorpus::build(&items, stopwords, min_df, min_doc_len)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub sweeps: usize,
    pub seed: u64,
}

impl LdaParams {
    /// `alpha = 50 / K`, `beta = 0.01`, 1000 sweeps.
    pub fn with_k(k: usize) -> LdaParams {
        LdaParams {
            k,
            alpha: 50.0 / k as f64,
            beta: 0.01,
            sweeps: 1000,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), TopicError> {
        let bad = |m: String| Err(TopicError::InvalidParameter(m));
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if self.sweeps == 0 {
            return bad("sweeps must be at least 1".into());
        }
        Ok(())
    }
}

/// Sampler state: per-token assignments and the collapsed count tables.
#[derive(Debug, Clone)]
pub struct GibbsSampler<'a> {
    bow: &'a BowCorpus,
    params: LdaParams,
    vocab_size: usize,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<u32>,
    topic_word: Vec<u32>,
    topic_total: Vec<u32>,
    rng: SeededRng,
    sweeps_done: usize,
    weights: Vec<f64>,
}

impl<'a> GibbsSampler<'a> {
    /// Draws initial assignments uniformly at random.
    pub fn new(bow: &'a BowCorpus, params: LdaParams) -> Result<Self, TopicError> {
        params.validate()?;
        let tokens = bow.token_count();
        if params.k > tokens {
            return Err(TopicError::TooManyTopics { k: params.k, tokens });
        }
        let (k, v) = (params.k, bow.vocabulary.len());
        let mut rng = SeededRng::new(params.seed);
        let mut sampler = GibbsSampler {
            bow,
            params,
            vocab_size: v,
            assignments: Vec::with_capacity(bow.documents.len()),
            doc_topic: vec![0; bow.documents.len() * k],
            topic_word: vec![0; k * v],
            topic_total: vec![0; k],
            rng: SeededRng::new(0),
            sweeps_done: 0,
            weights: vec![0.0; k],
        };
        for (d, doc) in bow.documents.iter().enumerate() {
            let z: Vec<usize> = doc.iter().map(|_| rng.below(k)).collect();
            for (&w, &t) in doc.iter().zip(&z) {
                sampler.doc_topic[d * k + t] += 1;
                sampler.topic_word[t * v + w] += 1;
                sampler.topic_total[t] += 1;
            }
            sampler.assignments.push(z);
        }
        sampler.rng = rng;
        Ok(sampler)
    }

    /// Resamples every token once, documents and positions in order.
    pub fn sweep(&mut self) {
        let (k, v) = (self.params.k, self.vocab_size);
        let (alpha, beta) = (self.params.alpha, self.params.beta);
        let v_beta = v as f64 * beta;
        for (d, doc) in self.bow.documents.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = self.assignments[d][i];
                self.doc_topic[d * k + old] -= 1;
                self.topic_word[old * v + w] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (f64::from(self.doc_topic[d * k + t]) + alpha) * (f64::from(self.topic_word[t * v + w]) + beta)
                        / (f64::from(self.topic_total[t]) + v_beta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.next_f64() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.assignments[d][i] = new;
                self.doc_topic[d * k + new] += 1;
                self.topic_word[new * v + w] += 1;
                self.topic_total[new] += 1;
            }
        }
        self.sweeps_done += 1;
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    /// Recounts the tables from the assignments and checks that every
    /// document's and topic's marginal matches.
    pub fn counts_consistent(&self) -> bool {
        let (k, v) = (self.params.k, self.vocab_size);
        let mut doc_topic = vec![0u32; self.doc_topic.len()];
        let mut topic_word = vec![0u32; self.topic_word.len()];
        for (d, (doc, z)) in self.bow.documents.iter().zip(&self.assignments).enumerate() {
            for (&w, &t) in doc.iter().zip(z) {
                doc_topic[d * k + t] += 1;
                topic_word[t * v + w] += 1;
            }
        }
        let rows_ok = self
            .bow
            .documents
            .iter()
            .enumerate()
            .all(|(d, doc)| self.doc_topic[d * k..(d + 1) * k].iter().sum::<u32>() as usize == doc.len());
        let topics_ok = (0..k).all(|t| self.topic_word[t * v..(t + 1) * v].iter().sum::<u32>() == self.topic_total[t]);
        rows_ok && topics_ok && doc_topic == self.doc_topic && topic_word == self.topic_word
    }

    /// Point estimates from the current state.
    pub fn to_model(&self) -> TopicModel {
        let (k, v) = (self.params.k, self.vocab_size);
        let (alpha, beta) = (self.params.alpha, self.params.beta);
        let phi = (0..k)
            .map(|t| {
                let denom = f64::from(self.topic_total[t]) + v as f64 * beta;
                (0..v).map(|w| (f64::from(self.topic_word[t * v + w]) + beta) / denom).collect()
            })
            .collect();
        let theta = self
            .bow
            .documents
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                let denom = doc.len() as f64 + k as f64 * alpha;
                (0..k).map(|t| (f64::from(self.doc_topic[d * k + t]) + alpha) / denom).collect()
            })
            .collect();
        TopicModel {
            k,
            alpha,
            beta,
            sweeps: self.sweeps_done,
            seed: self.params.seed,
            vocabulary: self.bow.vocabulary.clone(),
            doc_ids: self.bow.doc_ids.clone(),
            phi,
            theta,
            assignments: self.assignments.clone(),
        }
    }
}

/// Fitted LDA model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    #[serde(with = "crate::decimal::scalar")]
    pub alpha: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub beta: f64,
    pub sweeps: usize,
    pub seed: u64,
    pub vocabulary: Vec<String>,
    pub doc_ids: Vec<String>,
    /// K x V topic-word distributions.
    #[serde(with = "crate::decimal::matrix")]
    pub phi: Vec<Vec<f64>>,
    /// D x K document-topic proportions.
    #[serde(with = "crate::decimal::matrix")]
    pub theta: Vec<Vec<f64>>,
    /// Final-sweep topic of every token; not persisted.
    #[serde(skip)]
    pub assignments: Vec<Vec<usize>>,
}

impl TopicModel {
    /// The `n` most probable words of `topic`, ties broken lexicographically.
    pub fn top_words(&self, topic: usize, n: usize) -> Result<Vec<String>, TopicError> {
        let row = self.phi.get(topic).ok_or(TopicError::TopicOutOfRange { topic, k: self.k })?;
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then_with(|| self.vocabulary[a].cmp(&self.vocabulary[b])));
        Ok(order.into_iter().take(n).map(|w| self.vocabulary[w].clone()).collect())
    }

    /// Argmax of the document's topic proportions, ties to the lowest topic.
    pub fn dominant_topic(&self, doc: usize) -> Result<usize, TopicError> {
        let row = self.theta.get(doc).ok_or(TopicError::DocOutOfRange {
            doc,
            d: self.theta.len(),
        })?;
        Ok(argmax_first(row))
    }

    /// Dominant topic per document id.
    pub fn dominant_topics(&self) -> BTreeMap<String, usize> {
        self.doc_ids.iter().zip(&self.theta).map(|(id, row)| (id.clone(), argmax_first(row))).collect()
    }
}

pub(crate) fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Runs `params.sweeps` Gibbs sweeps from a seeded random start.
pub fn lda_fit(bow: &BowCorpus, params: LdaParams) -> Result<TopicModel, TopicError> {
    let mut sampler = GibbsSampler::new(bow, params)?;
    for _ in 0..params.sweeps {
        sampler.sweep();
    }
    Ok(sampler.to_model())
}

pub fn top_words(model: &TopicModel, topic: usize, n: usize) -> Result<Vec<String>, TopicError> {
    model.top_words(topic, n)
}

pub fn dominant_topic(model: &TopicModel, doc: usize) -> Result<usize, TopicError> {
    model.dominant_topic(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stop(words: &[&str]) -> HashSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn bow_example() {
        let bow = build_bow(&["the climate model", "climate policy debate"], &stop(&["the"]), 1, 1).unwrap();
        assert_eq!(bow.vocabulary, ["climate", "model", "policy", "debate"]);
        assert_eq!(bow.documents, vec![vec![0, 1], vec![0, 2, 3]]);
        assert!(bow.dropped.is_empty());
    }

    #[test]
    fn bow_filters_and_drops() {
        let bow = build_bow(&["ice sheet ice", "an ox", "melt", "sheet melt ice"], &stop(&[]), 2, 2).unwrap();
        // "an", "ox" are too short; "melt" survives df but doc 2 is too short
        assert_eq!(bow.vocabulary, ["ice", "sheet", "melt"]);
        assert_eq!(bow.documents, vec![vec![0, 1, 0], vec![1, 2, 0]]);
        assert_eq!(bow.doc_ids, ["0", "3"]);
        assert_eq!(bow.dropped, ["1", "2"]);
        assert_eq!(
            build_bow(&["a b", "tiny"], &stop(&[]), 1, 2).unwrap_err(),
            TopicError::EmptyCorpus { min_doc_len: 2 }
        );
        assert_eq!(build_bow::<&str>(&[], &stop(&[]), 1, 1).unwrap_err(), TopicError::NoTexts);
    }

    #[test]
    fn stopwords_bundled() {
        let s = default_stopwords();
        assert!(s.len() > 300);
        assert!(s.contains("the") && s.contains("between"));
    }

    #[test]
    fn single_token_single_topic() {
        let bow = build_bow(&["glacier"], &stop(&[]), 1, 1).unwrap();
        let model = lda_fit(&bow, LdaParams { k: 1, alpha: 0.1, beta: 0.01, sweeps: 3, seed: 9 }).unwrap();
        assert_eq!(model.theta, vec![vec![1.0]]);
        assert_eq!(model.phi, vec![vec![1.0]]);
        assert_eq!(model.top_words(0, 5).unwrap(), ["glacier"]);
    }

    #[test]
    fn single_topic_phi_is_smoothed_frequency() {
        let bow = build_bow(&["ice ice ice melt", "melt sea"], &stop(&[]), 1, 1).unwrap();
        let beta = 0.5;
        let model = lda_fit(&bow, LdaParams { k: 1, alpha: 1.0, beta, sweeps: 2, seed: 1 }).unwrap();
        assert!(model.theta.iter().all(|row| row == &vec![1.0]));
        let (n, v) = (6.0, 3.0);
        for (w, count) in [("ice", 3.0), ("melt", 2.0), ("sea", 1.0)] {
            let idx = model.vocabulary.iter().position(|x| x == w).unwrap();
            assert!((model.phi[0][idx] - (count + beta) / (n + v * beta)).abs() < 1e-15);
        }
    }

    #[test]
    fn parameter_errors() {
        let bow = build_bow(&["ice melt"], &stop(&[]), 1, 1).unwrap();
        assert_eq!(
            lda_fit(&bow, LdaParams::with_k(3)).unwrap_err(),
            TopicError::TooManyTopics { k: 3, tokens: 2 }
        );
        for p in [
            LdaParams { k: 0, ..LdaParams::with_k(1) },
            LdaParams { alpha: 0.0, ..LdaParams::with_k(1) },
            LdaParams { beta: -1.0, ..LdaParams::with_k(1) },
            LdaParams { sweeps: 0, ..LdaParams::with_k(1) },
        ] {
            assert!(matches!(lda_fit(&bow, p), Err(TopicError::InvalidParameter(_))));
        }
    }

    #[test]
    fn top_words_ties_and_range() {
        let model = TopicModel {
            k: 1,
            alpha: 1.0,
            beta: 1.0,
            sweeps: 1,
            seed: 0,
            vocabulary: vec!["zeta".into(), "alpha".into(), "mid".into()],
            doc_ids: vec![],
            phi: vec![vec![0.4, 0.4, 0.2]],
            theta: vec![vec![1.0]],
            assignments: vec![],
        };
        assert_eq!(model.top_words(0, 2).unwrap(), ["alpha", "zeta"]);
        assert_eq!(model.top_words(1, 2).unwrap_err(), TopicError::TopicOutOfRange { topic: 1, k: 1 });
        assert_eq!(model.dominant_topic(3).unwrap_err(), TopicError::DocOutOfRange { doc: 3, d: 1 });
    }

    #[test]
    fn dominant_topic_examples() {
        assert_eq!(argmax_first(&[0.1, 0.8, 0.1]), 1);
        assert_eq!(argmax_first(&[0.25; 4]), 0);
    }

    #[test]
    fn fit_is_deterministic_and_conserves_counts() {
        let texts = [
            "glacier melt ice sheet ocean warming",
            "carbon tax policy emissions trading",
            "ice sheet glacier retreat warming",
            "emissions policy carbon market",
        ];
        let bow = build_bow(&texts, &stop(&[]), 1, 1).unwrap();
        let params = LdaParams { k: 2, alpha: 0.5, beta: 0.1, sweeps: 30, seed: 5 };
        let mut sampler = GibbsSampler::new(&bow, params).unwrap();
        assert!(sampler.counts_consistent());
        for _ in 0..30 {
            sampler.sweep();
            assert!(sampler.counts_consistent());
        }
        let a = sampler.to_model();
        let b = lda_fit(&bow, params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.assignments, b.assignments);
        for row in a.phi.iter().chain(&a.theta) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn model_json_round_trip() {
        let bow = build_bow(&["ice melt sea", "sea level rise"], &stop(&[]), 1, 1).unwrap();
        let model = lda_fit(&bow, LdaParams { k: 2, alpha: 0.3, beta: 0.01, sweeps: 5, seed: 2 }).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: TopicModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back.phi, model.phi);
        assert_eq!(back.theta, model.theta);
        assert_eq!(back.alpha, model.alpha);
    }
}
