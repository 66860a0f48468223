//! Weakly supervised classification of records into the 25 ERC panels.
//!
//! Seed lexicons label the records they clearly point at, a model is trained
//! on those weak labels, and the trained model then scores every record.
//! Model backends implement [`PanelBackend`]; the bundled one is
//! [`LinearBackend`] (tf-idf features and a softmax regression).

mod features;
mod linear;
mod panel;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::Corpus;
use crate::vocab::{normalize_text, CompiledMatcher};

pub use features::{featurize, fit_feature_space, FeatureError, FeatureSpace, SparseVector};
pub use linear::{
    objective, predict, softmax, train, DimensionMismatch, Gradient, PanelModel, TrainError, TrainParams, TrainingMeta,
};
pub use panel::{DomainGroup, ErcPanel, UnknownPanel};

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("seed lexicons: {0}")]
    Lexicon(String),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("model has not been trained")]
    Untrained,
}

impl ClassifierError {
    /// True for errors caused by user-supplied configuration files.
    pub fn is_config(&self) -> bool {
        matches!(self, ClassifierError::Io { .. } | ClassifierError::Json { .. } | ClassifierError::Lexicon(_))
    }
}

/// Probability over the 25 panels for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDistribution {
    pub record_id: String,
    #[serde(with = "crate::decimal::vec")]
    pub probabilities: Vec<f64>,
    pub assigned: Option<ErcPanel>,
}

impl PanelDistribution {
    pub(crate) fn from_probabilities(record_id: &str, probabilities: Vec<f64>, threshold: f64) -> Self {
        let (best, max) = probabilities
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bp), (i, &p)| if p > bp { (i, p) } else { (bi, bp) });
        PanelDistribution {
            record_id: record_id.to_string(),
            assigned: (max >= threshold).then(|| ErcPanel::from_index(best).expect("25 probabilities")),
            probabilities,
        }
    }
}

/// Seed surface forms pointing at one panel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelSeedLexicon {
    pub panel: ErcPanel,
    pub seed_terms: Vec<String>,
}

/// Checks panel coverage, non-empty seed lists, and that no normalized
/// surface form belongs to two panels.
pub fn validate_lexicons(lexicons: &[PanelSeedLexicon]) -> Result<(), ClassifierError> {
    let covered: BTreeSet<ErcPanel> = lexicons.iter().map(|l| l.panel).collect();
    if let Some(missing) = ErcPanel::all().find(|p| !covered.contains(p)) {
        return Err(ClassifierError::Lexicon(format!("no lexicon for panel {missing}")));
    }
    let mut owner: BTreeMap<String, ErcPanel> = BTreeMap::new();
    for lex in lexicons {
        if lex.seed_terms.is_empty() {
            return Err(ClassifierError::Lexicon(format!("panel {} has no seed terms", lex.panel)));
        }
        for term in &lex.seed_terms {
            let norm = normalize_text(term).as_str().to_string();
            if norm.is_empty() {
                return Err(ClassifierError::Lexicon(format!("panel {} has an empty seed term", lex.panel)));
            }
            if let Some(prev) = owner.insert(norm, lex.panel) {
                if prev != lex.panel {
                    return Err(ClassifierError::Lexicon(format!(
                        "seed term {term:?} appears in both {prev} and {}",
                        lex.panel
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Reads a `{panel code: [surface, ...]}` file.
pub fn load_lexicons(path: impl AsRef<Path>) -> Result<Vec<PanelSeedLexicon>, ClassifierError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ClassifierError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let raw: BTreeMap<String, Vec<String>> = serde_json::from_slice(&bytes).map_err(|source| ClassifierError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lexicons = raw
        .into_iter()
        .map(|(code, seed_terms)| {
            let panel = code.parse::<ErcPanel>().map_err(|e| ClassifierError::Lexicon(e.to_string()))?;
            Ok(PanelSeedLexicon { panel, seed_terms })
        })
        .collect::<Result<Vec<_>, ClassifierError>>()?;
    lexicons.sort_by_key(|l| l.panel);
    validate_lexicons(&lexicons)?;
    Ok(lexicons)
}

/// Labels records by seed-term evidence.
#[derive(Debug, Clone)]
pub struct WeakLabeler {
    matcher: CompiledMatcher,
    term_panels: Vec<ErcPanel>,
}

impl WeakLabeler {
    /// Distinct seed terms a record must hit for its panel.
    pub const MIN_HITS: usize = 2;

    pub fn new(lexicons: &[PanelSeedLexicon]) -> Result<Self, ClassifierError> {
        validate_lexicons(lexicons)?;
        let mut ids = Vec::new();
        let mut forms = Vec::new();
        let mut term_panels = Vec::new();
        for lex in lexicons {
            for term in &lex.seed_terms {
                ids.push(format!("{}:{}", lex.panel, term));
                forms.push([term.clone()]);
                term_panels.push(lex.panel);
            }
        }
        let matcher = CompiledMatcher::from_terms(ids.iter().map(String::as_str).zip(forms.iter().map(|f| &f[..])));
        Ok(WeakLabeler { matcher, term_panels })
    }

    /// Distinct seed-term hits per panel.
    pub fn hits(&self, text: &str) -> [usize; ErcPanel::COUNT] {
        let terms: BTreeSet<usize> = self
            .matcher
            .find_normalized(&normalize_text(text))
            .into_iter()
            .map(|m| m.term)
            .collect();
        let mut counts = [0; ErcPanel::COUNT];
        for t in terms {
            counts[self.term_panels[t].index()] += 1;
        }
        counts
    }

    /// The panel with at least [`Self::MIN_HITS`] hits and strictly more
    /// than any other panel.
    pub fn label(&self, text: &str) -> Option<ErcPanel> {
        let counts = self.hits(text);
        let (best, &max) = counts.iter().enumerate().max_by_key(|&(i, c)| (*c, std::cmp::Reverse(i)))?;
        let unique = counts.iter().filter(|&&c| c == max).count() == 1;
        (max >= Self::MIN_HITS && unique).then(|| ErcPanel::from_index(best).expect("index < 25"))
    }
}

/// Weakly labeled subset of a corpus, keyed by record id.
pub fn weak_label(corpus: &Corpus, lexicons: &[PanelSeedLexicon]) -> Result<BTreeMap<String, ErcPanel>, ClassifierError> {
    let labeler = WeakLabeler::new(lexicons)?;
    Ok(corpus
        .records()
        .iter()
        .filter_map(|r| labeler.label(&r.text()).map(|p| (r.record_id.clone(), p)))
        .collect())
}

/// Training and scoring contract shared by all model backends.
pub trait PanelBackend {
    fn train(&mut self, texts: &[&str], labels: &[ErcPanel]) -> Result<(), ClassifierError>;

    fn predict(&self, record_id: &str, text: &str, threshold: f64) -> Result<PanelDistribution, ClassifierError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub min_df: u64,
    pub max_vocab: usize,
    pub train: TrainParams,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            min_df: 2,
            max_vocab: 50_000,
            train: TrainParams::default(),
        }
    }
}

/// tf-idf + softmax regression backend.
#[derive(Debug, Clone)]
pub struct LinearBackend {
    pub config: LinearConfig,
    fitted: Option<(FeatureSpace, PanelModel)>,
}

#[derive(Serialize, Deserialize)]
struct StoredSpace {
    tokens: Vec<String>,
    df: Vec<u64>,
    n_docs: u64,
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    config: LinearConfig,
    feature_space: StoredSpace,
    model: PanelModel,
}

impl LinearBackend {
    pub fn new(config: LinearConfig) -> Self {
        LinearBackend { config, fitted: None }
    }

    pub fn from_parts(config: LinearConfig, space: FeatureSpace, model: PanelModel) -> Self {
        LinearBackend {
            config,
            fitted: Some((space, model)),
        }
    }

    pub fn feature_space(&self) -> Option<&FeatureSpace> {
        self.fitted.as_ref().map(|(s, _)| s)
    }

    pub fn model(&self) -> Option<&PanelModel> {
        self.fitted.as_ref().map(|(_, m)| m)
    }

    pub fn to_json(&self) -> Result<String, ClassifierError> {
        let (space, model) = self.fitted.as_ref().ok_or(ClassifierError::Untrained)?;
        let stored = StoredModel {
            config: self.config,
            feature_space: StoredSpace {
                tokens: space.tokens().to_vec(),
                df: (0..space.dim()).map(|c| space.df(c)).collect(),
                n_docs: space.n_docs(),
            },
            model: model.clone(),
        };
        Ok(serde_json::to_string_pretty(&stored).expect("model serializes") + "\n")
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        let stored: StoredModel = serde_json::from_str(json)?;
        let space = FeatureSpace::from_parts(stored.feature_space.tokens, stored.feature_space.df, stored.feature_space.n_docs)
            .reindex();
        Ok(LinearBackend::from_parts(stored.config, space, stored.model))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| ClassifierError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|source| ClassifierError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&json).map_err(|source| ClassifierError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl PanelBackend for LinearBackend {
    fn train(&mut self, texts: &[&str], labels: &[ErcPanel]) -> Result<(), ClassifierError> {
        assert_eq!(texts.len(), labels.len(), "one label per text");
        let space = FeatureSpace::fit(texts, self.config.min_df, self.config.max_vocab)?;
        let examples: Vec<(SparseVector, ErcPanel)> =
            texts.iter().zip(labels).map(|(t, &p)| (space.featurize(t), p)).collect();
        let model = train(&examples, space.dim(), self.config.train)?;
        self.fitted = Some((space, model));
        Ok(())
    }

    fn predict(&self, record_id: &str, text: &str, threshold: f64) -> Result<PanelDistribution, ClassifierError> {
        let (space, model) = self.fitted.as_ref().ok_or(ClassifierError::Untrained)?;
        Ok(predict(model, record_id, &space.featurize(text), threshold)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Kind, Source, StiRecord};

    fn lexicons() -> Vec<PanelSeedLexicon> {
        ErcPanel::all()
            .map(|panel| {
                let seed_terms = match panel.code().as_str() {
                    "PE10" => vec!["sedimentology".into(), "paleoclimate".into(), "glaciology".into()],
                    "SH2" => vec!["governance".into(), "public policy".into()],
                    code => vec![format!("seed{}", code.to_lowercase())],
                };
                PanelSeedLexicon { panel, seed_terms }
            })
            .collect()
    }

    fn record(id: &str, body: &str) -> StiRecord {
        StiRecord {
            record_id: id.into(),
            source: Source::OpenAlex,
            kind: Kind::Publication,
            title: String::new(),
            body: body.into(),
            year: 2015,
            country_codes: BTreeSet::new(),
            doi: None,
        }
    }

    #[test]
    fn weak_label_rules() {
        let labeler = WeakLabeler::new(&lexicons()).unwrap();
        let pe10: ErcPanel = "PE10".parse().unwrap();
        assert_eq!(labeler.label("Sedimentology meets paleoclimate records"), Some(pe10));
        // repeated single seed counts once
        assert_eq!(labeler.label("paleoclimate paleoclimate"), None);
        // tie
        assert_eq!(labeler.label("sedimentology, paleoclimate, governance and public policy"), None);
        // plurality
        assert_eq!(
            labeler.label("sedimentology, paleoclimate, glaciology, governance and public policy"),
            Some(pe10)
        );
        assert_eq!(labeler.label(""), None);
    }

    #[test]
    fn weak_label_corpus() {
        let corpus = Corpus::new(vec![
            record("openalex:1", "sedimentology and paleoclimate"),
            record("openalex:2", "unrelated text"),
        ])
        .unwrap();
        let labels = weak_label(&corpus, &lexicons()).unwrap();
        assert_eq!(labels.len(), 1);
        assert_eq!(labels["openalex:1"].code(), "PE10");
    }

    #[test]
    fn lexicon_missing_panel_is_config_error() {
        let mut lex = lexicons();
        lex.retain(|l| l.panel.code() != "LS4");
        let err = WeakLabeler::new(&lex).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("LS4"));
    }

    #[test]
    fn lexicon_shared_surface_form_rejected() {
        let mut lex = lexicons();
        lex[0].seed_terms.push("Public  Policy".into());
        assert!(validate_lexicons(&lex).unwrap_err().to_string().contains("public"));
    }

    #[test]
    fn backend_round_trips_through_json() {
        let mut backend = LinearBackend::new(LinearConfig {
            min_df: 1,
            max_vocab: 100,
            train: TrainParams {
                epochs: 20,
                ..TrainParams::default()
            },
        });
        let texts = ["ice sheet melt", "ice core record", "policy governance", "policy instruments"];
        let labels: Vec<ErcPanel> = ["PE10", "PE10", "SH2", "SH2"].iter().map(|c| c.parse().unwrap()).collect();
        assert!(matches!(backend.predict("x", "ice", 0.1), Err(ClassifierError::Untrained)));
        backend.train(&texts, &labels).unwrap();
        let json = backend.to_json().unwrap();
        let back = LinearBackend::from_json(&json).unwrap();
        assert_eq!(back.model(), backend.model());
        assert_eq!(back.feature_space().unwrap().column("ice"), backend.feature_space().unwrap().column("ice"));
        assert_eq!(back.to_json().unwrap(), json);
        let a = backend.predict("x", "ice melt", 0.1).unwrap();
        let b = back.predict("x", "ice melt", 0.1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.assigned.unwrap().code(), "PE10");
    }

    #[test]
    fn argmax_ties_resolve_to_lower_code() {
        let mut probs = vec![0.0; 25];
        probs[3] = 0.5;
        probs[7] = 0.5;
        let d = PanelDistribution::from_probabilities("r", probs, 0.1);
        assert_eq!(d.assigned.unwrap().code(), "PE4");
    }
}
