//! The pipeline configuration file. Relative paths resolve against the
//! directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{LinearConfig, TrainParams};
use crate::embed::TsneParams;
use crate::ingest::{max_page_size, EndpointConfig, HarvestQuery};
use crate::model::Source;
use crate::report::HistogramScale;
use crate::topics::LdaParams;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config {path} is invalid: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{key}: path {path} does not exist")]
    MissingPath { key: String, path: PathBuf },
    #[error("{0}")]
    Invalid(String),
}

/// Where one source's pages come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Directory of page files served in file-name order. Takes precedence
    /// over `endpoint`.
    #[serde(default)]
    pub fixture_dir: Option<PathBuf>,
    /// Live endpoint; the built-in default for the source when absent.
    #[serde(default)]
    pub endpoint: Option<EndpointConfig>,
    #[serde(default)]
    pub page_size: Option<usize>,
    #[serde(default)]
    pub max_records: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filters {
    pub country_code: String,
    pub year_from: i32,
    pub year_to: i32,
}

impl Default for Filters {
    fn default() -> Self {
        Filters {
            country_code: "DK".into(),
            year_from: 2014,
            year_to: 2019,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub min_df: u64,
    pub max_vocab: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub threshold: f64,
    /// A saved model; when the file exists training is skipped.
    pub model_path: Option<PathBuf>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let base = LinearConfig::default();
        ClassifierConfig {
            min_df: base.min_df,
            max_vocab: base.max_vocab,
            epochs: base.train.epochs,
            learning_rate: base.train.learning_rate,
            l2: base.train.l2,
            threshold: 0.10,
            model_path: None,
        }
    }
}

impl ClassifierConfig {
    pub fn linear(&self) -> LinearConfig {
        LinearConfig {
            min_df: self.min_df,
            max_vocab: self.max_vocab,
            train: TrainParams {
                epochs: self.epochs,
                learning_rate: self.learning_rate,
                l2: self.l2,
                ..TrainParams::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsConfig {
    pub k: usize,
    /// `50 / k` when absent.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub sweeps: usize,
    pub seed: u64,
    pub min_df: usize,
    pub min_doc_len: usize,
    /// Fit on these sources only; all sources when absent.
    pub sources: Option<Vec<Source>>,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        let base = LdaParams::with_k(30);
        TopicsConfig {
            k: base.k,
            alpha: None,
            beta: base.beta,
            sweeps: base.sweeps,
            seed: base.seed,
            min_df: 2,
            min_doc_len: 5,
            sources: None,
        }
    }
}

impl TopicsConfig {
    pub fn lda(&self) -> LdaParams {
        LdaParams {
            alpha: self.alpha.unwrap_or(50.0 / self.k.max(1) as f64),
            beta: self.beta,
            sweeps: self.sweeps,
            seed: self.seed,
            ..LdaParams::with_k(self.k)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        let base = TsneParams::default();
        EmbedConfig {
            perplexity: 30.0,
            iterations: base.iterations,
            learning_rate: base.learning_rate,
            seed: base.seed,
        }
    }
}

impl EmbedConfig {
    pub fn tsne(&self) -> TsneParams {
        TsneParams {
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleSetting {
    #[default]
    Shared,
    PerSource,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub histogram_scale: ScaleSetting,
}

impl ReportConfig {
    pub fn scale(&self) -> HistogramScale {
        match self.histogram_scale {
            ScaleSetting::Shared => HistogramScale::Shared,
            ScaleSetting::PerSource => HistogramScale::PerSource,
        }
    }
}

fn default_rate() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Keyed by source name (`OpenAlex`, `OpenAIRE`, `CORDIS`, `Kohesio`);
    /// sources left out are not harvested.
    pub sources: BTreeMap<Source, SourceConfig>,
    #[serde(default)]
    pub filters: Filters,
    pub vocabulary_path: PathBuf,
    pub lexicon_path: PathBuf,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub topics: TopicsConfig,
    #[serde(default)]
    pub embed: EmbedConfig,
    #[serde(default)]
    pub report: ReportConfig,
    pub output_dir: PathBuf,
    /// `<output_dir>/cache` when absent.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Live requests per second per source.
    #[serde(default = "default_rate")]
    pub rate_limit_per_sec: f64,
}

impl PipelineConfig {
    /// Parses the file and resolves relative paths against its directory.
    /// Does not validate; see [`PipelineConfig::validate`].
    pub fn load(path: impl AsRef<Path>) -> Result<PipelineConfig, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: PipelineConfig = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve(base);
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.vocabulary_path);
        fix(&mut self.lexicon_path);
        fix(&mut self.output_dir);
        if let Some(p) = self.cache_dir.as_mut() {
            fix(p);
        }
        if let Some(p) = self.classifier.model_path.as_mut() {
            fix(p);
        }
        for src in self.sources.values_mut() {
            if let Some(p) = src.fixture_dir.as_mut() {
                fix(p);
            }
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }

    pub fn query(&self, source: Source) -> HarvestQuery {
        let sc = &self.sources[&source];
        HarvestQuery {
            country_code: self.filters.country_code.clone(),
            year_from: self.filters.year_from,
            year_to: self.filters.year_to,
            page_size: sc.page_size.unwrap_or(max_page_size(source)),
            max_records: sc.max_records,
            ..HarvestQuery::new(source)
        }
    }

    /// Checks referenced paths and every numeric precondition of the
    /// stages.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let must_exist = |key: &str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::MissingPath { key: key.into(), path: p.to_path_buf() })
            }
        };
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        must_exist("vocabulary_path", &self.vocabulary_path)?;
        must_exist("lexicon_path", &self.lexicon_path)?;
        if self.sources.is_empty() {
            return invalid("sources: at least one source must be configured".into());
        }
        for (&source, sc) in &self.sources {
            match &sc.fixture_dir {
                Some(dir) => must_exist(&format!("sources.{}.fixture_dir", source.slug()), dir)?,
                None if sc.endpoint.is_none() && EndpointConfig::default_for(source).is_none() => {
                    return invalid(format!("sources.{}: no fixture_dir and no default endpoint; set one", source.slug()));
                }
                None => {}
            }
            self.query(source).validate().map_err(|e| ConfigError::Invalid(format!("sources.{}: {e}", source.slug())))?;
        }
        if !(self.rate_limit_per_sec > 0.0 && self.rate_limit_per_sec.is_finite()) {
            return invalid("rate_limit_per_sec must be positive".into());
        }
        let c = &self.classifier;
        if c.epochs == 0 || !(c.learning_rate > 0.0 && c.learning_rate.is_finite()) || !(c.l2 >= 0.0 && c.l2.is_finite()) {
            return invalid("classifier: epochs ≥ 1, learning_rate > 0 and l2 ≥ 0 are required".into());
        }
        if !(0.0..=1.0).contains(&c.threshold) || c.max_vocab == 0 || c.min_df == 0 {
            return invalid("classifier: threshold in [0, 1], max_vocab ≥ 1 and min_df ≥ 1 are required".into());
        }
        let t = &self.topics;
        let lda = t.lda();
        if t.k == 0 || t.sweeps == 0 || !(lda.alpha > 0.0 && lda.alpha.is_finite()) || !(t.beta > 0.0 && t.beta.is_finite()) {
            return invalid("topics: k ≥ 1, sweeps ≥ 1, alpha > 0 and beta > 0 are required".into());
        }
        if t.min_df == 0 || t.min_doc_len == 0 {
            return invalid("topics: min_df and min_doc_len must be at least 1".into());
        }
        let e = &self.embed;
        if !(e.perplexity > 0.0 && e.perplexity.is_finite()) || e.iterations == 0 || !(e.learning_rate > 0.0 && e.learning_rate.is_finite()) {
            return invalid("embed: perplexity > 0, iterations ≥ 1 and learning_rate > 0 are required".into());
        }
        Ok(())
    }

    /// Stable hash of the whole resolved config, stored in stage markers.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn resolves_relative_paths_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("oa")).unwrap();
        write(dir.path(), "v.json", "{}");
        write(dir.path(), "l.json", "{}");
        let cfg = write(
            dir.path(),
            "c.json",
            r#"{"sources": {"OpenAlex": {"fixture_dir": "oa", "page_size": 25}},
                "vocabulary_path": "v.json", "lexicon_path": "l.json", "output_dir": "out"}"#,
        );
        let c = PipelineConfig::load(&cfg).unwrap();
        c.validate().unwrap();
        assert_eq!(c.output_dir, dir.path().join("out"));
        assert_eq!(c.cache_dir(), dir.path().join("out").join("cache"));
        assert_eq!(c.sources[&Source::OpenAlex].fixture_dir.as_deref(), Some(dir.path().join("oa").as_path()));
        let q = c.query(Source::OpenAlex);
        assert_eq!((q.country_code.as_str(), q.year_from, q.year_to, q.page_size), ("DK", 2014, 2019, 25));
        assert_eq!(c.topics.lda().alpha, 50.0 / 30.0);
        assert_eq!(c.classifier.threshold, 0.10);
        assert_eq!(c.embed.perplexity, 30.0);
        assert_eq!(c.fingerprint(), PipelineConfig::load(&cfg).unwrap().fingerprint());
    }

    #[test]
    fn validation_failures() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "v.json", "{}");
        write(dir.path(), "l.json", "{}");
        let load = |body: &str| PipelineConfig::load(write(dir.path(), "c.json", body)).unwrap();
        let missing = load(r#"{"sources": {"CORDIS": {"fixture_dir": "nope"}}, "vocabulary_path": "v.json", "lexicon_path": "l.json", "output_dir": "o"}"#);
        assert!(matches!(missing.validate(), Err(ConfigError::MissingPath { .. })));
        let no_endpoint = load(r#"{"sources": {"Kohesio": {}}, "vocabulary_path": "v.json", "lexicon_path": "l.json", "output_dir": "o"}"#);
        assert!(matches!(no_endpoint.validate(), Err(ConfigError::Invalid(_))));
        let bad_k = load(r#"{"sources": {"OpenAlex": {}}, "vocabulary_path": "v.json", "lexicon_path": "l.json", "output_dir": "o", "topics": {"k": 0}}"#);
        assert!(matches!(bad_k.validate(), Err(ConfigError::Invalid(m)) if m.starts_with("topics")));
        let bad_page = load(r#"{"sources": {"OpenAIRE": {"page_size": 500}}, "vocabulary_path": "v.json", "lexicon_path": "l.json", "output_dir": "o"}"#);
        assert!(matches!(bad_page.validate(), Err(ConfigError::Invalid(_))));
        let unknown = write(dir.path(), "u.json", r#"{"sources": {}, "vocabulary_path": "v.json", "lexicon_path": "l.json", "output_dir": "o", "colour": 1}"#);
        assert!(matches!(PipelineConfig::load(unknown), Err(ConfigError::Parse { .. })));
    }
}
