use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::vocab::normalize_text;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error("cannot fit a feature space on zero texts")]
    NoTexts,
    #[error("every token was filtered out (min_df = {min_df}, max_vocab = {max_vocab})")]
    EmptyVocabulary { min_df: u64, max_vocab: usize },
}

/// Token vocabulary with document frequencies for tf-idf weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    /// Tokens in column order (lexicographic).
    tokens: Vec<String>,
    df: Vec<u64>,
    n_docs: u64,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

/// Sparse vector with strictly increasing column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector { dim, entries: Vec::new() }
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }
}

pub(crate) fn tokenize(text: &str) -> Vec<String> {
    normalize_text(text).tokens().map(str::to_string).collect()
}

impl FeatureSpace {
    pub fn fit<S: AsRef<str>>(texts: &[S], min_df: u64, max_vocab: usize) -> Result<FeatureSpace, FeatureError> {
        if texts.is_empty() {
            return Err(FeatureError::NoTexts);
        }
        let mut df: BTreeMap<String, u64> = BTreeMap::new();
        for text in texts {
            let mut tokens = tokenize(text.as_ref());
            tokens.sort_unstable();
            tokens.dedup();
            for t in tokens {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, u64)> = df.into_iter().filter(|(_, d)| *d >= min_df).collect();
        if kept.len() > max_vocab {
            kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            kept.truncate(max_vocab);
            kept.sort_by(|a, b| a.0.cmp(&b.0));
        }
        if kept.is_empty() {
            return Err(FeatureError::EmptyVocabulary { min_df, max_vocab });
        }
        let (tokens, df): (Vec<_>, Vec<_>) = kept.into_iter().unzip();
        Ok(FeatureSpace::from_parts(tokens, df, texts.len() as u64))
    }

    pub(crate) fn from_parts(tokens: Vec<String>, df: Vec<u64>, n_docs: u64) -> FeatureSpace {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        FeatureSpace { tokens, df, n_docs, index }
    }

    /// Rebuilds the token index after deserialization.
    pub(crate) fn reindex(mut self) -> FeatureSpace {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        self
    }

    pub fn dim(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn df(&self, column: usize) -> u64 {
        self.df[column]
    }

    /// `ln((1 + N) / (1 + df)) + 1`
    pub fn idf(&self, column: usize) -> f64 {
        ((1.0 + self.n_docs as f64) / (1.0 + self.df[column] as f64)).ln() + 1.0
    }

    /// Sublinear tf-idf, scaled to unit Euclidean norm. Texts with no
    /// in-vocabulary token map to the zero vector.
    pub fn featurize(&self, text: &str) -> SparseVector {
        let mut tf: BTreeMap<usize, u32> = BTreeMap::new();
        for token in tokenize(text) {
            if let Some(col) = self.column(&token) {
                *tf.entry(col).or_insert(0) += 1;
            }
        }
        let entries: Vec<(usize, f64)> = tf
            .into_iter()
            .map(|(col, count)| (col, (1.0 + f64::from(count).ln()) * self.idf(col)))
            .collect();
        let v = SparseVector { dim: self.dim(), entries };
        let norm = v.norm();
        if norm > 0.0 {
            v.scaled(1.0 / norm)
        } else {
            SparseVector::zeros(self.dim())
        }
    }
}

pub fn fit_feature_space<S: AsRef<str>>(texts: &[S], min_df: u64, max_vocab: usize) -> Result<FeatureSpace, FeatureError> {
    FeatureSpace::fit(texts, min_df, max_vocab)
}

pub fn featurize(space: &FeatureSpace, text: &str) -> SparseVector {
    space.featurize(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_df_filter() {
        let space = FeatureSpace::fit(&["a b", "b c"], 2, 100).unwrap();
        assert_eq!(space.tokens(), ["b"]);
    }

    #[test]
    fn max_vocab_tie_break_is_lexicographic() {
        let space = FeatureSpace::fit(&["a b", "b c"], 1, 2).unwrap();
        assert_eq!(space.tokens(), ["a", "b"]);
        assert_eq!(space.column("b"), Some(1));
    }

    #[test]
    fn idf_of_ubiquitous_token_is_one() {
        let space = FeatureSpace::fit(&["x y", "x", "x z"], 1, 10).unwrap();
        assert_eq!(space.idf(space.column("x").unwrap()), 1.0);
        let y = space.column("y").unwrap();
        assert!((space.idf(y) - ((4.0f64 / 2.0).ln() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn everything_filtered_is_an_error() {
        assert!(matches!(FeatureSpace::fit(&["a", "b"], 2, 10), Err(FeatureError::EmptyVocabulary { .. })));
        assert!(matches!(FeatureSpace::fit::<&str>(&[], 1, 10), Err(FeatureError::NoTexts)));
        assert!(matches!(FeatureSpace::fit(&["--", ""], 1, 10), Err(FeatureError::EmptyVocabulary { .. })));
    }

    #[test]
    fn featurize_examples() {
        let space = FeatureSpace::fit(&["x y", "x y"], 1, 10).unwrap();
        // single token with idf 1
        let v = space.featurize("x");
        assert_eq!(v.entries, vec![(0, 1.0)]);
        // no known tokens
        assert_eq!(space.featurize("unknown words"), SparseVector::zeros(2));
        // equal tf and idf
        let v = space.featurize("X, y!");
        let h = 1.0 / 2f64.sqrt();
        assert!(v.entries.iter().all(|&(_, val)| (val - h).abs() < 1e-15));
        // sublinear tf
        let v = space.featurize("x x y");
        let a = 1.0 + 2f64.ln();
        let n = (a * a + 1.0).sqrt();
        assert!((v.entries[0].1 - a / n).abs() < 1e-15 && (v.entries[1].1 - 1.0 / n).abs() < 1e-15);
    }
}
