use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ImputeError;
use crate::records::Affiliation;

/// Lower-cases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

pub fn affiliation_tokens(affiliation: &Affiliation) -> Vec<String> {
    affiliation.text_fields().iter().flat_map(|f| tokenize(f)).collect()
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&(_, v)| v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVocabulary {
    index: BTreeMap<String, usize>,
    document_frequency: Vec<usize>,
    idf: Vec<f64>,
    document_count: usize,
}

impl TfidfVocabulary {
    /// Builds the vocabulary over the affiliations' free-text fields.
    ///
    /// Tokens seen in fewer than `min_df` documents are dropped. Indices are
    /// assigned in lexicographic token order.
    pub fn build(affiliations: &[Affiliation], min_df: usize) -> Result<Self, ImputeError> {
        if affiliations.is_empty() {
            return Err(ImputeError::EmptyCorpus);
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for affiliation in affiliations {
            let distinct: BTreeSet<String> = affiliation_tokens(affiliation).into_iter().collect();
            for token in distinct {
                *df.entry(token).or_default() += 1;
            }
        }
        let n = affiliations.len();
        let mut index = BTreeMap::new();
        let mut document_frequency = Vec::new();
        let mut idf = Vec::new();
        for (token, count) in df.into_iter().filter(|&(_, c)| c >= min_df) {
            index.insert(token, document_frequency.len());
            document_frequency.push(count);
            idf.push(((1.0 + n as f64) / (1.0 + count as f64)).ln() + 1.0);
        }
        Ok(Self {
            index,
            document_frequency,
            idf,
            document_count: n,
        })
    }

    pub fn len(&self) -> usize {
        self.idf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idf.is_empty()
    }

    pub fn document_count(&self) -> usize {
        self.document_count
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.index_of(token).map(|i| self.idf[i])
    }

    pub fn document_frequency(&self, token: &str) -> Option<usize> {
        self.index_of(token).map(|i| self.document_frequency[i])
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    /// Raw term frequency times idf, L2-normalized. Unknown tokens are ignored.
    pub fn vectorize(&self, affiliation: &Affiliation) -> SparseVector {
        let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
        for token in affiliation_tokens(affiliation) {
            if let Some(i) = self.index_of(&token) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> = tf.into_iter().map(|(i, f)| (i, f * self.idf[i])).collect();
        let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut entries {
                *v /= norm;
            }
        }
        SparseVector { entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aff(text: &str) -> Affiliation {
        Affiliation::new(text, "", "", None)
    }

    #[test]
    fn single_document_idf_is_one() {
        let vocab = TfidfVocabulary::build(&[aff("Max Planck Institute, Rostock")], 1).unwrap();
        let tokens: Vec<_> = vocab.tokens().collect();
        assert_eq!(tokens, vec!["institute", "max", "planck", "rostock"]);
        for t in tokens {
            assert_eq!(vocab.idf(t), Some(1.0));
        }
    }

    #[test]
    fn shared_tokens_get_lower_idf() {
        let vocab = TfidfVocabulary::build(&[aff("Institute Berlin"), aff("Institute Paris")], 1).unwrap();
        assert!(vocab.idf("institute").unwrap() < vocab.idf("berlin").unwrap());
        assert_eq!(vocab.idf("berlin"), Some((3.0f64 / 2.0).ln() + 1.0));
    }

    #[test]
    fn min_df_prunes() {
        let vocab = TfidfVocabulary::build(&[aff("Institute Berlin"), aff("Institute Paris")], 2).unwrap();
        assert_eq!(vocab.tokens().collect::<Vec<_>>(), vec!["institute"]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(TfidfVocabulary::build(&[], 1), Err(ImputeError::EmptyCorpus)));
    }

    #[test]
    fn vectorize_edge_cases() {
        let vocab = TfidfVocabulary::build(&[aff("Berlin Institute"), aff("Paris Institute")], 1).unwrap();
        assert!(vocab.vectorize(&aff("Tokyo Osaka")).entries.is_empty());

        let single = vocab.vectorize(&aff("Berlin"));
        assert_eq!(single.entries.len(), 1);
        assert!((single.norm() - 1.0).abs() < 1e-15);

        // "berlin berlin institute": tf = (2, 1); weights 2*idf_b, idf_i.
        let idf_b = (3.0f64 / 2.0).ln() + 1.0;
        let idf_i = 1.0;
        let norm = ((2.0 * idf_b).powi(2) + idf_i * idf_i).sqrt();
        let v = vocab.vectorize(&aff("berlin berlin institute"));
        let b = vocab.index_of("berlin").unwrap();
        let i = vocab.index_of("institute").unwrap();
        assert!((v.get(b) - 2.0 * idf_b / norm).abs() < 1e-15);
        assert!((v.get(i) - idf_i / norm).abs() < 1e-15);

        let once = vocab.vectorize(&aff("berlin"));
        let twice = vocab.vectorize(&aff("berlin berlin"));
        assert_eq!(once, twice);
    }

    #[test]
    fn tokenizer_is_unicode_aware() {
        let tokens: Vec<_> = tokenize("Universität München, 80539 MÜNCHEN").collect();
        assert_eq!(tokens, vec!["universität", "münchen", "80539", "münchen"]);
    }
}
