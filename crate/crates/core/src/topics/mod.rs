//! Per-researcher text documents, LDA topics and discipline labels.

pub mod collocations;
pub mod disciplines;
pub mod lda;
pub mod text;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::records::{AuthorshipRecord, RecordStore};

pub use collocations::{apply_collocations, detect_collocations, Collocation, CollocationConfig};
pub use disciplines::{assign_discipline, DisciplineMap, CANONICAL_DISCIPLINES, MULTIDISCIPLINARY};
pub use lda::{coherence, fit_lda, select_k, Corpus, LdaConfig, TopicModel};

#[derive(Debug, thiserror::Error)]
pub enum TopicError {
    #[error("need at least 2 topics, got {0}")]
    TooFewTopics(usize),
    #[error("{docs} documents cannot support {k} topics")]
    TooFewDocuments { docs: usize, k: usize },
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("empty topic-count grid")]
    EmptyGrid,
    #[error("discipline map: {0}")]
    Map(String),
    #[error("model file: {0}")]
    Model(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Stemmed tokens of one researcher. Each title, venue and keyword is its
/// own segment so collocations never span two of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorDocument {
    pub author_id: String,
    pub segments: Vec<Vec<String>>,
}

impl AuthorDocument {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().flatten().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }

    /// True when no text survived analysis.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bag(&self) -> BTreeMap<&str, usize> {
        let mut bag = BTreeMap::new();
        for t in self.tokens() {
            *bag.entry(t).or_insert(0) += 1;
        }
        bag
    }
}

pub fn build_document<'a, I>(author_id: &str, records: I) -> AuthorDocument
where
    I: IntoIterator<Item = &'a AuthorshipRecord>,
{
    let mut segments = Vec::new();
    for r in records {
        let texts = [r.publication_title.as_str(), r.journal_title.as_str()]
            .into_iter()
            .chain(r.keywords.iter().map(String::as_str));
        segments.extend(texts.map(text::analyze).filter(|s| !s.is_empty()));
    }
    AuthorDocument {
        author_id: author_id.to_string(),
        segments,
    }
}

/// One document per author, sorted by author id.
pub fn build_documents(store: &RecordStore) -> Vec<AuthorDocument> {
    let authors: Vec<&str> = store.author_ids().collect();
    authors
        .par_iter()
        .map(|a| build_document(a, store.author_records(a)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::Affiliation;

    fn rec(title: &str, journal: &str, keywords: &[&str]) -> AuthorshipRecord {
        AuthorshipRecord {
            record_id: "r".into(),
            author_id: "a".into(),
            publication_id: "p".into(),
            year: 2000,
            author_full_name: "A B".into(),
            coauthor_names: vec![],
            affiliation: Affiliation::new("x", "", "", None),
            journal_title: journal.into(),
            publication_title: title.into(),
            keywords: keywords.iter().map(|s| s.to_string()).collect(),
            subject_tags: vec![],
            funding_texts: vec![],
            grant_numbers: vec![],
        }
    }

    #[test]
    fn document_from_records() {
        let r = rec("Machine Learning for Networks.", "Journal of Physics", &["lasers", "?!"]);
        let d = build_document("a", [&r]);
        assert_eq!(d.segments, vec![vec!["machin", "learn", "network"], vec!["journal", "physic"], vec!["laser"]]);

        let twice = build_document("a", [&r, &r]);
        let (b1, b2) = (d.bag(), twice.bag());
        assert_eq!(b1.keys().collect::<Vec<_>>(), b2.keys().collect::<Vec<_>>());
        assert!(b1.iter().all(|(t, c)| b2[t] == 2 * c));
        assert_eq!(twice.len(), 2 * d.len());
    }

    #[test]
    fn punctuation_only_is_empty() {
        let d = build_document("a", [&rec("...", "", &[])]);
        assert!(d.is_empty());
    }
}
