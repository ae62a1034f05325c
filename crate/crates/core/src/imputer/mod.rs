//! Missing-country imputation.
//!
//! Affiliation text (institution, city, address) is turned into tf-idf
//! bag-of-words vectors and fed to a one-hidden-layer ReLU network with a
//! softmax over the countries seen in training.

mod network;
mod tfidf;

use std::collections::BTreeSet;
use std::io::{self, Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::country::CountryCode;
use crate::records::{Affiliation, RecordStore, StoreError};

pub use network::{softmax, FeedForward, Gradient};
pub use tfidf::{affiliation_tokens, tokenize, SparseVector, TfidfVocabulary};

const MODEL_FORMAT: &str = "scimobility-country-classifier";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ImputeError {
    #[error("no affiliations to build a vocabulary from")]
    EmptyCorpus,
    #[error("degenerate label set: need at least two distinct countries")]
    DegenerateLabels,
    #[error("split fraction {0} must lie strictly between 0 and 1")]
    BadSplit(f64),
    #[error("too few labeled rows ({0}) for a train/test split")]
    TooFewRows(usize),
    #[error("vocabulary is empty after min_df pruning")]
    EmptyVocabulary,
    #[error("model file: {0}")]
    Model(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Fraction of rows used for training; the rest is held out.
    pub split_fraction: f64,
    pub seed: u64,
    pub epochs: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub min_df: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            split_fraction: 0.8,
            seed: 42,
            epochs: 20,
            hidden: 256,
            learning_rate: 0.1,
            batch_size: 32,
            min_df: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// `None` is the "unknown" sentinel for affiliations with no known token.
    pub country: Option<CountryCode>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryClassifier {
    format: String,
    version: u32,
    vocabulary: TfidfVocabulary,
    network: FeedForward,
    classes: Vec<CountryCode>,
    training_seed: u64,
}

impl CountryClassifier {
    pub fn vocabulary(&self) -> &TfidfVocabulary {
        &self.vocabulary
    }

    pub fn classes(&self) -> &[CountryCode] {
        &self.classes
    }

    pub fn training_seed(&self) -> u64 {
        self.training_seed
    }

    pub fn network(&self) -> &FeedForward {
        &self.network
    }

    /// Class probabilities, or `None` when the feature vector is zero.
    pub fn probabilities(&self, affiliation: &Affiliation) -> Option<Vec<f64>> {
        let x = self.vocabulary.vectorize(affiliation);
        if x.is_zero() {
            return None;
        }
        Some(self.network.forward(&x).probs)
    }

    pub fn predict(&self, affiliation: &Affiliation) -> Prediction {
        match self.probabilities(affiliation) {
            None => Prediction {
                country: None,
                confidence: 0.0,
            },
            Some(probs) => {
                let (best, conf) = argmax(&probs);
                Prediction {
                    country: Some(self.classes[best]),
                    confidence: conf,
                }
            }
        }
    }

    pub fn save<W: Write>(&self, out: W) -> Result<(), ImputeError> {
        serde_json::to_writer(out, self).map_err(|e| ImputeError::Model(e.to_string()))
    }

    pub fn load<R: Read>(input: R) -> Result<Self, ImputeError> {
        let model: Self = serde_json::from_reader(input).map_err(|e| ImputeError::Model(e.to_string()))?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(ImputeError::Model(format!(
                "unsupported model {} v{}",
                model.format, model.version
            )));
        }
        if model.network.inputs() != model.vocabulary.len() || model.network.outputs() != model.classes.len() {
            return Err(ImputeError::Model("network shape does not match vocabulary/classes".into()));
        }
        Ok(model)
    }
}

// Lowest index wins ties.
fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    (best, values[best])
}

/// Trains on a seeded shuffle-split and returns the held-out accuracy.
pub fn train(
    labeled: &[(Affiliation, CountryCode)],
    config: &TrainConfig,
) -> Result<(CountryClassifier, f64), ImputeError> {
    if !(config.split_fraction > 0.0 && config.split_fraction < 1.0) {
        return Err(ImputeError::BadSplit(config.split_fraction));
    }
    let classes: Vec<CountryCode> = labeled
        .iter()
        .map(|(_, c)| *c)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(ImputeError::DegenerateLabels);
    }
    let n = labeled.len();
    let n_train = ((n as f64) * config.split_fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(ImputeError::TooFewRows(n));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (train_idx, test_idx) = order.split_at(n_train);

    let train_affs: Vec<Affiliation> = train_idx.iter().map(|&i| labeled[i].0.clone()).collect();
    let vocabulary = TfidfVocabulary::build(&train_affs, config.min_df)?;
    if vocabulary.is_empty() {
        return Err(ImputeError::EmptyVocabulary);
    }
    let label_of = |c: &CountryCode| classes.binary_search(c).expect("label drawn from classes");
    let examples: Vec<(SparseVector, usize)> = train_idx
        .iter()
        .map(|&i| (vocabulary.vectorize(&labeled[i].0), label_of(&labeled[i].1)))
        .collect();

    let mut network = FeedForward::init(vocabulary.len(), config.hidden, classes.len(), &mut rng);
    let mut grad = Gradient::zeros(&network);
    let mut batch_order: Vec<usize> = (0..examples.len()).collect();
    let batch_size = config.batch_size.max(1);
    for _ in 0..config.epochs {
        batch_order.shuffle(&mut rng);
        for batch in batch_order.chunks(batch_size) {
            for &i in batch {
                let (x, y) = &examples[i];
                network.accumulate(x, *y, &mut grad);
            }
            network.apply(&mut grad, config.learning_rate, batch.len());
        }
    }

    let classifier = CountryClassifier {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        vocabulary,
        network,
        classes,
        training_seed: config.seed,
    };
    let correct = test_idx
        .iter()
        .filter(|&&i| classifier.predict(&labeled[i].0).country == Some(labeled[i].1))
        .count();
    let accuracy = correct as f64 / test_idx.len() as f64;
    Ok((classifier, accuracy))
}

/// Labeled affiliations from records that carry a country, capped at
/// `max_rows` by a seeded sample.
pub fn labeled_rows(store: &RecordStore, max_rows: usize, seed: u64) -> Vec<(Affiliation, CountryCode)> {
    let mut rows: Vec<(Affiliation, CountryCode)> = store
        .records()
        .iter()
        .filter_map(|r| r.country().map(|c| (r.affiliation.clone(), c)))
        .collect();
    if rows.len() > max_rows {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rows.shuffle(&mut rng);
        rows.truncate(max_rows);
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationStatus {
    Imputed,
    LowConfidence,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationEntry {
    pub record_id: String,
    pub predicted: Option<CountryCode>,
    pub confidence: f64,
    pub status: ImputationStatus,
}

/// Fills missing countries whose prediction reaches `confidence_floor`.
///
/// Existing countries are never touched. Every record that was missing gets
/// one report entry, in store order.
pub fn impute(
    store: &RecordStore,
    classifier: &CountryClassifier,
    confidence_floor: f64,
) -> Result<(RecordStore, Vec<ImputationEntry>), ImputeError> {
    let report: Vec<ImputationEntry> = store
        .records()
        .par_iter()
        .filter(|r| r.country().is_none())
        .map(|r| {
            let p = classifier.predict(&r.affiliation);
            let status = match p.country {
                None => ImputationStatus::Unknown,
                Some(_) if p.confidence >= confidence_floor => ImputationStatus::Imputed,
                Some(_) => ImputationStatus::LowConfidence,
            };
            ImputationEntry {
                record_id: r.record_id.clone(),
                predicted: p.country,
                confidence: p.confidence,
                status,
            }
        })
        .collect();
    if report.is_empty() {
        return Ok((store.clone(), report));
    }
    let mut filled = store.clone().into_records();
    for entry in &report {
        if entry.status == ImputationStatus::Imputed {
            let pos = store.position(&entry.record_id).expect("entry from this store");
            filled[pos].affiliation.country = entry.predicted;
        }
    }
    Ok((RecordStore::new(filled)?, report))
}

pub fn write_report<W: Write>(report: &[ImputationEntry], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["record_id", "predicted", "confidence", "status"])?;
    for e in report {
        let status = match e.status {
            ImputationStatus::Imputed => "imputed",
            ImputationStatus::LowConfidence => "low confidence",
            ImputationStatus::Unknown => "unknown",
        };
        w.write_record([
            e.record_id.as_str(),
            e.predicted.map(|c| c.to_string()).as_deref().unwrap_or("unknown"),
            &e.confidence.to_string(),
            status,
        ])?;
    }
    w.flush()?;
    Ok(())
}
