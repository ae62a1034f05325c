//! Inference quality against planted truth.

use std::collections::{BTreeMap, HashMap};

use pathfinding::prelude::{kuhn_munkres, Matrix};
use serde::{Deserialize, Serialize};

use crate::country::CountryCode;
use crate::mobility::MigrationEvent;
use crate::records::RecordStore;

use super::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub inferred_pairs: u64,
    pub true_pairs: u64,
    pub shared_pairs: u64,
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Pairwise precision/recall of a clustering against the true partition.
/// Both maps go from item to cluster label and must cover the same items;
/// items missing from `truth` are ignored.
pub fn pairwise_scores(inferred: &BTreeMap<String, String>, truth: &BTreeMap<String, String>) -> PairwiseScore {
    let mut joint: HashMap<(&str, &str), u64> = HashMap::new();
    let mut left: HashMap<&str, u64> = HashMap::new();
    let mut right: HashMap<&str, u64> = HashMap::new();
    for (item, a) in inferred {
        let Some(b) = truth.get(item) else { continue };
        *joint.entry((a, b)).or_default() += 1;
        *left.entry(a).or_default() += 1;
        *right.entry(b).or_default() += 1;
    }
    let shared: u64 = joint.values().map(|&n| pairs(n)).sum();
    let inferred_pairs: u64 = left.values().map(|&n| pairs(n)).sum();
    let true_pairs: u64 = right.values().map(|&n| pairs(n)).sum();
    let precision = ratio(shared, inferred_pairs);
    let recall = ratio(shared, true_pairs);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PairwiseScore {
        precision,
        recall,
        f1,
        inferred_pairs,
        true_pairs,
        shared_pairs: shared,
    }
}

/// Record id → author id as emitted in `store`.
pub fn record_clusters(store: &RecordStore) -> BTreeMap<String, String> {
    store
        .records()
        .iter()
        .map(|r| (r.record_id.clone(), r.author_id.clone()))
        .collect()
}

/// Record id → true identity.
pub fn true_clusters(truth: &GroundTruth) -> BTreeMap<String, String> {
    truth
        .records
        .iter()
        .map(|(id, r)| (id.clone(), r.identity_id.clone()))
        .collect()
}

/// Share of hidden-country records whose predicted country is the true one.
/// `None` when nothing was hidden.
pub fn imputation_accuracy(predicted: &BTreeMap<String, CountryCode>, truth: &GroundTruth) -> Option<f64> {
    let hidden: Vec<_> = truth.records.values().filter(|r| r.hidden).collect();
    if hidden.is_empty() {
        return None;
    }
    let correct = hidden
        .iter()
        .filter(|r| predicted.get(&r.record_id) == Some(&r.country))
        .count();
    Some(correct as f64 / hidden.len() as f64)
}

/// Each author id in `store` mapped to the true identity owning most of its
/// records; ties go to the smaller identity id.
pub fn majority_identity(store: &RecordStore, truth: &GroundTruth) -> BTreeMap<String, String> {
    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for r in store.records() {
        if let Some(t) = truth.records.get(&r.record_id) {
            *counts.entry(&r.author_id).or_default().entry(&t.identity_id).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|(author, ids)| {
            let best = ids
                .iter()
                .fold(None::<(&str, usize)>, |best, (&id, &n)| match best {
                    Some((_, b)) if b >= n => best,
                    _ => Some((id, n)),
                })
                .expect("non-empty");
            (author.to_string(), best.0.to_string())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventScore {
    pub precision: f64,
    pub recall: f64,
    pub detected: usize,
    pub planted: usize,
    pub matched: usize,
}

/// Detected events (keyed by the author ids of `store`) against the
/// planted events of every identity, matched as multisets of
/// (identity, year, from, to).
pub fn event_scores(events: &[MigrationEvent], store: &RecordStore, truth: &GroundTruth) -> EventScore {
    let owner = majority_identity(store, truth);
    type Key = (String, i32, CountryCode, CountryCode);
    let mut planted: BTreeMap<Key, usize> = BTreeMap::new();
    for t in truth.identities.values() {
        for e in &t.events {
            *planted.entry((t.identity_id.clone(), e.year, e.from, e.to)).or_default() += 1;
        }
    }
    let planted_total: usize = planted.values().sum();
    let mut remaining = planted;
    let mut matched = 0;
    for e in events {
        let Some(id) = owner.get(&e.author_id) else { continue };
        if let Some(n) = remaining.get_mut(&(id.clone(), e.year, e.from_country, e.to_country)) {
            if *n > 0 {
                *n -= 1;
                matched += 1;
            }
        }
    }
    EventScore {
        precision: ratio(matched as u64, events.len() as u64),
        recall: ratio(matched as u64, planted_total as u64),
        detected: events.len(),
        planted: planted_total,
        matched,
    }
}

/// Accuracy of `predicted` labels against `planted` under the best
/// one-to-one relabeling.
pub fn topic_accuracy(predicted: &[usize], planted: &[usize]) -> f64 {
    assert_eq!(predicted.len(), planted.len(), "label vectors differ in length");
    if predicted.is_empty() {
        return 1.0;
    }
    let n = predicted.iter().chain(planted).max().unwrap() + 1;
    let mut confusion = vec![vec![0i64; n]; n];
    for (&p, &t) in predicted.iter().zip(planted) {
        confusion[p][t] += 1;
    }
    let weights = Matrix::from_rows(confusion).expect("square");
    let (best, _) = kuhn_munkres(&weights);
    best as f64 / predicted.len() as f64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub disambiguation: Option<PairwiseScore>,
    pub imputation_accuracy: Option<f64>,
    pub events: Option<EventScore>,
    pub topic_accuracy: Option<f64>,
}

/// Whatever inference outputs are at hand; missing ones are not scored.
#[derive(Debug, Clone, Copy, Default)]
pub struct Inferred<'a> {
    /// Store with revised author ids.
    pub store: Option<&'a RecordStore>,
    pub imputed: Option<&'a BTreeMap<String, CountryCode>>,
    pub events: Option<&'a [MigrationEvent]>,
    /// Author id → dominant topic index.
    pub topics: Option<&'a BTreeMap<String, usize>>,
}

pub fn score_inference(inferred: &Inferred<'_>, truth: &GroundTruth) -> ScoreReport {
    let mut report = ScoreReport::default();
    if let Some(store) = inferred.store {
        report.disambiguation = Some(pairwise_scores(&record_clusters(store), &true_clusters(truth)));
        if let Some(events) = inferred.events {
            report.events = Some(event_scores(events, store, truth));
        }
        if let Some(topics) = inferred.topics {
            let owner = majority_identity(store, truth);
            let (mut p, mut t) = (Vec::new(), Vec::new());
            for (author, &topic) in topics {
                if let Some(identity) = owner.get(author).and_then(|id| truth.identities.get(id)) {
                    p.push(topic);
                    t.push(identity.topic);
                }
            }
            report.topic_accuracy = Some(topic_accuracy(&p, &t));
        }
    }
    if let Some(imputed) = inferred.imputed {
        report.imputation_accuracy = imputation_accuracy(imputed, truth);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(items: &[(&str, &str)]) -> BTreeMap<String, String> {
        items.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn identical_partitions_score_one() {
        let t = labels(&[("r1", "x"), ("r2", "x"), ("r3", "y")]);
        let s = pairwise_scores(&t, &t);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn full_merge_loses_precision_only() {
        let truth = labels(&[("r1", "x"), ("r2", "x"), ("r3", "y"), ("r4", "y")]);
        let merged = labels(&[("r1", "a"), ("r2", "a"), ("r3", "a"), ("r4", "a")]);
        let s = pairwise_scores(&merged, &truth);
        assert_eq!(s.recall, 1.0);
        assert!((s.precision - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn topic_accuracy_ignores_label_names() {
        assert_eq!(topic_accuracy(&[2, 2, 0, 0, 1], &[0, 0, 1, 1, 2]), 1.0);
        assert!((topic_accuracy(&[0, 0, 0, 1], &[0, 0, 1, 1]) - 0.75).abs() < 1e-15);
    }
}
