//! Author-profile disambiguation.
//!
//! Suspicious profiles (too many affiliation countries or publications) are
//! split: every pair of their records is scored over five evidence channels,
//! the resulting distances are clustered bottom-up with average linkage, and
//! each cluster receives a revised author id. Records start as singletons and
//! only merge while the average linkage stays at or below the threshold, so a
//! zero threshold keeps every record apart.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::records::{AuthorshipRecord, RecordStore, StoreError};

/// Channel score when neither record carries any evidence for it.
pub const UNINFORMATIVE: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum DisambiguationError {
    #[error("similarity weights must be non-negative and sum to 1, got {0:?}")]
    Weights([f64; 5]),
    #[error("a distance matrix needs at least two records, got {0}")]
    TooFewRecords(usize),
    #[error("invalid distance matrix: {0}")]
    Matrix(String),
    #[error("clusters for `{0}` do not partition its records")]
    NotAPartition(String),
    #[error("merge threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error("id map: {0}")]
    IdMap(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    pub author_name: f64,
    pub coauthor_overlap: f64,
    pub subject_overlap: f64,
    pub funding_overlap: f64,
    pub grant_overlap: f64,
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        Self {
            author_name: 0.4,
            coauthor_overlap: 0.3,
            subject_overlap: 0.1,
            funding_overlap: 0.1,
            grant_overlap: 0.1,
        }
    }
}

impl SimilarityWeights {
    pub fn new(weights: [f64; 5]) -> Result<Self, DisambiguationError> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(DisambiguationError::Weights(weights));
        }
        let [author_name, coauthor_overlap, subject_overlap, funding_overlap, grant_overlap] = weights;
        Ok(Self {
            author_name,
            coauthor_overlap,
            subject_overlap,
            funding_overlap,
            grant_overlap,
        })
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.author_name,
            self.coauthor_overlap,
            self.subject_overlap,
            self.funding_overlap,
            self.grant_overlap,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisambiguationConfig {
    pub country_threshold: usize,
    pub publication_threshold: usize,
    pub merge_threshold: f64,
    pub weights: SimilarityWeights,
}

impl Default for DisambiguationConfig {
    fn default() -> Self {
        Self {
            country_threshold: 6,
            publication_threshold: 292,
            merge_threshold: 0.5,
            weights: SimilarityWeights::default(),
        }
    }
}

/// Author ids with more than `country_threshold` distinct affiliation
/// countries or more than `publication_threshold` distinct publications.
pub fn flag_suspicious(store: &RecordStore, country_threshold: usize, publication_threshold: usize) -> BTreeSet<String> {
    store
        .author_ids()
        .filter(|author| {
            let mut countries = BTreeSet::new();
            let mut publications = BTreeSet::new();
            for r in store.author_records(author) {
                if let Some(c) = r.country() {
                    countries.insert(c);
                }
                publications.insert(r.publication_id.as_str());
            }
            countries.len() > country_threshold || publications.len() > publication_threshold
        })
        .map(str::to_string)
        .collect()
}

fn normalize_name(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Normalized Levenshtein similarity of the full names, case-insensitive.
pub fn name_similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(&normalize_name(a), &normalize_name(b))
}

fn item_set(items: &[String]) -> BTreeSet<String> {
    items
        .iter()
        .map(|s| normalize_name(s))
        .filter(|s| !s.is_empty())
        .collect()
}

/// Jaccard index, or [`UNINFORMATIVE`] when both sides are empty.
pub fn overlap(a: &[String], b: &[String]) -> f64 {
    let a = item_set(a);
    let b = item_set(b);
    if a.is_empty() && b.is_empty() {
        return UNINFORMATIVE;
    }
    let shared = a.intersection(&b).count();
    let union = a.len() + b.len() - shared;
    shared as f64 / union as f64
}

/// Per-channel scores: name, coauthors, subjects, funding, grants.
pub fn channel_scores(a: &AuthorshipRecord, b: &AuthorshipRecord) -> [f64; 5] {
    [
        name_similarity(&a.author_full_name, &b.author_full_name),
        overlap(&a.coauthor_names, &b.coauthor_names),
        overlap(&a.subject_tags, &b.subject_tags),
        overlap(&a.funding_texts, &b.funding_texts),
        overlap(&a.grant_numbers, &b.grant_numbers),
    ]
}

pub fn pair_similarity(a: &AuthorshipRecord, b: &AuthorshipRecord, weights: &SimilarityWeights) -> f64 {
    let w = weights.as_array();
    let s: f64 = channel_scores(a, b).iter().zip(w).map(|(score, w)| score * w).sum();
    // Dividing by the summed weights keeps identical evidence at exactly 1.
    (s / w.iter().sum::<f64>()).clamp(0.0, 1.0)
}

/// Dense symmetric matrix of pairwise distances in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry, the zero diagonal and the [0, 1] range.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self, DisambiguationError> {
        if data.len() != n * n {
            return Err(DisambiguationError::Matrix(format!("expected {} entries, got {}", n * n, data.len())));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(DisambiguationError::Matrix(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let d = data[i * n + j];
                if !(0.0..=1.0).contains(&d) {
                    return Err(DisambiguationError::Matrix(format!("entry ({i},{j}) = {d} outside [0,1]")));
                }
                if d != data[j * n + i] {
                    return Err(DisambiguationError::Matrix(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Distance `1 - pair_similarity` over every pair of records.
pub fn build_distance_matrix(
    records: &[&AuthorshipRecord],
    weights: &SimilarityWeights,
) -> Result<DistanceMatrix, DisambiguationError> {
    let n = records.len();
    if n < 2 {
        return Err(DisambiguationError::TooFewRecords(n));
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = 1.0 - pair_similarity(records[i], records[j], weights);
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix::new(n, data)
}

/// One agglomeration step: cluster `right` joined into cluster `left`
/// (both named by their smallest member) at the given average linkage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub linkage: f64,
}

/// Average-linkage agglomeration, stopping before the first merge whose
/// linkage exceeds `merge_threshold`. Ties go to the smallest index pair.
pub fn agglomerate(matrix: &DistanceMatrix, merge_threshold: f64) -> Vec<Merge> {
    let n = matrix.len();
    let mut sums = matrix.data.clone();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                let linkage = sums[i * n + j] / (size[i] * size[j]) as f64;
                if best.is_none_or(|(_, _, b)| linkage < b) {
                    best = Some((i, j, linkage));
                }
            }
        }
        let Some((i, j, linkage)) = best else { break };
        if linkage > merge_threshold {
            break;
        }
        for k in 0..n {
            if active[k] && k != i && k != j {
                let s = sums[i * n + k] + sums[j * n + k];
                sums[i * n + k] = s;
                sums[k * n + i] = s;
            }
        }
        size[i] += size[j];
        active[j] = false;
        merges.push(Merge {
            left: i,
            right: j,
            linkage,
        });
    }
    merges
}

/// Replays merges into clusters: sorted members, ordered by smallest member.
pub fn clusters_from_merges(n: usize, merges: &[Merge]) -> Vec<Vec<usize>> {
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for m in merges {
        let moved = std::mem::take(&mut members[m.right]);
        members[m.left].extend(moved);
    }
    let mut clusters: Vec<Vec<usize>> = members.into_iter().filter(|c| !c.is_empty()).collect();
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    clusters
}

pub fn cluster(matrix: &DistanceMatrix, merge_threshold: f64) -> Result<Vec<Vec<usize>>, DisambiguationError> {
    if !(0.0..=1.0).contains(&merge_threshold) {
        return Err(DisambiguationError::Threshold(merge_threshold));
    }
    Ok(clusters_from_merges(matrix.len(), &agglomerate(matrix, merge_threshold)))
}

/// Record id → revised author id, plus the original id behind each revised id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisedIdMap {
    revised: BTreeMap<String, String>,
    provenance: BTreeMap<String, String>,
}

impl RevisedIdMap {
    pub fn revised_id(&self, record_id: &str) -> Option<&str> {
        self.revised.get(record_id).map(String::as_str)
    }

    pub fn original_id(&self, revised_id: &str) -> Option<&str> {
        self.provenance.get(revised_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.revised.len()
    }

    pub fn is_empty(&self) -> bool {
        self.revised.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.revised.iter().map(|(r, a)| (r.as_str(), a.as_str()))
    }

    pub fn revised_ids(&self) -> impl Iterator<Item = &str> {
        self.provenance.keys().map(String::as_str)
    }

    /// Identity map: every record keeps its author id.
    pub fn identity(store: &RecordStore) -> Self {
        reissue_ids(store, &BTreeMap::new()).expect("no clusters to validate")
    }

    /// Copy of the store with author ids replaced by revised ids.
    pub fn apply(&self, store: &RecordStore) -> Result<RecordStore, DisambiguationError> {
        let mut missing = None;
        let out = store.map_records(|r| {
            let mut r = r.clone();
            match self.revised.get(&r.record_id) {
                Some(id) => r.author_id = id.clone(),
                None => missing = Some(r.record_id.clone()),
            }
            r
        })?;
        match missing {
            Some(id) => Err(DisambiguationError::IdMap(format!("record `{id}` has no revised id"))),
            None => Ok(out),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DisambiguationError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["record_id", "original_author_id", "revised_author_id"])?;
        for (record, revised) in &self.revised {
            w.write_record([record.as_str(), &self.provenance[revised], revised.as_str()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, DisambiguationError> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers()?.clone();
        if header.iter().ne(["record_id", "original_author_id", "revised_author_id"]) {
            return Err(DisambiguationError::IdMap(format!("unexpected header {header:?}")));
        }
        let mut map = Self::default();
        for row in reader.records() {
            let row = row?;
            let (record, original, revised) = (&row[0], &row[1], &row[2]);
            if let Some(prev) = map.provenance.insert(revised.to_string(), original.to_string()) {
                if prev != original {
                    return Err(DisambiguationError::IdMap(format!("revised id `{revised}` has two originals")));
                }
            }
            if map.revised.insert(record.to_string(), revised.to_string()).is_some() {
                return Err(DisambiguationError::IdMap(format!("record `{record}` listed twice")));
            }
        }
        Ok(map)
    }
}

/// One fresh id (`<author>#<k>`, k from 1) per cluster of each clustered
/// author; everyone else keeps their id. Cluster indices refer to the
/// author's records in [`RecordStore::author_positions`] order.
pub fn reissue_ids(
    store: &RecordStore,
    clusters: &BTreeMap<String, Vec<Vec<usize>>>,
) -> Result<RevisedIdMap, DisambiguationError> {
    let mut map = RevisedIdMap::default();
    for author in store.author_ids() {
        let positions = store.author_positions(author);
        match clusters.get(author) {
            None => {
                map.provenance.insert(author.to_string(), author.to_string());
                for &p in positions {
                    map.revised
                        .insert(store.records()[p].record_id.clone(), author.to_string());
                }
            }
            Some(groups) => {
                let mut seen = vec![false; positions.len()];
                for (k, group) in groups.iter().enumerate() {
                    let revised = format!("{author}#{}", k + 1);
                    map.provenance.insert(revised.clone(), author.to_string());
                    for &i in group {
                        if i >= positions.len() || std::mem::replace(&mut seen[i], true) {
                            return Err(DisambiguationError::NotAPartition(author.to_string()));
                        }
                        map.revised
                            .insert(store.records()[positions[i]].record_id.clone(), revised.clone());
                    }
                }
                if seen.iter().any(|s| !s) {
                    return Err(DisambiguationError::NotAPartition(author.to_string()));
                }
            }
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisambiguationOutcome {
    pub flagged: BTreeSet<String>,
    pub clusters: BTreeMap<String, Vec<Vec<usize>>>,
    pub ids: RevisedIdMap,
}

/// Flags, clusters each flagged profile independently, and reissues ids.
pub fn disambiguate(
    store: &RecordStore,
    config: &DisambiguationConfig,
) -> Result<DisambiguationOutcome, DisambiguationError> {
    let flagged = flag_suspicious(store, config.country_threshold, config.publication_threshold);
    let jobs: Vec<&String> = flagged.iter().collect();
    let results: Vec<Result<(String, Vec<Vec<usize>>), DisambiguationError>> = jobs
        .par_iter()
        .map(|author| {
            let records: Vec<&AuthorshipRecord> = store.author_records(author).collect();
            if records.len() < 2 {
                return Ok(((*author).clone(), vec![vec![0]]));
            }
            let matrix = build_distance_matrix(&records, &config.weights)?;
            Ok(((*author).clone(), cluster(&matrix, config.merge_threshold)?))
        })
        .collect();
    let clusters = results.into_iter().collect::<Result<BTreeMap<_, _>, _>>()?;
    let ids = reissue_ids(store, &clusters)?;
    Ok(DisambiguationOutcome { flagged, clusters, ids })
}
