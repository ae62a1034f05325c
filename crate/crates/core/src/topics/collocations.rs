//! Two- and three-word collocations scored by pointwise mutual information.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AuthorDocument;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollocationConfig {
    pub min_count: usize,
    /// Natural-log PMI.
    pub score_threshold: f64,
}

impl Default for CollocationConfig {
    fn default() -> Self {
        Self {
            min_count: 5,
            score_threshold: 3.0,
        }
    }
}

/// Adjacent pair `left right` that is rewritten to `left_right`. A trigram
/// has one side that is itself a joined bigram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collocation {
    pub left: String,
    pub right: String,
    pub count: usize,
    pub pmi: f64,
}

impl Collocation {
    pub fn token(&self) -> String {
        format!("{}_{}", self.left, self.right)
    }

    pub fn word_count(&self) -> usize {
        self.left.split('_').count() + self.right.split('_').count()
    }
}

type Counts = (HashMap<String, usize>, HashMap<(String, String), usize>, usize);

fn count(segments: &[&Vec<String>]) -> Counts {
    segments
        .par_iter()
        .fold(
            || (HashMap::new(), HashMap::new(), 0usize),
            |(mut uni, mut bi, mut n), seg| {
                for t in seg.iter() {
                    *uni.entry(t.clone()).or_insert(0) += 1;
                }
                for w in seg.windows(2) {
                    *bi.entry((w[0].clone(), w[1].clone())).or_insert(0) += 1;
                }
                n += seg.len();
                (uni, bi, n)
            },
        )
        .reduce(
            || (HashMap::new(), HashMap::new(), 0),
            |(mut u1, mut b1, n1), (u2, b2, n2)| {
                for (k, v) in u2 {
                    *u1.entry(k).or_insert(0) += v;
                }
                for (k, v) in b2 {
                    *b1.entry(k).or_insert(0) += v;
                }
                (u1, b1, n1 + n2)
            },
        )
}

fn accepted<F>(counts: &Counts, cfg: &CollocationConfig, eligible: F) -> Vec<Collocation>
where
    F: Fn(&str, &str) -> bool,
{
    let (uni, bi, n) = counts;
    let mut out: Vec<Collocation> = bi
        .iter()
        .filter(|((a, b), &c)| c >= cfg.min_count && eligible(a, b))
        .filter_map(|((a, b), &c)| {
            let pmi = (c as f64 * *n as f64 / (uni[a] as f64 * uni[b] as f64)).ln();
            (pmi >= cfg.score_threshold).then(|| Collocation {
                left: a.clone(),
                right: b.clone(),
                count: c,
                pmi,
            })
        })
        .collect();
    out.sort_by(|x, y| (&x.left, &x.right).cmp(&(&y.left, &y.right)));
    out
}

/// Greedy left-to-right join of adjacent pairs in `pairs`.
fn join(segment: &[String], pairs: &HashSet<(String, String)>) -> Vec<String> {
    let mut out = Vec::with_capacity(segment.len());
    let mut i = 0;
    while i < segment.len() {
        if i + 1 < segment.len() && pairs.contains(&(segment[i].clone(), segment[i + 1].clone())) {
            out.push(format!("{}_{}", segment[i], segment[i + 1]));
            i += 2;
        } else {
            out.push(segment[i].clone());
            i += 1;
        }
    }
    out
}

fn pair_set(colls: &[Collocation], words: usize) -> HashSet<(String, String)> {
    colls
        .iter()
        .filter(|c| c.word_count() == words)
        .map(|c| (c.left.clone(), c.right.clone()))
        .collect()
}

/// Bigrams first; trigrams are then scored on the bigram-joined corpus and
/// must combine one accepted bigram with one plain word.
pub fn detect_collocations(documents: &[AuthorDocument], cfg: &CollocationConfig) -> Vec<Collocation> {
    let segments: Vec<&Vec<String>> = documents.iter().flat_map(|d| d.segments.iter()).collect();
    let bigrams = accepted(&count(&segments), cfg, |a, b| !a.contains('_') && !b.contains('_'));
    let pairs = pair_set(&bigrams, 2);
    let joined: Vec<Vec<String>> = segments.par_iter().map(|s| join(s, &pairs)).collect();
    let joined_refs: Vec<&Vec<String>> = joined.iter().collect();
    let trigrams = accepted(&count(&joined_refs), cfg, |a, b| a.contains('_') != b.contains('_'));
    bigrams.into_iter().chain(trigrams).collect()
}

/// Rewrites every document's segments with the given collocations.
pub fn apply_collocations(documents: &mut [AuthorDocument], collocations: &[Collocation]) {
    let bigrams = pair_set(collocations, 2);
    let trigrams = pair_set(collocations, 3);
    documents.par_iter_mut().for_each(|doc| {
        for seg in &mut doc.segments {
            let once = join(seg, &bigrams);
            *seg = join(&once, &trigrams);
        }
    });
}
