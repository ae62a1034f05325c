//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AuthorDocument, TopicError};

const MODEL_FORMAT: &str = "scimobility-lda";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    /// Symmetric document-topic prior; `None` means 50 / k.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            k: 30,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            seed: 42,
        }
    }
}

impl LdaConfig {
    pub fn with_k(self, k: usize) -> Self {
        Self { k, ..self }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

/// Documents as word ids over a sorted vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub vocabulary: Vec<String>,
    pub author_ids: Vec<String>,
    pub docs: Vec<Vec<u32>>,
}

impl Corpus {
    pub fn from_documents(documents: &[AuthorDocument]) -> Self {
        let mut index: BTreeMap<&str, u32> = documents.iter().flat_map(|d| d.tokens()).map(|t| (t, 0)).collect();
        for (i, id) in index.values_mut().enumerate() {
            *id = i as u32;
        }
        let docs = documents.iter().map(|d| d.tokens().map(|t| index[t]).collect()).collect();
        Self {
            vocabulary: index.keys().map(|t| t.to_string()).collect(),
            author_ids: documents.iter().map(|d| d.author_id.clone()).collect(),
            docs,
        }
    }

    pub fn token_count(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Sorted, de-duplicated ids of the documents containing each word.
    pub fn postings(&self) -> Vec<Vec<u32>> {
        let mut postings = vec![Vec::new(); self.vocabulary.len()];
        for (d, doc) in self.docs.iter().enumerate() {
            for &w in doc {
                let list: &mut Vec<u32> = &mut postings[w as usize];
                if list.last() != Some(&(d as u32)) {
                    list.push(d as u32);
                }
            }
        }
        postings
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub format: String,
    pub version: u32,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    pub vocabulary: Vec<String>,
    pub author_ids: Vec<String>,
    pub doc_topic_counts: Vec<Vec<u32>>,
    pub topic_word_counts: Vec<Vec<u32>>,
    pub topic_word: Vec<Vec<f64>>,
    pub doc_topic: Vec<Vec<f64>>,
}

fn normalized(row: Vec<f64>) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    row.into_iter().map(|v| v / total).collect()
}

fn sample(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return k;
        }
    }
    weights.len() - 1
}

pub fn fit_lda(corpus: &Corpus, cfg: &LdaConfig) -> Result<TopicModel, TopicError> {
    let k = cfg.k;
    if k < 2 {
        return Err(TopicError::TooFewTopics(k));
    }
    if corpus.docs.len() < k {
        return Err(TopicError::TooFewDocuments {
            docs: corpus.docs.len(),
            k,
        });
    }
    let v = corpus.vocabulary.len();
    if v == 0 {
        return Err(TopicError::EmptyVocabulary);
    }
    let alpha = cfg.alpha();
    let beta = cfg.beta;
    let v_beta = v as f64 * beta;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut n_dk = vec![0u32; corpus.docs.len() * k];
    let mut n_wk = vec![0u32; v * k];
    let mut n_k = vec![0u32; k];
    let mut z: Vec<Vec<u16>> = Vec::with_capacity(corpus.docs.len());
    for (d, doc) in corpus.docs.iter().enumerate() {
        let zs: Vec<u16> = doc
            .iter()
            .map(|&w| {
                let t = rng.random_range(0..k);
                n_dk[d * k + t] += 1;
                n_wk[w as usize * k + t] += 1;
                n_k[t] += 1;
                t as u16
            })
            .collect();
        z.push(zs);
    }

    let mut p = vec![0.0; k];
    for _ in 0..cfg.iterations {
        for (d, doc) in corpus.docs.iter().enumerate() {
            let dk = &mut n_dk[d * k..(d + 1) * k];
            for (i, &w) in doc.iter().enumerate() {
                let w = w as usize;
                let old = z[d][i] as usize;
                dk[old] -= 1;
                n_wk[w * k + old] -= 1;
                n_k[old] -= 1;
                let wk = &n_wk[w * k..(w + 1) * k];
                for t in 0..k {
                    p[t] = (dk[t] as f64 + alpha) * (wk[t] as f64 + beta) / (n_k[t] as f64 + v_beta);
                }
                let new = sample(&p, &mut rng);
                dk[new] += 1;
                n_wk[w * k + new] += 1;
                n_k[new] += 1;
                z[d][i] = new as u16;
            }
            debug_assert_eq!(dk.iter().map(|&c| c as usize).sum::<usize>(), doc.len());
        }
    }

    let topic_word_counts: Vec<Vec<u32>> = (0..k).map(|t| (0..v).map(|w| n_wk[w * k + t]).collect()).collect();
    let doc_topic_counts: Vec<Vec<u32>> = n_dk.chunks(k).map(<[u32]>::to_vec).collect();
    let topic_word = topic_word_counts
        .iter()
        .enumerate()
        .map(|(t, row)| {
            normalized(
                row.iter()
                    .map(|&c| (c as f64 + beta) / (n_k[t] as f64 + v_beta))
                    .collect(),
            )
        })
        .collect();
    let doc_topic = doc_topic_counts
        .iter()
        .zip(&corpus.docs)
        .map(|(row, doc)| {
            let denom = doc.len() as f64 + k as f64 * alpha;
            normalized(row.iter().map(|&c| (c as f64 + alpha) / denom).collect())
        })
        .collect();

    Ok(TopicModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        k,
        alpha,
        beta,
        seed: cfg.seed,
        iterations: cfg.iterations,
        vocabulary: corpus.vocabulary.clone(),
        author_ids: corpus.author_ids.clone(),
        doc_topic_counts,
        topic_word_counts,
        topic_word,
        doc_topic,
    })
}

impl TopicModel {
    /// Word ids of the `n` most probable words; ties go to the smaller id.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<usize> {
        let row = &self.topic_word[topic];
        let mut ids: Vec<usize> = (0..row.len()).collect();
        ids.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        ids.truncate(n);
        ids
    }

    pub fn save<W: Write>(&self, out: W) -> Result<(), TopicError> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self, TopicError> {
        let model: TopicModel = serde_json::from_reader(input)?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(TopicError::Model(format!(
                "unsupported format {} v{}",
                model.format, model.version
            )));
        }
        let shape_ok = model.topic_word.len() == model.k
            && model.topic_word_counts.len() == model.k
            && model.topic_word.iter().all(|r| r.len() == model.vocabulary.len())
            && model.doc_topic.len() == model.author_ids.len()
            && model.doc_topic.iter().all(|r| r.len() == model.k);
        if !shape_ok {
            return Err(TopicError::Model("inconsistent shapes".into()));
        }
        Ok(model)
    }
}

fn co_occurrence(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Mean topic coherence in [0, 1].
///
/// For each topic's top words w1..wn (by probability) every pair i > j scores
/// ln(D(wi, wj) + 1) / ln(D(wj) + 1), where D counts documents containing the
/// word(s): a UMass-style ratio that is 1 when wi appears wherever wj does and
/// 0 when they never meet. Pairs average within a topic, topics average.
pub fn coherence(model: &TopicModel, corpus: &Corpus, top_n: usize) -> f64 {
    let postings = corpus.postings();
    let per_topic: Vec<f64> = (0..model.k)
        .map(|t| {
            let top = model.top_words(t, top_n);
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for i in 1..top.len() {
                for j in 0..i {
                    let dj = postings[top[j]].len();
                    let dij = co_occurrence(&postings[top[i]], &postings[top[j]]);
                    if dj > 0 {
                        sum += ((dij + 1) as f64).ln() / ((dj + 1) as f64).ln();
                    }
                    pairs += 1;
                }
            }
            if pairs == 0 {
                0.0
            } else {
                sum / pairs as f64
            }
        })
        .collect();
    per_topic.iter().sum::<f64>() / per_topic.len() as f64
}

/// Fits each grid value and returns the best coherence with the full table.
/// Ties go to the earlier grid entry.
pub fn select_k(
    corpus: &Corpus,
    grid: &[usize],
    base: &LdaConfig,
    top_n: usize,
) -> Result<(usize, Vec<(usize, f64)>), TopicError> {
    if grid.is_empty() {
        return Err(TopicError::EmptyGrid);
    }
    let scores = grid
        .par_iter()
        .map(|&k| {
            let model = fit_lda(corpus, &base.with_k(k))?;
            Ok((k, coherence(&model, corpus, top_n)))
        })
        .collect::<Result<Vec<_>, TopicError>>()?;
    let best = scores
        .iter()
        .fold(None::<(usize, f64)>, |best, &(k, s)| match best {
            Some((_, b)) if b >= s => best,
            _ => Some((k, s)),
        })
        .unwrap()
        .0;
    Ok((best, scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(tokens: &str) -> AuthorDocument {
        AuthorDocument {
            author_id: tokens.to_string(),
            segments: vec![tokens.split_whitespace().map(String::from).collect()],
        }
    }

    fn small_corpus() -> Corpus {
        let docs: Vec<AuthorDocument> = (0..6)
            .map(|i| if i % 2 == 0 { doc("star galaxi star orbit") } else { doc("cell gene protein cell") })
            .collect();
        Corpus::from_documents(&docs)
    }

    #[test]
    fn rows_sum_to_one_and_counts_match() {
        let corpus = small_corpus();
        let cfg = LdaConfig {
            k: 2,
            iterations: 50,
            ..LdaConfig::default()
        };
        let m = fit_lda(&corpus, &cfg).unwrap();
        for row in m.topic_word.iter().chain(&m.doc_topic) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for (counts, doc) in m.doc_topic_counts.iter().zip(&corpus.docs) {
            assert_eq!(counts.iter().sum::<u32>() as usize, doc.len());
        }
        assert_eq!(m.alpha, 25.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let corpus = small_corpus();
        let cfg = LdaConfig {
            k: 2,
            iterations: 30,
            ..LdaConfig::default()
        };
        assert_eq!(fit_lda(&corpus, &cfg).unwrap(), fit_lda(&corpus, &cfg).unwrap());
    }

    #[test]
    fn preconditions() {
        let corpus = small_corpus();
        assert!(matches!(
            fit_lda(&corpus, &LdaConfig::default().with_k(1)),
            Err(TopicError::TooFewTopics(1))
        ));
        assert!(matches!(
            fit_lda(&corpus, &LdaConfig::default().with_k(7)),
            Err(TopicError::TooFewDocuments { .. })
        ));
        let empty = Corpus::from_documents(&[doc(""), doc("")]);
        assert!(matches!(
            fit_lda(&empty, &LdaConfig::default().with_k(2)),
            Err(TopicError::EmptyVocabulary)
        ));
        assert!(matches!(select_k(&corpus, &[], &LdaConfig::default(), 5), Err(TopicError::EmptyGrid)));
    }

    #[test]
    fn coherence_extremes() {
        // Words that always co-occur: every pair scores 1.
        let together = Corpus::from_documents(&[doc("a b c"), doc("a b c"), doc("a b c")]);
        let cfg = LdaConfig {
            k: 2,
            iterations: 10,
            ..LdaConfig::default()
        };
        let m = fit_lda(&together, &cfg).unwrap();
        assert!((coherence(&m, &together, 3) - 1.0).abs() < 1e-12);

        // Each document holds one word: no pair ever co-occurs.
        let apart = Corpus::from_documents(&[doc("a a"), doc("b b"), doc("c c")]);
        let m = fit_lda(&apart, &cfg).unwrap();
        assert_eq!(coherence(&m, &apart, 3), 0.0);
    }

    #[test]
    fn save_load_round_trip() {
        let corpus = small_corpus();
        let cfg = LdaConfig {
            k: 2,
            iterations: 10,
            ..LdaConfig::default()
        };
        let m = fit_lda(&corpus, &cfg).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        assert_eq!(TopicModel::load(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn single_grid_value() {
        let corpus = small_corpus();
        let cfg = LdaConfig {
            iterations: 10,
            ..LdaConfig::default()
        };
        let (best, table) = select_k(&corpus, &[2], &cfg, 3).unwrap();
        assert_eq!(best, 2);
        assert_eq!(table.len(), 1);
    }
}
