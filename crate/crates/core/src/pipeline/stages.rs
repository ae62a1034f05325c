//! One function per stage; each reads its inputs from `dir` and writes its
//! outputs back to it.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::disambiguation::disambiguate as run_disambiguation;
use crate::gender::{assign_gender, profile_names, read_overrides, Assignment, Gender, NameGenderTable};
use crate::imputer::{self, CountryClassifier, ImputationEntry, ImputationStatus};
use crate::mobility::{build_timelines, detect_events, write_events, ResearcherTimeline};
use crate::rates::accumulate_exposure;
use crate::records::{parse_records, write_jsonl, write_rejects, InputFormat, RecordStore};
use crate::topics::{
    apply_collocations, build_documents, coherence, detect_collocations, fit_lda, select_k, Corpus, DisciplineMap,
    TopicError, TopicModel,
};
use crate::topics::disciplines::assign_discipline;

use super::files::*;
use super::reports::{self, CategoryRow};
use super::{io_err, write_atomic, PipelineConfig, StageError, TopicSettings, STAGES};

fn open(path: &Path) -> Result<BufReader<File>, StageError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

fn load_store(dir: &Path, name: &str) -> Result<RecordStore, StageError> {
    let outcome = parse_records(open(&dir.join(name))?, InputFormat::Jsonl)?;
    if !outcome.rejects.is_empty() {
        return Err(StageError::Intermediate(
            name.into(),
            format!("{} invalid rows", outcome.rejects.len()),
        ));
    }
    Ok(outcome.store)
}

fn write_store(dir: &Path, name: &str, store: &RecordStore) -> Result<(), StageError> {
    write_atomic(dir, name, |w| Ok(write_jsonl(store.records(), w)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestStats {
    pub records: usize,
    pub rejected: usize,
}

pub fn ingest(cfg: &PipelineConfig, dir: &Path) -> Result<IngestStats, StageError> {
    let outcome = parse_records(open(&cfg.input)?, cfg.input_format)?;
    write_store(dir, RECORDS, &outcome.store)?;
    write_atomic(dir, REJECTS, |w| Ok(write_rejects(&outcome.rejects, w)?))?;
    Ok(IngestStats {
        records: outcome.store.len(),
        rejected: outcome.rejects.len(),
    })
}

/// Loads the configured classifier, or trains one on the labeled records.
/// `None` when nothing needs imputing, or the labels hold a single country
/// so no classifier can be trained.
fn classifier(cfg: &PipelineConfig, store: &RecordStore, dir: &Path) -> Result<Option<CountryClassifier>, StageError> {
    if let Some(path) = &cfg.imputer.model {
        return Ok(Some(CountryClassifier::load(open(path)?)?));
    }
    if store.records().iter().all(|r| r.country().is_some()) {
        return Ok(None);
    }
    let labeled = imputer::labeled_rows(store, cfg.imputer.max_training_rows, cfg.seed);
    let classes: BTreeSet<_> = labeled.iter().map(|(_, c)| *c).collect();
    if classes.len() < 2 {
        return Ok(None);
    }
    let (model, accuracy) = imputer::train(&labeled, &cfg.imputer.train)?;
    write_atomic(dir, COUNTRY_MODEL, |w| Ok(model.save(w)?))?;
    write_atomic(dir, IMPUTER_TRAINING, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "value"])?;
        out.write_record(["training_rows", &labeled.len().to_string()])?;
        out.write_record(["held_out_accuracy", &accuracy.to_string()])?;
        out.flush().map_err(io_err(Path::new(IMPUTER_TRAINING)))?;
        Ok(())
    })?;
    Ok(Some(model))
}

pub fn impute(cfg: &PipelineConfig, dir: &Path) -> Result<(), StageError> {
    let store = load_store(dir, RECORDS)?;
    let (filled, report) = match classifier(cfg, &store, dir)? {
        Some(model) => imputer::impute(&store, &model, cfg.imputer.confidence_floor)?,
        None => {
            let report: Vec<ImputationEntry> = store
                .records()
                .iter()
                .filter(|r| r.country().is_none())
                .map(|r| ImputationEntry {
                    record_id: r.record_id.clone(),
                    predicted: None,
                    confidence: 0.0,
                    status: ImputationStatus::Unknown,
                })
                .collect();
            (store, report)
        }
    };
    write_atomic(dir, IMPUTATION, |w| Ok(imputer::write_report(&report, w)?))?;
    write_store(dir, IMPUTED, &filled)
}

pub fn disambiguate(cfg: &PipelineConfig, dir: &Path) -> Result<(), StageError> {
    let store = load_store(dir, IMPUTED)?;
    let outcome = run_disambiguation(&store, &cfg.disambiguation)?;
    write_atomic(dir, FLAGGED, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["author_id", "clusters"])?;
        for author in &outcome.flagged {
            let n = outcome.clusters.get(author).map(Vec::len).unwrap_or(1);
            out.write_record([author.as_str(), &n.to_string()])?;
        }
        out.flush().map_err(io_err(Path::new(FLAGGED)))?;
        Ok(())
    })?;
    write_atomic(dir, REVISED_IDS, |w| Ok(outcome.ids.write_csv(w)?))?;
    let revised = outcome.ids.apply(&store)?;
    write_store(dir, REVISED, &revised)
}

pub fn gender_assignments(cfg: &PipelineConfig, store: &RecordStore) -> Result<BTreeMap<String, Assignment>, StageError> {
    let table = match &cfg.gender.table {
        Some(path) => NameGenderTable::from_csv(open(path)?)?,
        None => NameGenderTable::builtin(),
    };
    let overrides = match &cfg.gender.overrides {
        Some(path) => read_overrides(open(path)?)?,
        None => BTreeMap::new(),
    };
    Ok(assign_gender(
        &profile_names(store),
        &table,
        cfg.gender.probability_floor,
        &overrides,
    ))
}

pub fn gender(cfg: &PipelineConfig, dir: &Path) -> Result<(), StageError> {
    let store = load_store(dir, REVISED)?;
    let assignments = gender_assignments(cfg, &store)?;
    write_atomic(dir, GENDER, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["revised_author_id", "gender", "method"])?;
        for (author, a) in &assignments {
            out.write_record([author.as_str(), a.gender.as_str(), a.method.as_str()])?;
        }
        out.flush().map_err(io_err(Path::new(GENDER)))?;
        Ok(())
    })
}

pub fn read_genders<R: Read>(input: R) -> Result<BTreeMap<String, Gender>, StageError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut out = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let gender = row[1]
            .parse::<Gender>()
            .map_err(|e| StageError::Intermediate(GENDER.into(), e.to_string()))?;
        out.insert(row[0].to_string(), gender);
    }
    Ok(out)
}

pub fn read_disciplines<R: Read>(input: R) -> Result<BTreeMap<String, String>, StageError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut out = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        out.insert(row[0].to_string(), row[3].to_string());
    }
    Ok(out)
}

pub fn mobility(cfg: &PipelineConfig, dir: &Path) -> Result<(), StageError> {
    let store = load_store(dir, REVISED)?;
    let timelines = build_timelines(&store);
    let events: Vec<_> = timelines.iter().flat_map(detect_events).collect();
    write_atomic(dir, EVENTS, |w| Ok(write_events(&events, w)?))?;
    let rows: Vec<CategoryRow> = reports::categorize(&timelines, cfg.evaluation_year);
    write_atomic(dir, CATEGORIES, |w| Ok(reports::write_categories(&rows, w)?))
}

#[derive(Debug, Clone)]
pub struct TopicOutcome {
    pub model: TopicModel,
    pub corpus: Corpus,
    /// Coherence per K tried (just the fitted K without a grid).
    pub scores: Vec<(usize, f64)>,
    pub collocations: usize,
}

/// Documents, collocations, K selection and the final fit.
pub fn fit_topics(store: &RecordStore, settings: &TopicSettings) -> Result<TopicOutcome, TopicError> {
    let mut documents = build_documents(store);
    let collocations = detect_collocations(&documents, &settings.collocations);
    apply_collocations(&mut documents, &collocations);
    let corpus = Corpus::from_documents(&documents);
    let (k, scores) = if settings.k_grid.is_empty() {
        (settings.lda.k, None)
    } else {
        let (k, scores) = select_k(&corpus, &settings.k_grid, &settings.lda, settings.top_n)?;
        (k, Some(scores))
    };
    let model = fit_lda(&corpus, &settings.lda.with_k(k))?;
    let scores = scores.unwrap_or_else(|| vec![(k, coherence(&model, &corpus, settings.top_n))]);
    Ok(TopicOutcome {
        model,
        corpus,
        scores,
        collocations: collocations.len(),
    })
}

pub fn discipline_map(settings: &TopicSettings, k: usize) -> Result<DisciplineMap, StageError> {
    let mut map = match &settings.discipline_map {
        Some(path) => DisciplineMap::from_csv(open(path)?)?,
        None if k == 30 => DisciplineMap::canonical(),
        None => {
            return Err(TopicError::Map(format!("K = {k} needs lda.discipline_map; the shipped map covers K = 30")).into())
        }
    };
    map.multidisciplinary_threshold = settings.multidisciplinary_threshold;
    Ok(map)
}

pub fn disciplines(cfg: &PipelineConfig, dir: &Path) -> Result<(), StageError> {
    let store = load_store(dir, REVISED)?;
    let outcome = fit_topics(&store, &cfg.topics)?;
    let model = &outcome.model;
    let map = discipline_map(&cfg.topics, model.k)?;
    if map.len() != model.k {
        return Err(TopicError::Map(format!("map covers {} topics, model has {}", map.len(), model.k)).into());
    }
    write_atomic(dir, LDA_MODEL, |w| Ok(model.save(w)?))?;
    write_atomic(dir, COHERENCE, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "coherence", "selected"])?;
        for (k, score) in &outcome.scores {
            out.write_record([k.to_string(), score.to_string(), (*k == model.k).to_string()])?;
        }
        out.flush().map_err(io_err(Path::new(COHERENCE)))?;
        Ok(())
    })?;
    write_atomic(dir, DISCIPLINES, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["revised_author_id", "dominant_topic", "dominant_probability", "discipline"])?;
        for (author, row) in model.author_ids.iter().zip(&model.doc_topic) {
            let (topic, p) = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best });
            out.write_record([
                author.as_str(),
                &topic.to_string(),
                &p.to_string(),
                assign_discipline(row, &map),
            ])?;
        }
        out.flush().map_err(io_err(Path::new(DISCIPLINES)))?;
        Ok(())
    })
}

struct Analysis {
    store: RecordStore,
    timelines: Vec<ResearcherTimeline>,
    genders: BTreeMap<String, Gender>,
    disciplines: BTreeMap<String, String>,
}

fn load_analysis(dir: &Path) -> Result<Analysis, StageError> {
    let store = load_store(dir, REVISED)?;
    let timelines = build_timelines(&store);
    Ok(Analysis {
        genders: read_genders(open(&dir.join(GENDER))?)?,
        disciplines: read_disciplines(open(&dir.join(DISCIPLINES))?)?,
        store,
        timelines,
    })
}

pub fn rates(cfg: &PipelineConfig, dir: &Path) -> Result<(), StageError> {
    let a = load_analysis(dir)?;
    let ledger = accumulate_exposure(&a.timelines, &a.genders, &cfg.exposure);
    write_atomic(dir, DEPARTURE_RATES, |w| {
        Ok(reports::write_rate_rows(&reports::departure_rows(&ledger), w)?)
    })?;
    write_atomic(dir, RETURN_RATES, |w| {
        Ok(reports::write_rate_rows(&reports::return_rows(&ledger), w)?)
    })?;
    write_atomic(dir, COUNTRY_FLOWS, |w| Ok(reports::write_country_flows(&a.timelines, w)?))?;
    let scatter = reports::collab_scatter(&a.timelines, &a.store, &a.genders, &a.disciplines, &cfg.exposure);
    write_atomic(dir, COLLAB_SCATTER, |w| Ok(reports::write_collab_scatter(&scatter, w)?))?;
    let correlations = reports::correlations(&scatter);
    write_atomic(dir, CORRELATION, |w| Ok(reports::write_correlations(&correlations, w)?))
}

pub fn report(cfg: &PipelineConfig, dir: &Path) -> Result<(), StageError> {
    let a = load_analysis(dir)?;
    let rows = reports::categorize(&a.timelines, cfg.evaluation_year);
    let pyramid = reports::pyramid(&rows, &a.genders);
    write_atomic(dir, PYRAMID, |w| Ok(reports::write_pyramid(&pyramid, w)?))?;
    let share = reports::female_share(&rows, &a.genders, &a.disciplines, &cfg.exposure.cohorts);
    write_atomic(dir, FEMALE_SHARE, |w| Ok(reports::write_female_share(&share, w)?))?;
    let summary = reports::summarize_population(&a.store, &a.timelines, &a.genders, &a.disciplines, cfg.evaluation_year);
    write_atomic(dir, SUMMARY, |w| Ok(reports::write_summary(&summary, w)?))?;
    write_manifest(cfg, dir)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parameters, seed and a digest of every other file in `dir`. Holds no
/// timestamps, so identical runs give identical manifests.
pub fn write_manifest(cfg: &PipelineConfig, dir: &Path) -> Result<(), StageError> {
    let mut digests = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(io_err(dir))?;
    for entry in entries {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == MANIFEST || name.starts_with('.') {
            continue;
        }
        let bytes = std::fs::read(entry.path()).map_err(io_err(&entry.path()))?;
        digests.insert(name, sha256_hex(&bytes));
    }
    let kv = cfg.to_kv();
    let parameters: BTreeMap<&str, &str> = kv.iter().collect();
    let manifest = json!({
        "format": "scimobility-report",
        "version": 1,
        "seed": cfg.seed,
        "stages": STAGES,
        "parameters": parameters,
        "files": digests,
    });
    write_atomic(dir, MANIFEST, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        w.write_all(b"\n").map_err(io_err(Path::new(MANIFEST)))?;
        Ok(())
    })
}
