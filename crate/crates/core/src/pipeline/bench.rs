//! Synthetic benchmark bundles and scoring a finished run against them.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use crate::country::CountryCode;
use crate::kv::KvFile;
use crate::mobility::read_events;
use crate::records::{parse_records, write_jsonl, InputFormat};
use crate::synth::score::{score_inference, Inferred, ScoreReport};
use crate::synth::vocab::TOPIC_DISCIPLINES;
use crate::synth::{generate, GeneratorConfig, GroundTruth};

use super::files::{DISCIPLINES, EVENTS, IMPUTED, REVISED};
use super::{io_err, write_atomic, StageError};

pub const BENCH_RECORDS: &str = "records.jsonl";
pub const BENCH_TRUTH: &str = "truth.jsonl";
pub const BENCH_SYNTH_CONFIG: &str = "synth.kv";
pub const BENCH_DISCIPLINE_MAP: &str = "topic_disciplines.csv";
pub const BENCH_CONFIG: &str = "benchmark.kv";
pub const BENCH_OUTPUT: &str = "report";

/// Pipeline settings for a generated population; paths are relative to the
/// bundle directory.
pub fn benchmark_kv(gen: &GeneratorConfig) -> KvFile {
    KvFile::from_pairs([
        ("seed", gen.seed.to_string()),
        ("input.path", BENCH_RECORDS.to_string()),
        ("output.dir", BENCH_OUTPUT.to_string()),
        ("imputer.max_training_rows", "5000".to_string()),
        ("lda.k", gen.topic_count.max(2).to_string()),
        ("lda.iterations", "200".to_string()),
        ("lda.discipline_map", BENCH_DISCIPLINE_MAP.to_string()),
    ])
}

/// Generates a population into `dir` with its truth, generator config,
/// a discipline map for the planted topics and a ready-to-run pipeline
/// config. Returns the pipeline config path.
pub fn write_benchmark(dir: &Path, gen: &GeneratorConfig) -> Result<PathBuf, StageError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (store, truth) = generate(gen)?;
    write_atomic(dir, BENCH_RECORDS, |w| Ok(write_jsonl(store.records(), w)?))?;
    write_atomic(dir, BENCH_TRUTH, |w| Ok(truth.write_jsonl(w)?))?;
    let render = |kv: KvFile| move |w: &mut dyn std::io::Write| w.write_all(kv.render().as_bytes()).map_err(io_err(Path::new("config")));
    write_atomic(dir, BENCH_SYNTH_CONFIG, render(gen.to_kv()))?;
    write_atomic(dir, BENCH_CONFIG, render(benchmark_kv(gen)))?;
    write_atomic(dir, BENCH_DISCIPLINE_MAP, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["topic_index", "discipline"])?;
        for (i, d) in TOPIC_DISCIPLINES.iter().take(gen.topic_count.max(2)).enumerate() {
            out.write_record([i.to_string().as_str(), d])?;
        }
        out.flush().map_err(io_err(Path::new(BENCH_DISCIPLINE_MAP)))?;
        Ok(())
    })?;
    Ok(dir.join(BENCH_CONFIG))
}

pub fn read_truth(path: &Path) -> Result<GroundTruth, StageError> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(GroundTruth::read_jsonl(BufReader::new(file))?)
}

/// Scores the intermediates of a finished run in `dir` against `truth`.
pub fn score_bundle(dir: &Path, truth: &GroundTruth) -> Result<ScoreReport, StageError> {
    let open = |name: &str| {
        let path = dir.join(name);
        File::open(&path).map(BufReader::new).map_err(io_err(&path))
    };
    let revised = parse_records(open(REVISED)?, InputFormat::Jsonl)?.store;
    let imputed: BTreeMap<String, CountryCode> = parse_records(open(IMPUTED)?, InputFormat::Jsonl)?
        .store
        .records()
        .iter()
        .filter_map(|r| r.country().map(|c| (r.record_id.clone(), c)))
        .collect();
    let events = read_events(open(EVENTS)?)?;
    let mut topics = BTreeMap::new();
    let mut reader = csv::Reader::from_reader(open(DISCIPLINES)?);
    for row in reader.records() {
        let row = row?;
        let topic: usize = row[1]
            .parse()
            .map_err(|_| StageError::Intermediate(DISCIPLINES.into(), format!("bad topic `{}`", &row[1])))?;
        topics.insert(row[0].to_string(), topic);
    }
    Ok(score_inference(
        &Inferred {
            store: Some(&revised),
            imputed: Some(&imputed),
            events: Some(&events),
            topics: Some(&topics),
        },
        truth,
    ))
}
