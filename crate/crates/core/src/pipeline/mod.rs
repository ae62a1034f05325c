//! Stage sequencing, persisted intermediates and the report bundle.
//!
//! Every stage reads its inputs from and writes its outputs to one working
//! directory, so stages can also run one at a time. A full run works in
//! `<out>.partial` and renames it into place only after the manifest is
//! written.

pub mod bench;
mod config;
pub mod reports;
pub mod stages;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

pub use config::{GenderSettings, ImputerSettings, PipelineConfig, TopicSettings};

use crate::disambiguation::DisambiguationError;
use crate::gender::GenderError;
use crate::imputer::ImputeError;
use crate::kv::KvError;
use crate::mobility::MobilityError;
use crate::rates::RateError;
use crate::records::StoreError;
use crate::synth::SynthError;
use crate::topics::TopicError;

/// File names inside an output directory.
pub mod files {
    pub const RECORDS: &str = "records.jsonl";
    pub const REJECTS: &str = "rejects.csv";
    pub const COUNTRY_MODEL: &str = "country_model.json";
    pub const IMPUTER_TRAINING: &str = "imputer_training.csv";
    pub const IMPUTATION: &str = "imputation.csv";
    pub const IMPUTED: &str = "records_imputed.jsonl";
    pub const FLAGGED: &str = "flagged.csv";
    pub const REVISED_IDS: &str = "revised_ids.csv";
    pub const REVISED: &str = "records_revised.jsonl";
    pub const GENDER: &str = "gender.csv";
    pub const EVENTS: &str = "events.csv";
    pub const CATEGORIES: &str = "categories.csv";
    pub const LDA_MODEL: &str = "lda_model.json";
    pub const COHERENCE: &str = "coherence.csv";
    pub const DISCIPLINES: &str = "disciplines.csv";
    pub const DEPARTURE_RATES: &str = "departure_rates.csv";
    pub const RETURN_RATES: &str = "return_rates.csv";
    pub const COUNTRY_FLOWS: &str = "country_flows.csv";
    pub const COLLAB_SCATTER: &str = "collab_scatter.csv";
    pub const CORRELATION: &str = "correlation.csv";
    pub const PYRAMID: &str = "pyramid.csv";
    pub const FEMALE_SHARE: &str = "female_share.csv";
    pub const SUMMARY: &str = "summary.csv";
    pub const MANIFEST: &str = "manifest.json";
}

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Impute(#[from] ImputeError),
    #[error(transparent)]
    Disambiguation(#[from] DisambiguationError),
    #[error(transparent)]
    Gender(#[from] GenderError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}: {1}")]
    Intermediate(String, String),
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("config: {0}")]
    Kv(#[from] KvError),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: StageError,
    },
    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),
    #[error("output directory {0} exists and is not a report bundle")]
    OutputExists(PathBuf),
    #[error("writing output {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
}

impl PipelineError {
    pub fn stage(stage: &'static str) -> impl FnOnce(StageError) -> PipelineError {
        move |source| PipelineError::Stage { stage, source }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StageError + '_ {
    move |source| StageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `dir/name` through a temporary file renamed on success, so an
/// interrupted stage never leaves a truncated output behind.
pub fn write_atomic<F>(dir: &Path, name: &str, body: F) -> Result<(), StageError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), StageError>,
{
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    let result = (|| {
        let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        let mut out = BufWriter::new(file);
        body(&mut out)?;
        out.flush().map_err(io_err(&tmp))?;
        drop(out);
        fs::rename(&tmp, &target).map_err(io_err(&target))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(output_dir: &Path) -> Result<Self, PipelineError> {
        let path = lock_path(output_dir);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| PipelineError::Output {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(output_dir.to_path_buf())),
            Err(source) => Err(PipelineError::Output { path, source }),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn sibling(dir: &Path, suffix: &str) -> PathBuf {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    dir.with_file_name(format!("{name}{suffix}"))
}

pub fn lock_path(output_dir: &Path) -> PathBuf {
    sibling(output_dir, ".lock")
}

pub fn partial_path(output_dir: &Path) -> PathBuf {
    sibling(output_dir, ".partial")
}

/// Stage names in run order.
pub const STAGES: [&str; 8] = [
    "ingest",
    "impute",
    "disambiguate",
    "gender",
    "mobility",
    "disciplines",
    "rates",
    "report",
];

/// Runs one stage against `dir`.
pub fn run_stage(stage: &str, cfg: &PipelineConfig, dir: &Path) -> Result<(), PipelineError> {
    let (name, result) = match stage {
        "ingest" => ("ingest", stages::ingest(cfg, dir).map(|_| ())),
        "impute" => ("impute", stages::impute(cfg, dir)),
        "disambiguate" => ("disambiguate", stages::disambiguate(cfg, dir)),
        "gender" => ("gender", stages::gender(cfg, dir)),
        "mobility" => ("mobility", stages::mobility(cfg, dir)),
        "disciplines" => ("disciplines", stages::disciplines(cfg, dir)),
        "rates" => ("rates", stages::rates(cfg, dir)),
        "report" => ("report", stages::report(cfg, dir)),
        other => return Err(PipelineError::Config(format!("unknown stage `{other}`"))),
    };
    result.map_err(PipelineError::stage(name))
}

/// Runs every stage and publishes the bundle at `cfg.output_dir`.
///
/// An existing output directory is replaced only if it holds a previous
/// bundle (has a manifest). On failure the partial directory is removed.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PathBuf, PipelineError> {
    let out = cfg.output_dir.clone();
    let _lock = OutputLock::acquire(&out)?;
    if out.exists() && !out.join(files::MANIFEST).exists() && fs::read_dir(&out).map(|mut d| d.next().is_some()).unwrap_or(true) {
        return Err(PipelineError::OutputExists(out));
    }
    let partial = partial_path(&out);
    let output_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Output { path, source }
    };
    if partial.exists() {
        fs::remove_dir_all(&partial).map_err(output_err(&partial))?;
    }
    fs::create_dir_all(&partial).map_err(output_err(&partial))?;

    let result = STAGES.iter().try_for_each(|stage| run_stage(stage, cfg, &partial));
    if let Err(e) = result {
        let _ = fs::remove_dir_all(&partial);
        return Err(e);
    }
    if out.exists() {
        fs::remove_dir_all(&out).map_err(output_err(&out))?;
    }
    fs::rename(&partial, &out).map_err(output_err(&out))?;
    Ok(out)
}
