use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::disambiguation::{DisambiguationConfig, SimilarityWeights};
use crate::gender::DEFAULT_PROBABILITY_FLOOR;
use crate::imputer::TrainConfig;
use crate::kv::{KvError, KvFile};
use crate::rates::{canonical_cohorts, Cohort, ExposureConfig};
use crate::records::{InputFormat, OBSERVATION_WINDOW};
use crate::topics::disciplines::DEFAULT_MULTIDISCIPLINARY_THRESHOLD;
use crate::topics::{CollocationConfig, LdaConfig};

use super::PipelineError;

const KNOWN_PREFIXES: &[&str] = &[
    "seed",
    "input.",
    "output.",
    "imputer.",
    "disambiguator.",
    "gender.",
    "mobility.",
    "lda.",
    "rates.",
    "synth.",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ImputerSettings {
    /// Pretrained classifier; trained on the labeled records when absent.
    pub model: Option<PathBuf>,
    pub confidence_floor: f64,
    pub train: TrainConfig,
    pub max_training_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenderSettings {
    /// Replaces the built-in name table when set.
    pub table: Option<PathBuf>,
    pub probability_floor: f64,
    pub overrides: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicSettings {
    pub lda: LdaConfig,
    /// When non-empty, K is chosen from this grid by coherence.
    pub k_grid: Vec<usize>,
    pub top_n: usize,
    pub collocations: CollocationConfig,
    /// Required unless K is 30, which uses the shipped map.
    pub discipline_map: Option<PathBuf>,
    pub multidisciplinary_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub input: PathBuf,
    pub input_format: InputFormat,
    pub output_dir: PathBuf,
    pub imputer: ImputerSettings,
    pub disambiguation: DisambiguationConfig,
    pub gender: GenderSettings,
    pub evaluation_year: i32,
    pub topics: TopicSettings,
    pub exposure: ExposureConfig,
}

fn year_range(key: &str, raw: &str) -> Result<std::ops::RangeInclusive<i32>, KvError> {
    let bad = || KvError::Value {
        key: key.to_string(),
        value: raw.to_string(),
        reason: "expected START-END".into(),
    };
    let (a, b) = raw.split_once('-').ok_or_else(bad)?;
    let (a, b): (i32, i32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

fn resolve(base: &Path, raw: &str) -> PathBuf {
    let p = PathBuf::from(raw);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn format_of(kv: &KvFile, input: &Path) -> Result<InputFormat, PipelineError> {
    let raw = match kv.raw("input.format") {
        Some(f) => f.to_string(),
        None => input
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default()
            .to_string(),
    };
    InputFormat::from_str(&raw).map_err(|e| PipelineError::Config(e.to_string()))
}

impl PipelineConfig {
    /// Reads a key-value config; relative paths resolve against `base`.
    pub fn from_kv(kv: &KvFile, base: &Path) -> Result<Self, PipelineError> {
        kv.check_known(KNOWN_PREFIXES)?;
        let seed: u64 = kv.require("seed")?;
        let input = resolve(base, &kv.require::<String>("input.path")?);
        let output_dir = resolve(base, &kv.require::<String>("output.dir")?);
        let input_format = format_of(kv, &input)?;
        let path = |key: &str| kv.raw(key).map(|p| resolve(base, p));

        let t = TrainConfig::default();
        let imputer = ImputerSettings {
            model: path("imputer.model"),
            confidence_floor: kv.get_or("imputer.floor", 0.5)?,
            train: TrainConfig {
                split_fraction: kv.get_or("imputer.split_fraction", t.split_fraction)?,
                seed,
                epochs: kv.get_or("imputer.epochs", t.epochs)?,
                hidden: kv.get_or("imputer.hidden", t.hidden)?,
                learning_rate: kv.get_or("imputer.learning_rate", t.learning_rate)?,
                batch_size: kv.get_or("imputer.batch_size", t.batch_size)?,
                min_df: kv.get_or("imputer.min_df", t.min_df)?,
            },
            max_training_rows: kv.get_or("imputer.max_training_rows", 20_000)?,
        };

        let d = DisambiguationConfig::default();
        let weights = match kv.list::<f64>("disambiguator.weights")? {
            None => d.weights,
            Some(w) => {
                let w: [f64; 5] = w
                    .try_into()
                    .map_err(|_| PipelineError::Config("disambiguator.weights needs 5 values".into()))?;
                SimilarityWeights::new(w).map_err(|e| PipelineError::Config(e.to_string()))?
            }
        };
        let disambiguation = DisambiguationConfig {
            country_threshold: kv.get_or("disambiguator.country_threshold", d.country_threshold)?,
            publication_threshold: kv.get_or("disambiguator.publication_threshold", d.publication_threshold)?,
            merge_threshold: kv.get_or("disambiguator.merge_threshold", d.merge_threshold)?,
            weights,
        };

        let gender = GenderSettings {
            table: path("gender.table"),
            probability_floor: kv.get_or("gender.probability_floor", DEFAULT_PROBABILITY_FLOOR)?,
            overrides: path("gender.overrides"),
        };

        let l = LdaConfig::default();
        let c = CollocationConfig::default();
        let topics = TopicSettings {
            lda: LdaConfig {
                k: kv.get_or("lda.k", l.k)?,
                alpha: kv.get("lda.alpha")?,
                beta: kv.get_or("lda.beta", l.beta)?,
                iterations: kv.get_or("lda.iterations", l.iterations)?,
                seed,
            },
            k_grid: kv.list("lda.k_grid")?.unwrap_or_default(),
            top_n: kv.get_or("lda.top_n", 10)?,
            collocations: CollocationConfig {
                min_count: kv.get_or("lda.collocation_min_count", c.min_count)?,
                score_threshold: kv.get_or("lda.collocation_threshold", c.score_threshold)?,
            },
            discipline_map: path("lda.discipline_map"),
            multidisciplinary_threshold: kv.get_or("lda.multidisciplinary_threshold", DEFAULT_MULTIDISCIPLINARY_THRESHOLD)?,
        };

        let e = ExposureConfig::default();
        let cohorts = match kv.list::<String>("rates.cohorts")? {
            None => canonical_cohorts(),
            Some(list) => list
                .iter()
                .map(|s| Cohort::parse(s).map_err(|e| PipelineError::Config(e.to_string())))
                .collect::<Result<_, _>>()?,
        };
        let period = match kv.raw("rates.period") {
            None => OBSERVATION_WINDOW,
            Some(raw) => year_range("rates.period", raw)?,
        };
        let exposure = ExposureConfig {
            cohorts,
            period,
            censoring: kv.get_or("rates.censoring", e.censoring)?,
            max_years_since: kv.get_or("rates.max_years_since", e.max_years_since)?,
        };

        let cfg = Self {
            seed,
            input,
            input_format,
            output_dir,
            imputer,
            disambiguation,
            gender,
            evaluation_year: kv.get_or("mobility.evaluation_year", *OBSERVATION_WINDOW.end())?,
            topics,
            exposure,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let kv = KvFile::parse(&text)?;
        Self::from_kv(&kv, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: &str| Err(PipelineError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.imputer.confidence_floor) {
            return fail("imputer.floor must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gender.probability_floor) {
            return fail("gender.probability_floor must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.disambiguation.merge_threshold) {
            return fail("disambiguator.merge_threshold must lie in [0, 1]");
        }
        if self.topics.lda.k < 2 || self.topics.k_grid.iter().any(|&k| k < 2) {
            return fail("lda.k and every lda.k_grid value must be at least 2");
        }
        if self.topics.top_n < 2 {
            return fail("lda.top_n must be at least 2");
        }
        if self.exposure.cohorts.is_empty() {
            return fail("rates.cohorts is empty");
        }
        if self.exposure.max_years_since == 0 {
            return fail("rates.max_years_since must be at least 1");
        }
        Ok(())
    }

    /// Every effective parameter except the output directory, as recorded
    /// in the manifest.
    pub fn to_kv(&self) -> KvFile {
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let list = |v: Vec<String>| v.join(",");
        let t = &self.imputer.train;
        let l = &self.topics.lda;
        KvFile::from_pairs([
            ("seed", self.seed.to_string()),
            ("input.path", self.input.display().to_string()),
            (
                "input.format",
                match self.input_format {
                    InputFormat::Jsonl => "jsonl".into(),
                    InputFormat::Csv => "csv".into(),
                },
            ),
            ("imputer.model", opt(&self.imputer.model)),
            ("imputer.floor", self.imputer.confidence_floor.to_string()),
            ("imputer.split_fraction", t.split_fraction.to_string()),
            ("imputer.epochs", t.epochs.to_string()),
            ("imputer.hidden", t.hidden.to_string()),
            ("imputer.learning_rate", t.learning_rate.to_string()),
            ("imputer.batch_size", t.batch_size.to_string()),
            ("imputer.min_df", t.min_df.to_string()),
            ("imputer.max_training_rows", self.imputer.max_training_rows.to_string()),
            ("disambiguator.country_threshold", self.disambiguation.country_threshold.to_string()),
            ("disambiguator.publication_threshold", self.disambiguation.publication_threshold.to_string()),
            ("disambiguator.merge_threshold", self.disambiguation.merge_threshold.to_string()),
            (
                "disambiguator.weights",
                list(self.disambiguation.weights.as_array().iter().map(f64::to_string).collect()),
            ),
            ("gender.table", opt(&self.gender.table)),
            ("gender.probability_floor", self.gender.probability_floor.to_string()),
            ("gender.overrides", opt(&self.gender.overrides)),
            ("mobility.evaluation_year", self.evaluation_year.to_string()),
            ("lda.k", l.k.to_string()),
            ("lda.alpha", l.alpha().to_string()),
            ("lda.beta", l.beta.to_string()),
            ("lda.iterations", l.iterations.to_string()),
            ("lda.k_grid", list(self.topics.k_grid.iter().map(usize::to_string).collect())),
            ("lda.top_n", self.topics.top_n.to_string()),
            ("lda.collocation_min_count", self.topics.collocations.min_count.to_string()),
            ("lda.collocation_threshold", self.topics.collocations.score_threshold.to_string()),
            ("lda.discipline_map", opt(&self.topics.discipline_map)),
            ("lda.multidisciplinary_threshold", self.topics.multidisciplinary_threshold.to_string()),
            (
                "rates.cohorts",
                list(self.exposure.cohorts.iter().map(|c| c.label.clone()).collect()),
            ),
            (
                "rates.period",
                format!("{}-{}", self.exposure.period.start(), self.exposure.period.end()),
            ),
            ("rates.censoring", self.exposure.censoring.as_str().to_string()),
            ("rates.max_years_since", self.exposure.max_years_since.to_string()),
        ])
    }
}
