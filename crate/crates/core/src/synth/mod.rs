//! Synthetic populations with planted ground truth, plus the oracles and
//! scores used to check every inference stage against it.
//!
//! Each identity draws from its own ChaCha stream (stream = identity
//! index), so changing one researcher never perturbs another.

pub mod oracle;
pub mod score;
pub mod vocab;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::country::{CountryCode, GERMANY};
use crate::disambiguation::name_similarity;
use crate::gender::{Gender, NameGenderTable};
use crate::kv::{KvError, KvFile};
use crate::records::{Affiliation, AuthorshipRecord, RecordStore, StoreError, OBSERVATION_WINDOW};
use crate::topics::text;
use crate::topics::AuthorDocument;

use vocab::*;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("ground truth line {line}: {reason}")]
    Truth { line: usize, reason: String },
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub researcher_count: usize,
    pub first_year_min: i32,
    pub first_year_max: i32,
    pub career_years: u32,
    pub publications_per_year_min: u32,
    pub publications_per_year_max: u32,
    pub female_share: f64,
    /// Share of researchers who start abroad and may move to Germany.
    pub immigrant_share: f64,
    pub immigration_hazard: f64,
    /// Yearly departure probability: base × female factor × (1 + slope × age).
    pub departure_hazard: f64,
    pub female_departure_factor: f64,
    pub departure_age_slope: f64,
    /// Yearly return probability by years abroad (1, 2, ...); the last value repeats.
    pub return_hazard: Vec<f64>,
    pub tie_probability: f64,
    pub missing_country_probability: f64,
    /// Share of author ids that also carry a second, foreign identity.
    pub merge_rate: f64,
    /// Chance that a publication from abroad has a co-author in Germany.
    pub collaboration_probability: f64,
    pub topic_count: usize,
    pub words_per_title: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            researcher_count: 1000,
            first_year_min: 1996,
            first_year_max: 2006,
            career_years: 15,
            publications_per_year_min: 1,
            publications_per_year_max: 3,
            female_share: 0.4,
            immigrant_share: 0.1,
            immigration_hazard: 0.2,
            departure_hazard: 0.01,
            female_departure_factor: 0.9,
            departure_age_slope: 0.05,
            return_hazard: vec![0.08, 0.06, 0.05, 0.04, 0.03],
            tie_probability: 0.05,
            missing_country_probability: 0.02,
            merge_rate: 0.02,
            collaboration_probability: 0.3,
            topic_count: 3,
            words_per_title: 5,
            seed: 42,
        }
    }
}

fn probability(name: &str, p: f64) -> Result<(), SynthError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SynthError::Config(format!("{name} = {p} is not a probability")))
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::Config(m));
        if self.researcher_count == 0 {
            return fail("zero researchers".into());
        }
        if self.career_years == 0 {
            return fail("zero-length careers".into());
        }
        if self.first_year_min > self.first_year_max
            || self.first_year_min < *OBSERVATION_WINDOW.start()
            || self.first_year_max + self.career_years as i32 - 1 > *OBSERVATION_WINDOW.end()
        {
            return fail("careers must fit the observation window".into());
        }
        if self.publications_per_year_min == 0 || self.publications_per_year_min > self.publications_per_year_max {
            return fail("publications per year must be a range starting at 1 or more".into());
        }
        if self.return_hazard.is_empty() {
            return fail("return hazard needs at least one value".into());
        }
        if !(1..=TOPIC_WORDS.len()).contains(&self.topic_count) {
            return fail(format!("topic count must be 1..={}", TOPIC_WORDS.len()));
        }
        if self.words_per_title == 0 {
            return fail("titles need at least one topic word".into());
        }
        for (name, h) in [
            ("departure_hazard", self.departure_hazard),
            ("immigration_hazard", self.immigration_hazard),
            ("female_departure_factor", self.female_departure_factor),
        ] {
            if !(h >= 0.0) {
                return fail(format!("{name} must be non-negative"));
            }
        }
        if self.return_hazard.iter().any(|h| !(*h >= 0.0)) {
            return fail("return hazards must be non-negative".into());
        }
        probability("female_share", self.female_share)?;
        probability("immigrant_share", self.immigrant_share)?;
        probability("tie_probability", self.tie_probability)?;
        probability("missing_country_probability", self.missing_country_probability)?;
        probability("merge_rate", self.merge_rate)?;
        probability("collaboration_probability", self.collaboration_probability)?;
        Ok(())
    }

    pub fn departure_probability(&self, gender: Gender, age: u32) -> f64 {
        let factor = if gender == Gender::Female {
            self.female_departure_factor
        } else {
            1.0
        };
        (self.departure_hazard * factor * (1.0 + self.departure_age_slope * age as f64)).clamp(0.0, 1.0)
    }

    pub fn return_probability(&self, years_abroad: u32) -> f64 {
        let i = (years_abroad.max(1) as usize - 1).min(self.return_hazard.len() - 1);
        self.return_hazard[i].clamp(0.0, 1.0)
    }

    /// Reads `synth.*` keys; missing keys keep their defaults.
    pub fn from_kv(kv: &KvFile) -> Result<Self, SynthError> {
        let d = Self::default();
        let cfg = Self {
            researcher_count: kv.get_or("synth.researchers", d.researcher_count)?,
            first_year_min: kv.get_or("synth.first_year_min", d.first_year_min)?,
            first_year_max: kv.get_or("synth.first_year_max", d.first_year_max)?,
            career_years: kv.get_or("synth.career_years", d.career_years)?,
            publications_per_year_min: kv.get_or("synth.publications_per_year_min", d.publications_per_year_min)?,
            publications_per_year_max: kv.get_or("synth.publications_per_year_max", d.publications_per_year_max)?,
            female_share: kv.get_or("synth.female_share", d.female_share)?,
            immigrant_share: kv.get_or("synth.immigrant_share", d.immigrant_share)?,
            immigration_hazard: kv.get_or("synth.immigration_hazard", d.immigration_hazard)?,
            departure_hazard: kv.get_or("synth.departure_hazard", d.departure_hazard)?,
            female_departure_factor: kv.get_or("synth.female_departure_factor", d.female_departure_factor)?,
            departure_age_slope: kv.get_or("synth.departure_age_slope", d.departure_age_slope)?,
            return_hazard: kv.list("synth.return_hazard")?.unwrap_or(d.return_hazard),
            tie_probability: kv.get_or("synth.tie_probability", d.tie_probability)?,
            missing_country_probability: kv.get_or("synth.missing_country_probability", d.missing_country_probability)?,
            merge_rate: kv.get_or("synth.merge_rate", d.merge_rate)?,
            collaboration_probability: kv.get_or("synth.collaboration_probability", d.collaboration_probability)?,
            topic_count: kv.get_or("synth.topic_count", d.topic_count)?,
            words_per_title: kv.get_or("synth.words_per_title", d.words_per_title)?,
            seed: kv.require("seed").or_else(|_| kv.require("synth.seed"))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> KvFile {
        let hazards: Vec<String> = self.return_hazard.iter().map(f64::to_string).collect();
        KvFile::from_pairs([
            ("synth.researchers", self.researcher_count.to_string()),
            ("synth.first_year_min", self.first_year_min.to_string()),
            ("synth.first_year_max", self.first_year_max.to_string()),
            ("synth.career_years", self.career_years.to_string()),
            ("synth.publications_per_year_min", self.publications_per_year_min.to_string()),
            ("synth.publications_per_year_max", self.publications_per_year_max.to_string()),
            ("synth.female_share", self.female_share.to_string()),
            ("synth.immigrant_share", self.immigrant_share.to_string()),
            ("synth.immigration_hazard", self.immigration_hazard.to_string()),
            ("synth.departure_hazard", self.departure_hazard.to_string()),
            ("synth.female_departure_factor", self.female_departure_factor.to_string()),
            ("synth.departure_age_slope", self.departure_age_slope.to_string()),
            ("synth.return_hazard", hazards.join(",")),
            ("synth.tie_probability", self.tie_probability.to_string()),
            ("synth.missing_country_probability", self.missing_country_probability.to_string()),
            ("synth.merge_rate", self.merge_rate.to_string()),
            ("synth.collaboration_probability", self.collaboration_probability.to_string()),
            ("synth.topic_count", self.topic_count.to_string()),
            ("synth.words_per_title", self.words_per_title.to_string()),
            ("seed", self.seed.to_string()),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrueEvent {
    pub year: i32,
    pub from: CountryCode,
    pub to: CountryCode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityTruth {
    pub identity_id: String,
    /// Author id the identity's records carry.
    pub author_id: String,
    /// Second identity merged into another researcher's author id.
    pub ghost: bool,
    pub gender: Gender,
    pub topic: usize,
    pub full_name: String,
    /// True country for every career year, consecutive.
    pub countries: Vec<(i32, CountryCode)>,
    pub events: Vec<TrueEvent>,
}

impl IdentityTruth {
    pub fn first_year(&self) -> i32 {
        self.countries[0].0
    }

    pub fn last_year(&self) -> i32 {
        self.countries.last().unwrap().0
    }

    pub fn country_in(&self, year: i32) -> Option<CountryCode> {
        let i = year.checked_sub(self.first_year())?;
        self.countries.get(usize::try_from(i).ok()?).map(|&(_, c)| c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordTruth {
    pub record_id: String,
    pub identity_id: String,
    pub country: CountryCode,
    /// Country removed from the emitted record.
    pub hidden: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub identities: BTreeMap<String, IdentityTruth>,
    pub records: BTreeMap<String, RecordTruth>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum TruthLine {
    Identity(IdentityTruth),
    Record(RecordTruth),
}

impl GroundTruth {
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), SynthError> {
        for identity in self.identities.values() {
            serde_json::to_writer(&mut out, &TruthLine::Identity(identity.clone()))?;
            out.write_all(b"\n")?;
        }
        for record in self.records.values() {
            serde_json::to_writer(&mut out, &TruthLine::Record(record.clone()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, SynthError> {
        let mut truth = GroundTruth::default();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TruthLine = serde_json::from_str(&line).map_err(|e| SynthError::Truth {
                line: i + 1,
                reason: e.to_string(),
            })?;
            match parsed {
                TruthLine::Identity(t) => {
                    truth.identities.insert(t.identity_id.clone(), t);
                }
                TruthLine::Record(r) => {
                    truth.records.insert(r.record_id.clone(), r);
                }
            }
        }
        Ok(truth)
    }

    /// Gender of the non-ghost identity behind each author id.
    pub fn author_genders(&self) -> BTreeMap<String, Gender> {
        self.identities
            .values()
            .filter(|t| !t.ghost)
            .map(|t| (t.author_id.clone(), t.gender))
            .collect()
    }
}

fn stream(cfg: &GeneratorConfig, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(id);
    rng
}

const GHOST_STREAM_BASE: u64 = 1 << 32;
const MERGE_STREAM: u64 = u64::MAX - 1;
const COLLAB_STREAM: u64 = u64::MAX;

fn host_codes() -> Vec<CountryCode> {
    HOSTS.iter().map(|(c, _)| CountryCode::normalize(c).unwrap()).collect()
}

fn draw_host<R: Rng>(rng: &mut R, exclude: Option<CountryCode>) -> CountryCode {
    let hosts = host_codes();
    loop {
        let total: f64 = HOSTS.iter().map(|(_, w)| w).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = hosts[hosts.len() - 1];
        for (c, (_, w)) in hosts.iter().zip(HOSTS) {
            u -= w;
            if u < 0.0 {
                pick = *c;
                break;
            }
        }
        if Some(pick) != exclude {
            return pick;
        }
    }
}

/// Eight city names per country, disjoint across countries.
pub fn country_cities(country: CountryCode) -> Vec<String> {
    let code = country.as_str().to_lowercase();
    let offset = country.as_str().bytes().map(usize::from).sum::<usize>();
    (0..CITY_TAILS.len())
        .map(|j| format!("{}{}{}", CITY_HEADS[(offset + 3 * j) % CITY_HEADS.len()], CITY_TAILS[j], code))
        .collect()
}

/// Affiliation in `country`: a city from its lexicon plus shared noise.
pub fn synthetic_affiliation<R: Rng>(country: CountryCode, rng: &mut R) -> Affiliation {
    let cities = country_cities(country);
    let city = cities[rng.random_range(0..cities.len())].clone();
    let n1 = NOISE_TOKENS[rng.random_range(0..NOISE_TOKENS.len())];
    let n2 = NOISE_TOKENS[rng.random_range(0..NOISE_TOKENS.len())];
    let institution = match rng.random_range(0..3) {
        0 => format!("{n1} of {city}"),
        1 => format!("{city} {n1} of {n2}"),
        _ => format!("{n1} {n2} {city}"),
    };
    let address = format!("{} {}", STREETS[rng.random_range(0..STREETS.len())], rng.random_range(1..200));
    Affiliation::new(&institution, &city, &address, Some(country))
}

/// `rows` labeled affiliations spread uniformly over `countries`.
pub fn synthetic_affiliations(rows: usize, countries: &[CountryCode], seed: u64) -> Vec<Affiliation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows)
        .map(|i| synthetic_affiliation(countries[i % countries.len()], &mut rng))
        .collect()
}

fn zipf_pick<'a, R: Rng>(words: &[&'a str], rng: &mut R) -> &'a str {
    let total: f64 = (1..=words.len()).map(|r| 1.0 / r as f64).sum();
    let mut u = rng.random::<f64>() * total;
    for (r, w) in words.iter().enumerate() {
        u -= 1.0 / (r + 1) as f64;
        if u < 0.0 {
            return w;
        }
    }
    words[words.len() - 1]
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

/// Documents drawn from disjoint planted topics; returns them with each
/// document's topic. Document `d` has topic `d % topics`.
pub fn planted_topic_corpus(documents: usize, topics: usize, tokens_per_doc: usize, seed: u64) -> (Vec<AuthorDocument>, Vec<usize>) {
    assert!((1..=TOPIC_WORDS.len()).contains(&topics));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(documents);
    let mut labels = Vec::with_capacity(documents);
    for d in 0..documents {
        let topic = d % topics;
        let tokens = (0..tokens_per_doc)
            .map(|_| text::stem(zipf_pick(&TOPIC_WORDS[topic], &mut rng)))
            .collect();
        docs.push(AuthorDocument {
            author_id: format!("D{d:04}"),
            segments: vec![tokens],
        });
        labels.push(topic);
    }
    (docs, labels)
}

/// Table with probability 1.0 for the first `fraction` of each first-name pool.
pub fn name_table_covering(fraction: f64) -> NameGenderTable {
    let mut table = NameGenderTable::default();
    for (pool, gender) in [(&FEMALE_NAMES, Gender::Female), (&MALE_NAMES, Gender::Male)] {
        let n = (pool.len() as f64 * fraction).round() as usize;
        for name in &pool[..n] {
            table.insert(&name.to_lowercase(), gender, 1.0);
        }
    }
    table
}

struct Profile {
    author_id: String,
    identity_id: String,
    full_name: String,
    core_coauthors: Vec<String>,
    guest_surnames: &'static [&'static str],
    subject_tags: Vec<String>,
    funding: Vec<String>,
    grants: Vec<String>,
    topic: usize,
    institutions: BTreeMap<CountryCode, Affiliation>,
}

impl Profile {
    fn affiliation<R: Rng>(&mut self, country: CountryCode, rng: &mut R) -> Affiliation {
        self.institutions
            .entry(country)
            .or_insert_with(|| synthetic_affiliation(country, rng))
            .clone()
    }
}

fn coauthor<R: Rng>(surnames: &[&str], rng: &mut R) -> String {
    let initial = (b'A' + rng.random_range(0..26u8)) as char;
    format!("{initial}. {}", surnames[rng.random_range(0..surnames.len())])
}

struct Emitter<'a> {
    cfg: &'a GeneratorConfig,
    records: Vec<AuthorshipRecord>,
    truth: BTreeMap<String, RecordTruth>,
    next_publication: usize,
}

impl Emitter<'_> {
    fn new_publication(&mut self) -> String {
        self.next_publication += 1;
        format!("P{:07}", self.next_publication)
    }

    fn title<R: Rng>(&self, topic: usize, rng: &mut R) -> String {
        let generic = capitalize(GENERIC_WORDS[rng.random_range(0..GENERIC_WORDS.len())]);
        let words: Vec<&str> = (0..self.cfg.words_per_title)
            .map(|_| zipf_pick(&TOPIC_WORDS[topic], rng))
            .collect();
        format!("{generic} of {}", words.join(" "))
    }

    #[allow(clippy::too_many_arguments)]
    fn emit<R: Rng>(
        &mut self,
        profile: &mut Profile,
        publication_id: String,
        title: String,
        year: i32,
        country: CountryCode,
        hide: bool,
        rng: &mut R,
    ) {
        let record_id = format!("R{:07}", self.records.len() + 1);
        let mut coauthors = profile.core_coauthors.clone();
        if rng.random_bool(0.3) {
            coauthors.push(coauthor(profile.guest_surnames, rng));
        }
        let mut affiliation = profile.affiliation(country, rng);
        if hide {
            affiliation.country = None;
        }
        let venue = TOPIC_VENUES[profile.topic][rng.random_range(0..2)];
        let keywords = (0..2)
            .map(|_| zipf_pick(&TOPIC_WORDS[profile.topic], rng).to_string())
            .collect();
        self.truth.insert(
            record_id.clone(),
            RecordTruth {
                record_id: record_id.clone(),
                identity_id: profile.identity_id.clone(),
                country,
                hidden: hide,
            },
        );
        self.records.push(AuthorshipRecord {
            record_id,
            author_id: profile.author_id.clone(),
            publication_id,
            year,
            author_full_name: profile.full_name.clone(),
            coauthor_names: coauthors,
            affiliation,
            journal_title: format!("Journal of {venue}"),
            publication_title: title,
            keywords,
            subject_tags: profile.subject_tags.clone(),
            funding_texts: profile.funding.clone(),
            grant_numbers: profile.grants.clone(),
        });
    }
}

struct Simulated {
    truth: IdentityTruth,
    profile: Profile,
    rng: ChaCha8Rng,
    /// Years whose mode was deliberately made a two-country tie.
    tie_years: BTreeSet<i32>,
}

fn simulate_researcher(cfg: &GeneratorConfig, index: usize) -> Simulated {
    let mut rng = stream(cfg, index as u64);
    let gender = if rng.random_bool(cfg.female_share) {
        Gender::Female
    } else {
        Gender::Male
    };
    let pool: &[&str] = if gender == Gender::Female { &FEMALE_NAMES } else { &MALE_NAMES };
    let first_name = pool[rng.random_range(0..pool.len())];
    let surname = SURNAMES[rng.random_range(0..SURNAMES.len())];
    let full_name = if rng.random_bool(0.3) {
        let middle = (b'A' + rng.random_range(0..26u8)) as char;
        format!("{first_name} {middle}. {surname}")
    } else {
        format!("{first_name} {surname}")
    };
    let topic = rng.random_range(0..cfg.topic_count);
    let funder = FUNDERS[rng.random_range(0..FUNDERS.len())];
    let author_id = format!("A{:05}", index + 1);
    let profile = Profile {
        author_id: author_id.clone(),
        identity_id: author_id.clone(),
        full_name: full_name.clone(),
        core_coauthors: (0..3).map(|_| coauthor(&SURNAMES, &mut rng)).collect(),
        guest_surnames: &SURNAMES,
        subject_tags: vec![format!("TOPIC-{topic}"), format!("SUBJ-{:05}", index + 1)],
        funding: vec![funder.to_string()],
        grants: vec![format!("GR-{:06}", index + 1)],
        topic,
        institutions: BTreeMap::new(),
    };

    let first = rng.random_range(cfg.first_year_min..=cfg.first_year_max);
    let immigrant = rng.random_bool(cfg.immigrant_share);
    let mut country = if immigrant { draw_host(&mut rng, None) } else { GERMANY };
    let mut been_in_germany = !immigrant;
    let mut departed: Option<i32> = None;
    let mut countries = vec![(first, country)];
    let mut events = Vec::new();
    for year in first + 1..first + cfg.career_years as i32 {
        let previous = country;
        if previous == GERMANY {
            let age = (year - first) as u32;
            if rng.random_bool(cfg.departure_probability(gender, age)) {
                country = draw_host(&mut rng, None);
                departed = Some(year);
            }
        } else if been_in_germany {
            let since = (year - departed.expect("abroad after being in Germany implies a departure")) as u32;
            if rng.random_bool(cfg.return_probability(since)) {
                country = GERMANY;
            }
        } else if rng.random_bool(cfg.immigration_hazard.clamp(0.0, 1.0)) {
            country = GERMANY;
            been_in_germany = true;
        }
        if country != previous {
            events.push(TrueEvent {
                year,
                from: previous,
                to: country,
            });
        }
        countries.push((year, country));
    }
    Simulated {
        truth: IdentityTruth {
            identity_id: author_id.clone(),
            author_id,
            ghost: false,
            gender,
            topic,
            full_name,
            countries,
            events,
        },
        profile,
        rng,
        tie_years: BTreeSet::new(),
    }
}

fn simulate_ghost(cfg: &GeneratorConfig, index: usize, host: &IdentityTruth) -> Simulated {
    let mut rng = stream(cfg, GHOST_STREAM_BASE + index as u64);
    let gender = if rng.random_bool(0.5) { Gender::Female } else { Gender::Male };
    let mut full_name = String::new();
    for _ in 0..100 {
        full_name = format!(
            "{} {}",
            GHOST_FIRST_NAMES[rng.random_range(0..GHOST_FIRST_NAMES.len())],
            GHOST_SURNAMES[rng.random_range(0..GHOST_SURNAMES.len())]
        );
        if name_similarity(&full_name, &host.full_name) < 0.5 {
            break;
        }
    }
    let topic = rng.random_range(0..cfg.topic_count);
    let identity_id = format!("G{:05}", index + 1);
    let profile = Profile {
        author_id: host.author_id.clone(),
        identity_id: identity_id.clone(),
        full_name: full_name.clone(),
        core_coauthors: (0..3).map(|_| coauthor(&GHOST_SURNAMES, &mut rng)).collect(),
        guest_surnames: &GHOST_SURNAMES,
        subject_tags: vec![format!("GHOST-{:05}", index + 1)],
        funding: vec![GHOST_FUNDERS[rng.random_range(0..GHOST_FUNDERS.len())].to_string()],
        grants: vec![format!("GX-{:06}", index + 1)],
        topic,
        institutions: BTreeMap::new(),
    };
    let mut hosts = host_codes();
    hosts.shuffle(&mut rng);
    hosts.truncate(7);
    let first = rng.random_range(cfg.first_year_min..=cfg.first_year_max);
    let countries: Vec<(i32, CountryCode)> = (0..cfg.career_years as i32)
        .map(|i| (first + i, hosts[((i / 2) as usize).min(hosts.len() - 1)]))
        .collect();
    let events = countries
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| TrueEvent {
            year: w[1].0,
            from: w[0].1,
            to: w[1].1,
        })
        .collect();
    Simulated {
        truth: IdentityTruth {
            identity_id,
            author_id: host.author_id.clone(),
            ghost: true,
            gender,
            topic,
            full_name,
            countries,
            events,
        },
        profile,
        rng,
        tie_years: BTreeSet::new(),
    }
}

fn emit_career(cfg: &GeneratorConfig, sim: &mut Simulated, out: &mut Emitter<'_>, inject_ties: bool) {
    let countries = sim.truth.countries.clone();
    for (i, &(year, country)) in countries.iter().enumerate() {
        let rng = &mut sim.rng;
        let pubs = rng.random_range(cfg.publications_per_year_min..=cfg.publications_per_year_max);
        let tie = inject_ties && i > 0 && countries[i - 1].1 == country && rng.random_bool(cfg.tie_probability);
        let mut plan = vec![country; pubs as usize];
        if tie {
            let other = draw_host(rng, Some(country));
            plan.extend(std::iter::repeat_n(other, pubs as usize));
            sim.tie_years.insert(year);
        }
        for c in plan {
            let publication_id = out.new_publication();
            let title = out.title(sim.profile.topic, &mut sim.rng);
            let hide = sim.rng.random_bool(cfg.missing_country_probability);
            out.emit(&mut sim.profile, publication_id, title, year, c, hide, &mut sim.rng);
        }
    }
}

/// Generates the records and the truth behind them.
pub fn generate(cfg: &GeneratorConfig) -> Result<(RecordStore, GroundTruth), SynthError> {
    cfg.validate()?;
    let n = cfg.researcher_count;
    let mut researchers: Vec<Simulated> = (0..n).map(|i| simulate_researcher(cfg, i)).collect();

    let ghost_count = (cfg.merge_rate * n as f64).round() as usize;
    let mut hosts: Vec<usize> = (0..n).collect();
    hosts.shuffle(&mut stream(cfg, MERGE_STREAM));
    let mut hosts: Vec<usize> = hosts.into_iter().take(ghost_count).collect();
    hosts.sort_unstable();
    let mut ghosts: BTreeMap<usize, Simulated> = hosts
        .iter()
        .enumerate()
        .map(|(g, &h)| (h, simulate_ghost(cfg, g, &researchers[h].truth)))
        .collect();

    let mut out = Emitter {
        cfg,
        records: Vec::new(),
        truth: BTreeMap::new(),
        next_publication: 0,
    };
    for (i, sim) in researchers.iter_mut().enumerate() {
        emit_career(cfg, sim, &mut out, true);
        if let Some(ghost) = ghosts.get_mut(&i) {
            emit_career(cfg, ghost, &mut out, false);
        }
    }

    // Co-authors in Germany for publications written abroad. The partner
    // is another researcher resident in Germany that year whose mode is
    // not a planted tie, so the extra German record cannot change it.
    let mut resident: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, sim) in researchers.iter().enumerate() {
        for &(year, c) in &sim.truth.countries {
            if c == GERMANY && !sim.tie_years.contains(&year) {
                resident.entry(year).or_default().push(i);
            }
        }
    }
    let mut rng = stream(cfg, COLLAB_STREAM);
    let abroad: Vec<(usize, String, String, i32)> = out
        .records
        .iter()
        .filter_map(|r| {
            let t = &out.truth[&r.record_id];
            let i = r.author_id[1..].parse::<usize>().ok()? - 1;
            let sim = &researchers[i];
            let true_country = sim.truth.country_in(r.year)?;
            let own = t.identity_id == sim.truth.identity_id;
            (own && true_country != GERMANY && t.country == true_country)
                .then(|| (i, r.publication_id.clone(), r.publication_title.clone(), r.year))
        })
        .collect();
    for (i, publication_id, title, year) in abroad {
        if !rng.random_bool(cfg.collaboration_probability) {
            continue;
        }
        let Some(candidates) = resident.get(&year) else { continue };
        let candidates: Vec<usize> = candidates.iter().copied().filter(|&j| j != i).collect();
        if candidates.is_empty() {
            continue;
        }
        let j = candidates[rng.random_range(0..candidates.len())];
        let partner = &mut researchers[j];
        out.emit(&mut partner.profile, publication_id, title, year, GERMANY, false, &mut rng);
    }

    let mut identities = BTreeMap::new();
    for sim in researchers.into_iter().chain(ghosts.into_values()) {
        identities.insert(sim.truth.identity_id.clone(), sim.truth);
    }
    let store = RecordStore::new(out.records)?;
    Ok((
        store,
        GroundTruth {
            identities,
            records: out.truth,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GeneratorConfig {
        GeneratorConfig {
            researcher_count: 60,
            merge_rate: 0.05,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let (a, ta) = generate(&small()).unwrap();
        let (b, tb) = generate(&small()).unwrap();
        assert_eq!(a.records(), b.records());
        assert_eq!(ta, tb);
        let mut ja = Vec::new();
        let mut jb = Vec::new();
        ta.write_jsonl(&mut ja).unwrap();
        tb.write_jsonl(&mut jb).unwrap();
        assert_eq!(ja, jb);
        assert_eq!(GroundTruth::read_jsonl(ja.as_slice()).unwrap(), ta);
    }

    #[test]
    fn zero_researchers_rejected() {
        let cfg = GeneratorConfig {
            researcher_count: 0,
            ..GeneratorConfig::default()
        };
        assert!(matches!(generate(&cfg), Err(SynthError::Config(_))));
    }

    #[test]
    fn zero_hazards_make_non_movers() {
        let cfg = GeneratorConfig {
            departure_hazard: 0.0,
            immigrant_share: 0.0,
            merge_rate: 0.0,
            ..small()
        };
        let (_, truth) = generate(&cfg).unwrap();
        assert!(truth.identities.values().all(|t| t.events.is_empty()));
        assert!(truth.identities.values().all(|t| t.countries.iter().all(|&(_, c)| c == GERMANY)));
    }

    #[test]
    fn record_truth_is_consistent() {
        let (store, truth) = generate(&small()).unwrap();
        assert_eq!(store.len(), truth.records.len());
        for r in store.records() {
            let t = &truth.records[&r.record_id];
            let identity = &truth.identities[&t.identity_id];
            assert_eq!(identity.author_id, r.author_id);
            assert_eq!(identity.full_name, r.author_full_name);
            assert_eq!(t.hidden, r.country().is_none());
            if let Some(c) = r.country() {
                assert_eq!(c, t.country);
            }
        }
        let ghosts = truth.identities.values().filter(|t| t.ghost).count();
        assert_eq!(ghosts, 3);
    }

    #[test]
    fn kv_round_trip() {
        let cfg = small();
        assert_eq!(GeneratorConfig::from_kv(&cfg.to_kv()).unwrap(), cfg);
    }

    #[test]
    fn city_lexicons_are_disjoint() {
        let mut seen = BTreeSet::new();
        for c in host_codes().into_iter().chain([GERMANY]) {
            for city in country_cities(c) {
                assert!(seen.insert(city.to_lowercase()), "{city}");
            }
        }
    }
}
