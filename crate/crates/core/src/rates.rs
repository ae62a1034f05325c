//! Cohort person-time departure and return rates, return shares by host
//! country, collaborative ratios and Pearson correlation.
//!
//! Exposure is counted per year-to-year transition. A researcher in Germany
//! in year `y` is at risk of departing in `y + 1`, and that person-year
//! counts only if `y + 1` is still observed (not past the censoring year).
//! Abroad years after the first departure are at risk of return in the same
//! way. Every at-risk year therefore has a well-defined outcome, so the
//! ratio of events to person-years is the per-year hazard.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::country::{CountryCode, GERMANY};
use crate::gender::Gender;
use crate::mobility::ResearcherTimeline;
use crate::records::{RecordStore, OBSERVATION_WINDOW};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RateError {
    #[error("undefined rate: zero person-years at risk")]
    ZeroExposure,
    #[error("no outward researchers went to {0}")]
    NoOutwardResearchers(CountryCode),
    #[error("researcher `{0}` has no publications abroad")]
    NoAbroadPublications(String),
    #[error("pearson needs equal-length inputs of at least 2 values, got {0} and {1}")]
    Lengths(usize, usize),
    #[error("pearson is undefined for zero variance")]
    ZeroVariance,
    #[error("bad cohort `{0}`")]
    Cohort(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cohort {
    pub label: String,
    pub start: i32,
    pub end: i32,
}

impl Cohort {
    pub fn new(start: i32, end: i32) -> Self {
        assert!(start <= end, "cohort {start}-{end} is empty");
        Self {
            label: format!("{start}-{end}"),
            start,
            end,
        }
    }

    pub fn contains(&self, first_pub_year: i32) -> bool {
        (self.start..=self.end).contains(&first_pub_year)
    }

    /// Parses `1998-2001`.
    pub fn parse(s: &str) -> Result<Self, RateError> {
        let bad = || RateError::Cohort(s.to_string());
        let (a, b) = s.trim().split_once('-').ok_or_else(bad)?;
        let (start, end): (i32, i32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if start > end {
            return Err(bad());
        }
        Ok(Self::new(start, end))
    }
}

impl fmt::Display for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

pub fn canonical_cohorts() -> Vec<Cohort> {
    vec![Cohort::new(1998, 2001), Cohort::new(2002, 2005), Cohort::new(2006, 2009)]
}

pub fn assign_cohort(first_pub_year: i32, cohorts: &[Cohort]) -> Option<&Cohort> {
    cohorts.iter().find(|c| c.contains(first_pub_year))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Censoring {
    /// Exposure ends at the researcher's last publication year.
    LastPublication,
    /// Exposure runs to the end of the observation window.
    WindowEnd,
}

impl std::str::FromStr for Censoring {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "last_publication" => Ok(Censoring::LastPublication),
            "window_end" => Ok(Censoring::WindowEnd),
            other => Err(format!("unknown censoring `{other}`")),
        }
    }
}

impl Censoring {
    pub fn as_str(&self) -> &'static str {
        match self {
            Censoring::LastPublication => "last_publication",
            Censoring::WindowEnd => "window_end",
        }
    }

    pub fn censor_year(&self, timeline: &ResearcherTimeline) -> i32 {
        match self {
            Censoring::LastPublication => timeline.last_pub_year,
            Censoring::WindowEnd => *OBSERVATION_WINDOW.end(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureConfig {
    pub cohorts: Vec<Cohort>,
    /// Event years that count.
    pub period: RangeInclusive<i32>,
    pub censoring: Censoring,
    /// Return strata run over years since departure 1..=this.
    pub max_years_since: u32,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        Self {
            cohorts: canonical_cohorts(),
            period: OBSERVATION_WINDOW,
            censoring: Censoring::LastPublication,
            max_years_since: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenderGroup {
    All,
    Female,
    Male,
}

impl GenderGroup {
    pub fn as_str(&self) -> &'static str {
        match self {
            GenderGroup::All => "all",
            GenderGroup::Female => "female",
            GenderGroup::Male => "male",
        }
    }

    /// Groups a researcher contributes to; unknown gender only counts overall.
    pub fn of(gender: Gender) -> &'static [GenderGroup] {
        match gender {
            Gender::Female => &[GenderGroup::All, GenderGroup::Female],
            Gender::Male => &[GenderGroup::All, GenderGroup::Male],
            Gender::Unknown => &[GenderGroup::All],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DepartureKey {
    pub cohort: String,
    pub gender: GenderGroup,
    pub age_at_departure: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReturnKey {
    pub cohort: String,
    pub gender: GenderGroup,
    pub age_at_departure: u32,
    pub years_since_departure: u32,
}

/// Whole person-years at risk and the events observed in them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub person_years: u64,
    pub events: u64,
}

impl Cell {
    pub fn add(&mut self, other: Cell) {
        self.person_years += other.person_years;
        self.events += other.events;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposureLedger {
    pub departures: BTreeMap<DepartureKey, Cell>,
    pub returns: BTreeMap<ReturnKey, Cell>,
}

impl ExposureLedger {
    pub fn merge(mut self, other: ExposureLedger) -> Self {
        for (k, c) in other.departures {
            self.departures.entry(k).or_default().add(c);
        }
        for (k, c) in other.returns {
            self.returns.entry(k).or_default().add(c);
        }
        self
    }

    pub fn departure_total<F: Fn(&DepartureKey) -> bool>(&self, keep: F) -> Cell {
        let mut total = Cell::default();
        for (_, c) in self.departures.iter().filter(|(k, _)| keep(k)) {
            total.add(*c);
        }
        total
    }

    pub fn return_total<F: Fn(&ReturnKey) -> bool>(&self, keep: F) -> Cell {
        let mut total = Cell::default();
        for (_, c) in self.returns.iter().filter(|(k, _)| keep(k)) {
            total.add(*c);
        }
        total
    }
}

/// Year of the first departure from Germany, if any, no later than `censor`.
pub fn first_departure(timeline: &ResearcherTimeline, censor: i32) -> Option<i32> {
    (timeline.first_pub_year + 1..=censor).find(|&e| {
        timeline.effective_country(e - 1) == Ok(GERMANY) && timeline.effective_country(e) != Ok(GERMANY)
    })
}

fn researcher_exposure(
    timeline: &ResearcherTimeline,
    cohort: &str,
    gender: Gender,
    cfg: &ExposureConfig,
) -> ExposureLedger {
    let mut ledger = ExposureLedger::default();
    let first = timeline.first_pub_year;
    let censor = cfg.censoring.censor_year(timeline);
    let country = |y: i32| timeline.effective_country(y).expect("years start at first publication");

    for y in first..censor {
        let e = y + 1;
        if country(y) != GERMANY || !cfg.period.contains(&e) {
            continue;
        }
        let departed = country(e) != GERMANY;
        for &g in GenderGroup::of(gender) {
            let cell = ledger
                .departures
                .entry(DepartureKey {
                    cohort: cohort.to_string(),
                    gender: g,
                    age_at_departure: (e - first) as u32,
                })
                .or_default();
            cell.person_years += 1;
            cell.events += departed as u64;
        }
    }

    if let Some(d) = first_departure(timeline, censor) {
        for y in d..censor {
            let e = y + 1;
            let since = (e - d) as u32;
            if since > cfg.max_years_since {
                break;
            }
            let returned = country(e) == GERMANY;
            if cfg.period.contains(&e) {
                for &g in GenderGroup::of(gender) {
                    let cell = ledger
                        .returns
                        .entry(ReturnKey {
                            cohort: cohort.to_string(),
                            gender: g,
                            age_at_departure: (d - first) as u32,
                            years_since_departure: since,
                        })
                        .or_default();
                    cell.person_years += 1;
                    cell.events += returned as u64;
                }
            }
            if returned {
                break;
            }
        }
    }
    ledger
}

/// Ledger over German-origin researchers whose first publication falls in
/// one of the configured cohorts.
pub fn accumulate_exposure(
    timelines: &[ResearcherTimeline],
    genders: &BTreeMap<String, Gender>,
    cfg: &ExposureConfig,
) -> ExposureLedger {
    timelines
        .par_iter()
        .filter(|t| t.is_german_origin())
        .filter_map(|t| {
            let cohort = assign_cohort(t.first_pub_year, &cfg.cohorts)?;
            let gender = genders.get(&t.author_id).copied().unwrap_or(Gender::Unknown);
            Some(researcher_exposure(t, &cohort.label, gender, cfg))
        })
        .reduce(ExposureLedger::default, ExposureLedger::merge)
}

pub fn rate_per_1000(cell: Cell) -> Result<f64, RateError> {
    if cell.person_years == 0 {
        return Err(RateError::ZeroExposure);
    }
    Ok(cell.events as f64 / cell.person_years as f64 * 1000.0)
}

/// Departures per 1,000 person-years in Germany.
pub fn departure_rate(cell: Cell) -> Result<f64, RateError> {
    rate_per_1000(cell)
}

/// First returns per 1,000 person-years abroad.
pub fn return_rate(cell: Cell) -> Result<f64, RateError> {
    rate_per_1000(cell)
}

/// Per host country: German-origin researchers whose first destination it
/// was, and how many of them later appear in Germany again.
pub fn country_flows(timelines: &[ResearcherTimeline]) -> BTreeMap<CountryCode, (usize, usize)> {
    let mut flows: BTreeMap<CountryCode, (usize, usize)> = BTreeMap::new();
    for t in timelines.iter().filter(|t| t.is_german_origin()) {
        let Some(d) = first_departure(t, t.last_pub_year) else { continue };
        let host = t.effective_country(d).expect("departure year is observed");
        let returned = (d + 1..=t.last_pub_year).any(|y| t.effective_country(y) == Ok(GERMANY));
        let entry = flows.entry(host).or_default();
        entry.0 += 1;
        entry.1 += returned as usize;
    }
    flows
}

pub fn country_return_share(timelines: &[ResearcherTimeline], host: CountryCode) -> Result<f64, RateError> {
    match country_flows(timelines).get(&host) {
        Some(&(outward, returned)) if outward > 0 => Ok(returned as f64 / outward as f64),
        _ => Err(RateError::NoOutwardResearchers(host)),
    }
}

/// Publications with at least one German affiliation among all their records.
pub struct PublicationIndex {
    german: HashMap<String, bool>,
}

impl PublicationIndex {
    pub fn build(store: &RecordStore) -> Self {
        let mut german: HashMap<String, bool> = HashMap::new();
        for r in store.records() {
            *german.entry(r.publication_id.clone()).or_insert(false) |= r.country() == Some(GERMANY);
        }
        Self { german }
    }

    pub fn has_german_affiliation(&self, publication_id: &str) -> bool {
        self.german.get(publication_id).copied().unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollabRatio {
    pub author_id: String,
    pub german_linked: usize,
    pub total: usize,
    pub ratio: f64,
}

/// Share of the distinct publications from abroad years (from the first
/// departure on) that list any German affiliation.
pub fn collaborative_ratio(
    timeline: &ResearcherTimeline,
    store: &RecordStore,
    index: &PublicationIndex,
) -> Result<CollabRatio, RateError> {
    let no_abroad = || RateError::NoAbroadPublications(timeline.author_id.clone());
    let d = first_departure(timeline, timeline.last_pub_year).ok_or_else(no_abroad)?;
    let mut publications: BTreeMap<&str, bool> = BTreeMap::new();
    for r in store.author_records(&timeline.author_id) {
        if r.year >= d && timeline.effective_country(r.year).is_ok_and(|c| c != GERMANY) {
            publications.insert(&r.publication_id, index.has_german_affiliation(&r.publication_id));
        }
    }
    let total = publications.len();
    if total == 0 {
        return Err(no_abroad());
    }
    let german_linked = publications.values().filter(|&&g| g).count();
    Ok(CollabRatio {
        author_id: timeline.author_id.clone(),
        german_linked,
        total,
        ratio: german_linked as f64 / total as f64,
    })
}

/// Product-moment correlation, clamped to [-1, 1].
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, RateError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(RateError::Lengths(xs.len(), ys.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(RateError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn cc(s: &str) -> CountryCode {
        CountryCode::normalize(s).unwrap()
    }

    fn series(author: &str, start: i32, codes: &[&str]) -> ResearcherTimeline {
        let modes = codes
            .iter()
            .enumerate()
            .map(|(i, c)| (start + i as i32, BTreeSet::from([cc(c)])))
            .collect();
        ResearcherTimeline::from_modes(author, modes).unwrap()
    }

    fn one_cohort() -> ExposureConfig {
        ExposureConfig {
            cohorts: vec![Cohort::new(1996, 2010)],
            ..ExposureConfig::default()
        }
    }

    #[test]
    fn cohorts() {
        let cs = canonical_cohorts();
        assert_eq!(assign_cohort(1999, &cs).unwrap().label, "1998-2001");
        assert!(assign_cohort(1997, &cs).is_none());
        assert_eq!(assign_cohort(2009, &cs).unwrap().label, "2006-2009");
        assert_eq!(Cohort::parse("2002-2005").unwrap(), cs[1]);
        assert!(Cohort::parse("2005-2002").is_err());
    }

    #[test]
    fn stayer_exposure() {
        // Four observed years give three observed transitions.
        let t = series("a", 2000, &["DE", "DE", "DE", "DE"]);
        let ledger = accumulate_exposure(&[t], &BTreeMap::new(), &one_cohort());
        let total = ledger.departure_total(|k| k.gender == GenderGroup::All);
        assert_eq!(total, Cell { person_years: 3, events: 0 });
        assert!(ledger.returns.is_empty());
    }

    #[test]
    fn departure_and_return_trace() {
        let t = series("a", 2000, &["DE", "DE", "US", "US", "DE"]);
        let ledger = accumulate_exposure(&[t], &BTreeMap::new(), &one_cohort());
        let dep = ledger.departure_total(|_| true);
        assert_eq!(dep, Cell { person_years: 2, events: 1 });
        let key = DepartureKey {
            cohort: "1996-2010".into(),
            gender: GenderGroup::All,
            age_at_departure: 2,
        };
        assert_eq!(ledger.departures[&key], Cell { person_years: 1, events: 1 });
        let ret = ledger.return_total(|_| true);
        assert_eq!(ret, Cell { person_years: 2, events: 1 });
        let key = ReturnKey {
            cohort: "1996-2010".into(),
            gender: GenderGroup::All,
            age_at_departure: 2,
            years_since_departure: 2,
        };
        assert_eq!(ledger.returns[&key], Cell { person_years: 1, events: 1 });
    }

    #[test]
    fn window_end_censoring_extends_exposure() {
        let t = series("a", 2015, &["DE", "DE"]);
        let cfg = ExposureConfig {
            censoring: Censoring::WindowEnd,
            ..one_cohort()
        };
        let cfg = ExposureConfig {
            cohorts: vec![Cohort::new(2015, 2015)],
            ..cfg
        };
        let ledger = accumulate_exposure(&[t], &BTreeMap::new(), &cfg);
        assert_eq!(ledger.departure_total(|_| true).person_years, 5);
    }

    #[test]
    fn gender_groups() {
        let ts = vec![
            series("f", 2000, &["DE", "US"]),
            series("m", 2000, &["DE", "DE"]),
            series("u", 2000, &["DE", "DE"]),
        ];
        let genders = BTreeMap::from([("f".to_string(), Gender::Female), ("m".to_string(), Gender::Male)]);
        let ledger = accumulate_exposure(&ts, &genders, &one_cohort());
        assert_eq!(ledger.departure_total(|k| k.gender == GenderGroup::All).person_years, 3);
        assert_eq!(ledger.departure_total(|k| k.gender == GenderGroup::Female), Cell { person_years: 1, events: 1 });
        assert_eq!(ledger.departure_total(|k| k.gender == GenderGroup::Male), Cell { person_years: 1, events: 0 });
    }

    #[test]
    fn non_german_origin_excluded() {
        let t = series("a", 2000, &["US", "DE", "US"]);
        assert_eq!(accumulate_exposure(&[t], &BTreeMap::new(), &one_cohort()), ExposureLedger::default());
    }

    #[test]
    fn rate_values() {
        assert_eq!(departure_rate(Cell { person_years: 1000, events: 8 }), Ok(8.0));
        assert_eq!(return_rate(Cell { person_years: 10, events: 0 }), Ok(0.0));
        assert_eq!(departure_rate(Cell::default()), Err(RateError::ZeroExposure));
    }

    #[test]
    fn return_shares() {
        let ts = vec![
            series("a", 2000, &["DE", "US", "DE"]),
            series("b", 2000, &["DE", "US", "US"]),
            series("c", 2000, &["DE", "FR", "DE"]),
        ];
        assert_eq!(country_return_share(&ts, cc("US")), Ok(0.5));
        assert_eq!(country_return_share(&ts, cc("FR")), Ok(1.0));
        assert!(country_return_share(&ts, cc("JP")).is_err());
    }

    #[test]
    fn pearson_cases() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let lin: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &lin).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
        // Sxy = 6, Sxx = 10, Syy = 6.
        let r = pearson(&xs, &[2.0, 4.0, 5.0, 4.0, 5.0]).unwrap();
        assert!((r - 6.0 / 60.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(pearson(&xs, &[1.0; 5]), Err(RateError::ZeroVariance));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }
}
