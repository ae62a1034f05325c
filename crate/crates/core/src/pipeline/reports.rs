//! Report tables: plain data plus CSV writers. Every function here is a
//! pure recomputation from module outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::country::CountryCode;
use crate::gender::Gender;
use crate::mobility::{academic_age, career_stage, classify, CareerStage, MobilityCategory, MobilityError, ResearcherTimeline};
use crate::rates::{
    accumulate_exposure, collaborative_ratio, country_flows, pearson, rate_per_1000, Cell, Cohort, ExposureConfig,
    ExposureLedger, GenderGroup, PublicationIndex,
};
use crate::records::RecordStore;

/// Label for researchers without a discipline row.
pub const UNASSIGNED: &str = "Unassigned";

const NA: &str = "NA";

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| NA.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryRow {
    pub author_id: String,
    pub first_pub_year: i32,
    pub last_pub_year: i32,
    pub origin_country: CountryCode,
    pub current_country: CountryCode,
    /// `None` when the researcher never has Germany as effective country.
    pub category: Option<MobilityCategory>,
    pub academic_age: u32,
    pub career_stage: CareerStage,
}

/// Category and age at `evaluation_year` for every researcher already
/// publishing by then.
pub fn categorize(timelines: &[ResearcherTimeline], evaluation_year: i32) -> Vec<CategoryRow> {
    timelines
        .iter()
        .filter(|t| t.first_pub_year <= evaluation_year)
        .map(|t| {
            let category = match classify(t, evaluation_year) {
                Ok(c) => Some(c),
                Err(MobilityError::NotInStudyPopulation(_)) => None,
                Err(e) => unreachable!("evaluation year is observed: {e}"),
            };
            let age = academic_age(t, evaluation_year).expect("evaluation year is observed");
            CategoryRow {
                author_id: t.author_id.clone(),
                first_pub_year: t.first_pub_year,
                last_pub_year: t.last_pub_year,
                origin_country: t.origin_country,
                current_country: t.effective_country(evaluation_year).expect("evaluation year is observed"),
                category,
                academic_age: age,
                career_stage: career_stage(age as i64).expect("ages are non-negative"),
            }
        })
        .collect()
}

fn category_label(c: Option<MobilityCategory>) -> &'static str {
    c.map(|c| c.as_str()).unwrap_or("excluded")
}

pub fn write_categories<W: Write>(rows: &[CategoryRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "revised_author_id",
        "first_pub_year",
        "last_pub_year",
        "origin_country",
        "current_country",
        "category",
        "academic_age",
        "career_stage",
    ])?;
    for r in rows {
        w.write_record([
            r.author_id.as_str(),
            &r.first_pub_year.to_string(),
            &r.last_pub_year.to_string(),
            r.origin_country.as_str(),
            r.current_country.as_str(),
            category_label(r.category),
            &r.academic_age.to_string(),
            r.career_stage.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn gender_of(genders: &BTreeMap<String, Gender>, author: &str) -> Gender {
    genders.get(author).copied().unwrap_or(Gender::Unknown)
}

/// Researchers per (category, gender, academic age); excluded researchers
/// are left out.
pub fn pyramid(rows: &[CategoryRow], genders: &BTreeMap<String, Gender>) -> BTreeMap<(MobilityCategory, Gender, u32), usize> {
    let mut out = BTreeMap::new();
    for r in rows {
        if let Some(c) = r.category {
            *out.entry((c, gender_of(genders, &r.author_id), r.academic_age)).or_default() += 1;
        }
    }
    out
}

pub fn write_pyramid<W: Write>(cells: &BTreeMap<(MobilityCategory, Gender, u32), usize>, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["category", "gender", "academic_age", "researchers"])?;
    for ((c, g, age), n) in cells {
        w.write_record([c.as_str(), g.as_str(), &age.to_string(), &n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub cohort: String,
    pub gender: GenderGroup,
    /// `None` on return rows aggregated over every departure age.
    pub age_at_departure: Option<u32>,
    /// `None` on departure rows.
    pub years_since_departure: Option<u32>,
    pub cell: Cell,
}

impl RateRow {
    pub fn rate_per_1000(&self) -> Option<f64> {
        rate_per_1000(self.cell).ok()
    }
}

pub fn departure_rows(ledger: &ExposureLedger) -> Vec<RateRow> {
    ledger
        .departures
        .iter()
        .map(|(k, c)| RateRow {
            cohort: k.cohort.clone(),
            gender: k.gender,
            age_at_departure: Some(k.age_at_departure),
            years_since_departure: None,
            cell: *c,
        })
        .collect()
}

/// Per-stratum return cells followed by cells summed over departure ages.
pub fn return_rows(ledger: &ExposureLedger) -> Vec<RateRow> {
    let mut rows: Vec<RateRow> = ledger
        .returns
        .iter()
        .map(|(k, c)| RateRow {
            cohort: k.cohort.clone(),
            gender: k.gender,
            age_at_departure: Some(k.age_at_departure),
            years_since_departure: Some(k.years_since_departure),
            cell: *c,
        })
        .collect();
    let mut pooled: BTreeMap<(String, GenderGroup, u32), Cell> = BTreeMap::new();
    for (k, c) in &ledger.returns {
        pooled
            .entry((k.cohort.clone(), k.gender, k.years_since_departure))
            .or_default()
            .add(*c);
    }
    rows.extend(pooled.into_iter().map(|((cohort, gender, since), cell)| RateRow {
        cohort,
        gender,
        age_at_departure: None,
        years_since_departure: Some(since),
        cell,
    }));
    rows
}

pub const RATE_COLUMNS: [&str; 7] = [
    "cohort",
    "gender",
    "age_at_departure",
    "years_since_departure",
    "person_years",
    "events",
    "rate_per_1000",
];

pub fn write_rate_rows<W: Write>(rows: &[RateRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.cohort.as_str(),
            r.gender.as_str(),
            &r.age_at_departure.map(|a| a.to_string()).unwrap_or_else(|| "all".into()),
            &r.years_since_departure.map(|s| s.to_string()).unwrap_or_default(),
            &r.cell.person_years.to_string(),
            &r.cell.events.to_string(),
            &opt_f64(r.rate_per_1000()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_country_flows<W: Write>(timelines: &[ResearcherTimeline], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["country", "outward", "returned", "return_share"])?;
    for (country, (outward, returned)) in country_flows(timelines) {
        let share = (outward > 0).then(|| returned as f64 / outward as f64);
        w.write_record([
            country.as_str(),
            &outward.to_string(),
            &returned.to_string(),
            &opt_f64(share),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn discipline_of<'a>(disciplines: &'a BTreeMap<String, String>, author: &str) -> &'a str {
    disciplines.get(author).map(String::as_str).unwrap_or(UNASSIGNED)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    /// `all` or a cohort label.
    pub scope: String,
    pub discipline: String,
    /// Researchers with a defined collaborative ratio.
    pub researchers: usize,
    pub mean_collaborative_ratio: Option<f64>,
    pub returns: Cell,
}

impl ScatterRow {
    pub fn return_rate(&self) -> Option<f64> {
        rate_per_1000(self.returns).ok()
    }
}

/// Return rate against mean collaborative ratio per discipline, overall
/// and per cohort.
pub fn collab_scatter(
    timelines: &[ResearcherTimeline],
    store: &RecordStore,
    genders: &BTreeMap<String, Gender>,
    disciplines: &BTreeMap<String, String>,
    cfg: &ExposureConfig,
) -> Vec<ScatterRow> {
    let index = PublicationIndex::build(store);
    let labels: BTreeSet<&str> = timelines.iter().map(|t| discipline_of(disciplines, &t.author_id)).collect();
    let mut scopes: Vec<(String, Vec<Cohort>)> = vec![("all".into(), cfg.cohorts.clone())];
    scopes.extend(cfg.cohorts.iter().map(|c| (c.label.clone(), vec![c.clone()])));

    let mut rows = Vec::new();
    for (scope, cohorts) in scopes {
        let scoped = ExposureConfig {
            cohorts: cohorts.clone(),
            ..cfg.clone()
        };
        for &label in &labels {
            let members: Vec<ResearcherTimeline> = timelines
                .iter()
                .filter(|t| discipline_of(disciplines, &t.author_id) == label)
                .filter(|t| t.is_german_origin() && cohorts.iter().any(|c| c.contains(t.first_pub_year)))
                .cloned()
                .collect();
            let ratios: Vec<f64> = members
                .iter()
                .filter_map(|t| collaborative_ratio(t, store, &index).ok())
                .map(|r| r.ratio)
                .collect();
            let ledger = accumulate_exposure(&members, genders, &scoped);
            let returns = ledger.return_total(|k| k.gender == GenderGroup::All);
            if members.is_empty() {
                continue;
            }
            rows.push(ScatterRow {
                scope: scope.clone(),
                discipline: label.to_string(),
                researchers: ratios.len(),
                mean_collaborative_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
                returns,
            });
        }
    }
    rows
}

pub fn write_collab_scatter<W: Write>(rows: &[ScatterRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scope",
        "discipline",
        "researchers",
        "mean_collaborative_ratio",
        "return_person_years",
        "return_events",
        "return_rate_per_1000",
    ])?;
    for r in rows {
        w.write_record([
            r.scope.as_str(),
            r.discipline.as_str(),
            &r.researchers.to_string(),
            &opt_f64(r.mean_collaborative_ratio),
            &r.returns.person_years.to_string(),
            &r.returns.events.to_string(),
            &opt_f64(r.return_rate()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub scope: String,
    pub pearson_r: Option<f64>,
    /// Disciplines with both a return rate and a collaborative ratio.
    pub n: usize,
}

/// Pearson r between return rate and mean collaborative ratio per scope.
pub fn correlations(rows: &[ScatterRow]) -> Vec<CorrelationRow> {
    let mut scopes: Vec<&str> = Vec::new();
    for r in rows {
        if !scopes.contains(&r.scope.as_str()) {
            scopes.push(&r.scope);
        }
    }
    scopes
        .into_iter()
        .map(|scope| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.scope == scope)
                .filter_map(|r| Some((r.mean_collaborative_ratio?, r.return_rate()?)))
                .unzip();
            CorrelationRow {
                scope: scope.to_string(),
                pearson_r: pearson(&xs, &ys).ok(),
                n: xs.len(),
            }
        })
        .collect()
}

pub fn write_correlations<W: Write>(rows: &[CorrelationRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scope", "pearson_r", "n"])?;
    for r in rows {
        w.write_record([r.scope.as_str(), &opt_f64(r.pearson_r), &r.n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// (female, male, unknown) counts per (discipline, cohort, category).
pub type FemaleShare = BTreeMap<(String, String, MobilityCategory), [usize; 3]>;

pub fn female_share(
    rows: &[CategoryRow],
    genders: &BTreeMap<String, Gender>,
    disciplines: &BTreeMap<String, String>,
    cohorts: &[Cohort],
) -> FemaleShare {
    let mut out = FemaleShare::new();
    for r in rows {
        let Some(category) = r.category else { continue };
        let Some(cohort) = cohorts.iter().find(|c| c.contains(r.first_pub_year)) else {
            continue;
        };
        let key = (
            discipline_of(disciplines, &r.author_id).to_string(),
            cohort.label.clone(),
            category,
        );
        let slot = match gender_of(genders, &r.author_id) {
            Gender::Female => 0,
            Gender::Male => 1,
            Gender::Unknown => 2,
        };
        out.entry(key).or_insert([0; 3])[slot] += 1;
    }
    out
}

pub fn write_female_share<W: Write>(share: &FemaleShare, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["discipline", "cohort", "category", "female", "male", "unknown", "female_share"])?;
    for ((discipline, cohort, category), [f, m, u]) in share {
        let known = f + m;
        let share = (known > 0).then(|| *f as f64 / known as f64);
        w.write_record([
            discipline.as_str(),
            cohort.as_str(),
            category.as_str(),
            &f.to_string(),
            &m.to_string(),
            &u.to_string(),
            &opt_f64(share),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Groups used in [`PopulationSummary`] besides the four categories.
pub const EXCLUDED: &str = "excluded";
pub const UNRESOLVED: &str = "unresolved";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub researchers: usize,
    pub publications: usize,
    pub researchers_by_gender: BTreeMap<String, usize>,
    pub publications_by_gender: BTreeMap<String, usize>,
    pub researchers_by_category: BTreeMap<String, usize>,
    pub publications_by_category: BTreeMap<String, usize>,
    /// Min, max and median researchers per discipline.
    pub researchers_per_discipline: Option<(usize, usize, f64)>,
    /// Median academic age per `category/gender`.
    pub median_academic_age: BTreeMap<String, f64>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Headline counts at `evaluation_year`. Researchers without any resolved
/// country, or who start publishing after the evaluation year, count as
/// `unresolved`.
pub fn summarize_population(
    store: &RecordStore,
    timelines: &[ResearcherTimeline],
    genders: &BTreeMap<String, Gender>,
    disciplines: &BTreeMap<String, String>,
    evaluation_year: i32,
) -> PopulationSummary {
    let rows = categorize(timelines, evaluation_year);
    let group_of: BTreeMap<&str, &str> = rows
        .iter()
        .map(|r| (r.author_id.as_str(), category_label(r.category)))
        .collect();

    let mut s = PopulationSummary::default();
    for g in [Gender::Female, Gender::Male, Gender::Unknown] {
        s.researchers_by_gender.insert(g.as_str().into(), 0);
        s.publications_by_gender.insert(g.as_str().into(), 0);
    }
    let groups = MobilityCategory::ALL
        .iter()
        .map(|c| c.as_str())
        .chain([EXCLUDED, UNRESOLVED]);
    for c in groups {
        s.researchers_by_category.insert(c.into(), 0);
        s.publications_by_category.insert(c.into(), 0);
    }

    let mut by_gender: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut by_category: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut all: BTreeSet<&str> = BTreeSet::new();
    for author in store.author_ids() {
        let g = gender_of(genders, author).as_str();
        let c = group_of.get(author).copied().unwrap_or(UNRESOLVED);
        s.researchers += 1;
        *s.researchers_by_gender.get_mut(g).unwrap() += 1;
        *s.researchers_by_category.get_mut(c).unwrap() += 1;
        for r in store.author_records(author) {
            all.insert(&r.publication_id);
            by_gender.entry(g).or_default().insert(&r.publication_id);
            by_category.entry(c).or_default().insert(&r.publication_id);
        }
    }
    s.publications = all.len();
    for (g, pubs) in by_gender {
        s.publications_by_gender.insert(g.into(), pubs.len());
    }
    for (c, pubs) in by_category {
        s.publications_by_category.insert(c.into(), pubs.len());
    }

    let mut per_discipline: BTreeMap<&str, usize> = BTreeMap::new();
    for author in store.author_ids() {
        *per_discipline.entry(discipline_of(disciplines, author)).or_default() += 1;
    }
    let mut counts: Vec<f64> = per_discipline.values().map(|&n| n as f64).collect();
    if let Some(m) = median(&mut counts) {
        let min = per_discipline.values().copied().min().unwrap();
        let max = per_discipline.values().copied().max().unwrap();
        s.researchers_per_discipline = Some((min, max, m));
    }

    let mut ages: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &rows {
        let Some(c) = r.category else { continue };
        let g = gender_of(genders, &r.author_id);
        ages.entry(format!("{}/{}", c.as_str(), g.as_str()))
            .or_default()
            .push(r.academic_age as f64);
    }
    for (key, mut values) in ages {
        s.median_academic_age.insert(key, median(&mut values).expect("non-empty group"));
    }
    s
}

pub fn write_summary<W: Write>(s: &PopulationSummary, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "group", "value"])?;
    w.write_record(["researchers", "all", &s.researchers.to_string()])?;
    w.write_record(["publications", "all", &s.publications.to_string()])?;
    for (g, n) in &s.researchers_by_gender {
        w.write_record(["researchers", &format!("gender/{g}"), &n.to_string()])?;
    }
    for (g, n) in &s.publications_by_gender {
        w.write_record(["publications", &format!("gender/{g}"), &n.to_string()])?;
    }
    for (c, n) in &s.researchers_by_category {
        w.write_record(["researchers", &format!("category/{c}"), &n.to_string()])?;
    }
    for (c, n) in &s.publications_by_category {
        w.write_record(["publications", &format!("category/{c}"), &n.to_string()])?;
    }
    let (min, max, med) = match s.researchers_per_discipline {
        Some((a, b, m)) => (a.to_string(), b.to_string(), m.to_string()),
        None => (NA.into(), NA.into(), NA.into()),
    };
    w.write_record(["researchers_per_discipline", "min", &min])?;
    w.write_record(["researchers_per_discipline", "max", &max])?;
    w.write_record(["researchers_per_discipline", "median", &med])?;
    for (k, m) in &s.median_academic_age {
        w.write_record(["median_academic_age", k.as_str(), &m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::build_timelines;
    use crate::records::{Affiliation, AuthorshipRecord};

    fn record(id: usize, author: &str, publication: &str, year: i32, country: &str) -> AuthorshipRecord {
        AuthorshipRecord {
            record_id: format!("R{id}"),
            author_id: author.into(),
            publication_id: publication.into(),
            year,
            author_full_name: "Anna Weber".into(),
            coauthor_names: vec![],
            affiliation: Affiliation::new("Uni", "City", "Street 1", Some(CountryCode::normalize(country).unwrap())),
            journal_title: "J".into(),
            publication_title: "T".into(),
            keywords: vec![],
            subject_tags: vec![],
            funding_texts: vec![],
            grant_numbers: vec![],
        }
    }

    #[test]
    fn empty_store_summary_is_zero() {
        let store = RecordStore::new(vec![]).unwrap();
        let s = summarize_population(&store, &[], &BTreeMap::new(), &BTreeMap::new(), 2020);
        assert_eq!(s.researchers, 0);
        assert_eq!(s.publications, 0);
        assert!(s.researchers_by_category.values().all(|&n| n == 0));
        assert!(s.researchers_per_discipline.is_none());
        assert!(s.median_academic_age.is_empty());
    }

    #[test]
    fn summary_matches_hand_tally() {
        let mut records = Vec::new();
        let mut id = 0;
        let mut push = |author: &str, publication: &str, year: i32, country: &str| {
            id += 1;
            records.push(record(id, author, publication, year, country));
        };
        // A1 non-mover, A2 outward, A3 returnee, A4 immigrant, A5 never in DE.
        push("A1", "P1", 2000, "DE");
        push("A1", "P2", 2005, "DE");
        push("A2", "P2", 2000, "DE");
        push("A2", "P3", 2003, "US");
        push("A3", "P4", 2001, "DE");
        push("A3", "P5", 2002, "FR");
        push("A3", "P6", 2004, "DE");
        push("A4", "P7", 2002, "US");
        push("A4", "P8", 2006, "DE");
        push("A5", "P9", 2002, "JP");
        let store = RecordStore::new(records).unwrap();
        let timelines = build_timelines(&store);
        let genders = BTreeMap::from([
            ("A1".to_string(), Gender::Female),
            ("A2".to_string(), Gender::Male),
            ("A3".to_string(), Gender::Female),
        ]);
        let disciplines = BTreeMap::from([
            ("A1".to_string(), "Medicine".to_string()),
            ("A2".to_string(), "Medicine".to_string()),
            ("A3".to_string(), "Mathematics".to_string()),
        ]);
        let s = summarize_population(&store, &timelines, &genders, &disciplines, 2010);
        assert_eq!(s.researchers, 5);
        assert_eq!(s.publications, 9);
        assert_eq!(s.researchers_by_gender["female"], 2);
        assert_eq!(s.researchers_by_gender["unknown"], 2);
        // P2 is shared by A1 and A2.
        assert_eq!(s.publications_by_gender["female"], 5);
        assert_eq!(s.publications_by_gender["male"], 2);
        for (c, n) in [("non_mover", 1), ("outward", 1), ("returnee", 1), ("immigrant_or_transient", 1), ("excluded", 1)] {
            assert_eq!(s.researchers_by_category[c], n, "{c}");
        }
        // Medicine 2, Mathematics 1, Unassigned 2.
        assert_eq!(s.researchers_per_discipline, Some((1, 2, 2.0)));
        assert_eq!(s.median_academic_age["non_mover/female"], 10.0);
        assert_eq!(s.median_academic_age["returnee/female"], 9.0);

        let p = pyramid(&categorize(&timelines, 2010), &genders);
        assert_eq!(p.values().sum::<usize>(), 4);
        assert_eq!(p[&(MobilityCategory::Outward, Gender::Male, 10)], 1);
    }

    #[test]
    fn return_rows_pool_over_ages() {
        let mut ledger = ExposureLedger::default();
        for (age, py, ev) in [(1, 10, 2), (3, 5, 1)] {
            ledger.returns.insert(
                crate::rates::ReturnKey {
                    cohort: "c".into(),
                    gender: GenderGroup::All,
                    age_at_departure: age,
                    years_since_departure: 1,
                },
                Cell { person_years: py, events: ev },
            );
        }
        let rows = return_rows(&ledger);
        let pooled = rows.iter().find(|r| r.age_at_departure.is_none()).unwrap();
        assert_eq!(pooled.cell, Cell { person_years: 15, events: 3 });
        assert_eq!(pooled.rate_per_1000(), Some(200.0));
    }
}
