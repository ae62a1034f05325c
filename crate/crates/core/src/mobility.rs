//! Yearly mode countries, migration events and mobility categories.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::country::{CountryCode, GERMANY};
use crate::records::{AuthorshipRecord, RecordStore};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MobilityError {
    #[error("year {year} precedes the first publication year {first}")]
    BeforeFirstPublication { year: i32, first: i32 },
    #[error("researcher `{0}` is never affiliated with Germany")]
    NotInStudyPopulation(String),
    #[error("negative academic age {0}")]
    NegativeAge(i64),
}

/// Countries attaining the maximum record count, or `None` when no record
/// has a resolved country.
pub fn mode_country<'a, I>(records: I) -> Option<BTreeSet<CountryCode>>
where
    I: IntoIterator<Item = &'a AuthorshipRecord>,
{
    let mut counts: BTreeMap<CountryCode, usize> = BTreeMap::new();
    for r in records {
        if let Some(c) = r.country() {
            *counts.entry(c).or_default() += 1;
        }
    }
    let max = counts.values().copied().max()?;
    Some(counts.into_iter().filter(|&(_, n)| n == max).map(|(c, _)| c).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearcherTimeline {
    pub author_id: String,
    pub first_pub_year: i32,
    pub last_pub_year: i32,
    /// Mode sets for the years with at least one resolved country.
    pub yearly_mode: BTreeMap<i32, BTreeSet<CountryCode>>,
    pub origin_country: CountryCode,
    pub current_country: CountryCode,
    effective: Vec<CountryCode>,
}

impl ResearcherTimeline {
    /// `None` when no record carries a resolved country.
    pub fn build<'a, I>(author_id: &str, records: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a AuthorshipRecord>,
    {
        let mut by_year: BTreeMap<i32, Vec<&AuthorshipRecord>> = BTreeMap::new();
        for r in records {
            by_year.entry(r.year).or_default().push(r);
        }
        let yearly_mode: BTreeMap<i32, BTreeSet<CountryCode>> = by_year
            .into_iter()
            .filter_map(|(year, rs)| mode_country(rs).map(|m| (year, m)))
            .collect();
        Self::from_modes(author_id, yearly_mode)
    }

    pub fn from_modes(author_id: &str, yearly_mode: BTreeMap<i32, BTreeSet<CountryCode>>) -> Option<Self> {
        let first = *yearly_mode.keys().next()?;
        let last = *yearly_mode.keys().next_back()?;
        let mut effective = Vec::with_capacity((last - first + 1) as usize);
        let mut previous: Option<CountryCode> = None;
        for year in first..=last {
            let country = match yearly_mode.get(&year) {
                Some(set) if set.len() == 1 => *set.first().unwrap(),
                Some(set) => match previous {
                    Some(p) if set.contains(&p) => p,
                    _ => *set.first().expect("mode sets are non-empty"),
                },
                None => previous.expect("the first year always has a mode"),
            };
            effective.push(country);
            previous = Some(country);
        }
        Some(Self {
            author_id: author_id.to_string(),
            first_pub_year: first,
            last_pub_year: last,
            origin_country: effective[0],
            current_country: *effective.last().unwrap(),
            yearly_mode,
            effective,
        })
    }

    /// Resolved country for `year`; years after the last publication carry
    /// the last effective country forward.
    pub fn effective_country(&self, year: i32) -> Result<CountryCode, MobilityError> {
        if year < self.first_pub_year {
            return Err(MobilityError::BeforeFirstPublication {
                year,
                first: self.first_pub_year,
            });
        }
        let i = ((year - self.first_pub_year) as usize).min(self.effective.len() - 1);
        Ok(self.effective[i])
    }

    /// `(year, country)` for every year from first to last publication.
    pub fn effective_series(&self) -> impl Iterator<Item = (i32, CountryCode)> + '_ {
        self.effective
            .iter()
            .enumerate()
            .map(|(i, &c)| (self.first_pub_year + i as i32, c))
    }

    pub fn is_german_origin(&self) -> bool {
        self.origin_country == GERMANY
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MigrationEvent {
    pub author_id: String,
    pub year: i32,
    pub from_country: CountryCode,
    pub to_country: CountryCode,
}

/// One event per change of the effective country, dated at the first year
/// of the new country.
pub fn detect_events(timeline: &ResearcherTimeline) -> Vec<MigrationEvent> {
    timeline
        .effective_series()
        .collect::<Vec<_>>()
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| MigrationEvent {
            author_id: timeline.author_id.clone(),
            year: w[1].0,
            from_country: w[0].1,
            to_country: w[1].1,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityCategory {
    NonMover,
    ImmigrantOrTransient,
    Outward,
    Returnee,
}

impl MobilityCategory {
    pub const ALL: [MobilityCategory; 4] = [
        MobilityCategory::NonMover,
        MobilityCategory::ImmigrantOrTransient,
        MobilityCategory::Outward,
        MobilityCategory::Returnee,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MobilityCategory::NonMover => "non_mover",
            MobilityCategory::ImmigrantOrTransient => "immigrant_or_transient",
            MobilityCategory::Outward => "outward",
            MobilityCategory::Returnee => "returnee",
        }
    }
}

impl fmt::Display for MobilityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Category from the effective series up to `evaluation_year`.
pub fn classify(timeline: &ResearcherTimeline, evaluation_year: i32) -> Result<MobilityCategory, MobilityError> {
    timeline.effective_country(evaluation_year)?;
    let series: Vec<CountryCode> = (timeline.first_pub_year..=evaluation_year)
        .map(|y| timeline.effective_country(y).expect("year is in range"))
        .collect();
    if !series.contains(&GERMANY) {
        return Err(MobilityError::NotInStudyPopulation(timeline.author_id.clone()));
    }
    let origin = series[0];
    let current = *series.last().unwrap();
    Ok(if series.iter().all(|&c| c == GERMANY) {
        MobilityCategory::NonMover
    } else if origin != GERMANY {
        MobilityCategory::ImmigrantOrTransient
    } else if current != GERMANY {
        MobilityCategory::Outward
    } else {
        MobilityCategory::Returnee
    })
}

pub fn academic_age(timeline: &ResearcherTimeline, year: i32) -> Result<u32, MobilityError> {
    if year < timeline.first_pub_year {
        return Err(MobilityError::BeforeFirstPublication {
            year,
            first: timeline.first_pub_year,
        });
    }
    Ok((year - timeline.first_pub_year) as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CareerStage {
    Early,
    Mid,
    Senior,
}

impl CareerStage {
    pub fn as_str(&self) -> &'static str {
        match self {
            CareerStage::Early => "early",
            CareerStage::Mid => "mid",
            CareerStage::Senior => "senior",
        }
    }
}

pub fn career_stage(age: i64) -> Result<CareerStage, MobilityError> {
    match age {
        a if a < 0 => Err(MobilityError::NegativeAge(a)),
        0..=7 => Ok(CareerStage::Early),
        14.. => Ok(CareerStage::Senior),
        _ => Ok(CareerStage::Mid),
    }
}

/// Timelines for every author with at least one resolved country, sorted by id.
pub fn build_timelines(store: &RecordStore) -> Vec<ResearcherTimeline> {
    let authors: Vec<&str> = store.author_ids().collect();
    authors
        .par_iter()
        .filter_map(|a| ResearcherTimeline::build(a, store.author_records(a)))
        .collect()
}

pub fn write_events<W: Write>(events: &[MigrationEvent], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["revised_author_id", "year", "from_country", "to_country"])?;
    for e in events {
        w.write_record([
            e.author_id.as_str(),
            &e.year.to_string(),
            e.from_country.as_str(),
            e.to_country.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the output of [`write_events`].
pub fn read_events<R: Read>(input: R) -> Result<Vec<MigrationEvent>, csv::Error> {
    let mut reader = csv::Reader::from_reader(input);
    let mut events = Vec::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        let bad = |what: &str| csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad {what} in events row {:?}", row.position().map(|p| p.line()))));
        events.push(MigrationEvent {
            author_id: field(0).to_string(),
            year: field(1).parse().map_err(|_| bad("year"))?,
            from_country: CountryCode::normalize(field(2)).map_err(|_| bad("from_country"))?,
            to_country: CountryCode::normalize(field(3)).map_err(|_| bad("to_country"))?,
        });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cc(s: &str) -> CountryCode {
        CountryCode::normalize(s).unwrap()
    }

    fn set(codes: &[&str]) -> BTreeSet<CountryCode> {
        codes.iter().map(|c| cc(c)).collect()
    }

    fn timeline(modes: &[(i32, &[&str])]) -> ResearcherTimeline {
        let modes = modes.iter().map(|(y, cs)| (*y, set(cs))).collect();
        ResearcherTimeline::from_modes("r", modes).unwrap()
    }

    fn series(start: i32, codes: &[&str]) -> ResearcherTimeline {
        let modes: Vec<(i32, &[&str])> = codes
            .iter()
            .enumerate()
            .map(|(i, c)| (start + i as i32, std::slice::from_ref(c)))
            .collect();
        timeline(&modes)
    }

    #[test]
    fn mode_sets() {
        use crate::records::Affiliation;
        let rec = |c: &str| AuthorshipRecord {
            record_id: String::new(),
            author_id: String::new(),
            publication_id: String::new(),
            year: 2000,
            author_full_name: String::new(),
            coauthor_names: vec![],
            affiliation: Affiliation::new("x", "", "", CountryCode::normalize(c).ok()),
            journal_title: String::new(),
            publication_title: String::new(),
            keywords: vec![],
            subject_tags: vec![],
            funding_texts: vec![],
            grant_numbers: vec![],
        };
        assert_eq!(mode_country(&[rec("DE"), rec("DE"), rec("US")]), Some(set(&["DE"])));
        assert_eq!(mode_country(&[rec("DE"), rec("US")]), Some(set(&["DE", "US"])));
        assert_eq!(mode_country(&[rec("")]), None);
    }

    #[test]
    fn effective_country_rules() {
        let t = timeline(&[(2000, &["DE"]), (2002, &["DE"])]);
        assert_eq!(t.effective_country(2001), Ok(GERMANY));
        assert!(t.effective_country(1999).is_err());
        assert_eq!(t.effective_country(2010), Ok(GERMANY));

        let t = timeline(&[(2000, &["DE"]), (2001, &["DE", "US"])]);
        assert_eq!(t.effective_country(2001), Ok(GERMANY));

        let t = timeline(&[(2000, &["DE"]), (2001, &["FR", "US"])]);
        assert_eq!(t.effective_country(2001), Ok(cc("FR")));

        // Gap years feed hysteresis with the carried country.
        let t = timeline(&[(2000, &["US"]), (2002, &["DE", "US"])]);
        assert_eq!(t.effective_country(2002), Ok(cc("US")));
    }

    #[test]
    fn events_at_change_points() {
        assert!(detect_events(&series(2000, &["DE", "DE", "DE"])).is_empty());
        let events = detect_events(&series(2001, &["DE", "DE", "US", "US", "DE"]));
        assert_eq!(events.len(), 2);
        assert_eq!((events[0].year, events[0].from_country, events[0].to_country), (2003, GERMANY, cc("US")));
        assert_eq!((events[1].year, events[1].from_country, events[1].to_country), (2005, cc("US"), GERMANY));
    }

    #[test]
    fn categories() {
        assert_eq!(classify(&series(2000, &["DE", "DE"]), 2001), Ok(MobilityCategory::NonMover));
        assert_eq!(classify(&series(2000, &["DE", "US", "US"]), 2002), Ok(MobilityCategory::Outward));
        let t = series(2000, &["DE", "US", "DE"]);
        assert_eq!(classify(&t, 2002), Ok(MobilityCategory::Returnee));
        assert_eq!(classify(&t, 2001), Ok(MobilityCategory::Outward));
        assert_eq!(classify(&t, 2000), Ok(MobilityCategory::NonMover));
        assert_eq!(classify(&series(2000, &["US", "DE"]), 2001), Ok(MobilityCategory::ImmigrantOrTransient));
        assert_eq!(classify(&series(2000, &["US", "DE", "FR"]), 2002), Ok(MobilityCategory::ImmigrantOrTransient));
        assert!(matches!(
            classify(&series(2000, &["US", "DE"]), 2000),
            Err(MobilityError::NotInStudyPopulation(_))
        ));
        assert!(classify(&series(2000, &["DE"]), 1999).is_err());
    }

    #[test]
    fn ages_and_stages() {
        let t = series(1998, &["DE"]);
        assert_eq!(academic_age(&t, 1998), Ok(0));
        assert_eq!(academic_age(&t, 1999), Ok(1));
        assert!(academic_age(&t, 1997).is_err());
        assert_eq!(academic_age(&series(2005, &["DE"]), 2020), Ok(15));
        assert_eq!(career_stage(7), Ok(CareerStage::Early));
        assert_eq!(career_stage(10), Ok(CareerStage::Mid));
        assert_eq!(career_stage(13), Ok(CareerStage::Mid));
        assert_eq!(career_stage(14), Ok(CareerStage::Senior));
        assert!(career_stage(-1).is_err());
    }

    #[test]
    fn events_csv() {
        let events = detect_events(&series(2001, &["DE", "US"]));
        let mut buf = Vec::new();
        write_events(&events, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "revised_author_id,year,from_country,to_country\nr,2002,DE,US\n"
        );
    }
}
