//! Brute-force references computed straight from the planted truth.

use std::collections::{BTreeMap, BTreeSet};

use crate::country::{CountryCode, GERMANY};
use crate::gender::Gender;
use crate::mobility::ResearcherTimeline;
use crate::rates::{Cell, Censoring, DepartureKey, ExposureConfig, ExposureLedger, GenderGroup, ReturnKey};
use crate::records::OBSERVATION_WINDOW;

use super::{GroundTruth, IdentityTruth, TrueEvent};

fn groups(gender: Gender) -> Vec<GenderGroup> {
    let mut g = vec![GenderGroup::All];
    match gender {
        Gender::Female => g.push(GenderGroup::Female),
        Gender::Male => g.push(GenderGroup::Male),
        Gender::Unknown => {}
    }
    g
}

/// True country for every year from the first career year to `end`,
/// repeating the last known country past the end of the career.
fn yearly_countries(identity: &IdentityTruth, end: i32) -> Vec<CountryCode> {
    let mut out = Vec::new();
    let mut last = identity.countries[0].1;
    for year in identity.first_year()..=end {
        if let Some(c) = identity.country_in(year) {
            last = c;
        }
        out.push(last);
    }
    out
}

/// Exposure ledger by walking every researcher year by year over the true
/// countries. Genders come from the truth; ghosts are skipped.
pub fn oracle_rates(truth: &GroundTruth, cfg: &ExposureConfig) -> ExposureLedger {
    oracle_rates_with(truth, cfg, |t| t.gender)
}

/// Same as [`oracle_rates`] with caller-chosen genders.
pub fn oracle_rates_with<F: Fn(&IdentityTruth) -> Gender>(
    truth: &GroundTruth,
    cfg: &ExposureConfig,
    gender_of: F,
) -> ExposureLedger {
    let mut ledger = ExposureLedger::default();
    for identity in truth.identities.values().filter(|t| !t.ghost) {
        let first = identity.first_year();
        if identity.countries[0].1 != GERMANY {
            continue;
        }
        let Some(cohort) = cfg.cohorts.iter().find(|c| c.start <= first && first <= c.end) else {
            continue;
        };
        let end = match cfg.censoring {
            Censoring::LastPublication => identity.last_year(),
            Censoring::WindowEnd => *OBSERVATION_WINDOW.end(),
        };
        let years = yearly_countries(identity, end);
        let gs = groups(gender_of(identity));

        let mut departure: Option<usize> = None;
        for i in 1..years.len() {
            if years[i - 1] != GERMANY {
                continue;
            }
            let left = years[i] != GERMANY;
            if left && departure.is_none() {
                departure = Some(i);
            }
            if !cfg.period.contains(&(first + i as i32)) {
                continue;
            }
            for &g in &gs {
                let key = DepartureKey {
                    cohort: cohort.label.clone(),
                    gender: g,
                    age_at_departure: i as u32,
                };
                let cell = ledger.departures.entry(key).or_insert(Cell::default());
                cell.person_years += 1;
                if left {
                    cell.events += 1;
                }
            }
        }

        let Some(d) = departure else { continue };
        let mut i = d + 1;
        while i < years.len() && (i - d) as u32 <= cfg.max_years_since {
            let back = years[i] == GERMANY;
            if cfg.period.contains(&(first + i as i32)) {
                for &g in &gs {
                    let key = ReturnKey {
                        cohort: cohort.label.clone(),
                        gender: g,
                        age_at_departure: d as u32,
                        years_since_departure: (i - d) as u32,
                    };
                    let cell = ledger.returns.entry(key).or_insert(Cell::default());
                    cell.person_years += 1;
                    if back {
                        cell.events += 1;
                    }
                }
            }
            if back {
                break;
            }
            i += 1;
        }
    }
    ledger
}

/// Change points of a yearly country list.
pub fn naive_events(countries: &[(i32, CountryCode)]) -> Vec<TrueEvent> {
    let mut events = Vec::new();
    for i in 1..countries.len() {
        let (year, now) = countries[i];
        let before = countries[i - 1].1;
        if now != before {
            events.push(TrueEvent {
                year,
                from: before,
                to: now,
            });
        }
    }
    events
}

/// Timelines built directly from the true yearly countries of every
/// non-ghost identity, keyed by its author id.
pub fn truth_timelines(truth: &GroundTruth) -> Vec<ResearcherTimeline> {
    let mut out: Vec<ResearcherTimeline> = truth
        .identities
        .values()
        .filter(|t| !t.ghost)
        .filter_map(|t| {
            let modes: BTreeMap<i32, BTreeSet<CountryCode>> =
                t.countries.iter().map(|&(y, c)| (y, BTreeSet::from([c]))).collect();
            ResearcherTimeline::from_modes(&t.author_id, modes)
        })
        .collect();
    out.sort_by(|a, b| a.author_id.cmp(&b.author_id));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{accumulate_exposure, Cohort};
    use crate::synth::{generate, GeneratorConfig};

    fn identity(countries: &[(i32, &str)], gender: Gender) -> IdentityTruth {
        IdentityTruth {
            identity_id: "A00001".into(),
            author_id: "A00001".into(),
            ghost: false,
            gender,
            topic: 0,
            full_name: "Anna Weber".into(),
            countries: countries
                .iter()
                .map(|&(y, c)| (y, CountryCode::normalize(c).unwrap()))
                .collect(),
            events: Vec::new(),
        }
    }

    fn single(t: IdentityTruth) -> GroundTruth {
        GroundTruth {
            identities: BTreeMap::from([(t.identity_id.clone(), t)]),
            records: BTreeMap::new(),
        }
    }

    fn cfg() -> ExposureConfig {
        ExposureConfig {
            cohorts: vec![Cohort::new(1996, 2010)],
            ..ExposureConfig::default()
        }
    }

    #[test]
    fn single_mover_hand_trace() {
        // DE 2000-2002, US 2003-2004, DE 2005.
        let t = identity(
            &[(2000, "DE"), (2001, "DE"), (2002, "DE"), (2003, "US"), (2004, "US"), (2005, "DE")],
            Gender::Female,
        );
        let ledger = oracle_rates(&single(t), &cfg());
        let all = |k: &DepartureKey| k.gender == GenderGroup::All;
        // Years 2000, 2001, 2002 at risk of leaving; 2005 is the last year.
        assert_eq!(ledger.departure_total(all), Cell { person_years: 3, events: 1 });
        // Abroad 2003 and 2004, return observed in 2005.
        let ret = ledger.return_total(|k| k.gender == GenderGroup::All);
        assert_eq!(ret, Cell { person_years: 2, events: 1 });
        let female = ledger.departure_total(|k| k.gender == GenderGroup::Female);
        assert_eq!(female, Cell { person_years: 3, events: 1 });
        assert_eq!(ledger.departure_total(|k| k.gender == GenderGroup::Male), Cell::default());
    }

    #[test]
    fn zero_hazards_count_all_transitions() {
        let g = GeneratorConfig {
            researcher_count: 50,
            departure_hazard: 0.0,
            immigrant_share: 0.0,
            merge_rate: 0.0,
            ..GeneratorConfig::default()
        };
        let (_, truth) = generate(&g).unwrap();
        let ledger = oracle_rates(&truth, &cfg());
        let total = ledger.departure_total(|k| k.gender == GenderGroup::All);
        let expected: usize = truth.identities.values().map(|t| t.countries.len() - 1).sum();
        assert_eq!(total, Cell { person_years: expected as u64, events: 0 });
        assert!(ledger.returns.is_empty());
    }

    #[test]
    fn planted_events_replay() {
        let (_, truth) = generate(&GeneratorConfig {
            researcher_count: 200,
            departure_hazard: 0.1,
            ..GeneratorConfig::default()
        })
        .unwrap();
        for t in truth.identities.values() {
            assert_eq!(naive_events(&t.countries), t.events, "{}", t.identity_id);
        }
    }

    #[test]
    fn matches_ledger_on_truth_timelines() {
        let (_, truth) = generate(&GeneratorConfig {
            researcher_count: 300,
            departure_hazard: 0.05,
            return_hazard: vec![0.3],
            ..GeneratorConfig::default()
        })
        .unwrap();
        let timelines = truth_timelines(&truth);
        for censoring in [Censoring::LastPublication, Censoring::WindowEnd] {
            let c = ExposureConfig { censoring, ..cfg() };
            let ledger = accumulate_exposure(&timelines, &truth.author_genders(), &c);
            assert_eq!(ledger, oracle_rates(&truth, &c));
        }
    }
}
