use std::collections::{BTreeMap, BTreeSet};

use scimobility::country::GERMANY;
use scimobility::imputer::{impute, labeled_rows, train, ImputationStatus, TrainConfig};
use scimobility::mobility::build_timelines;
use scimobility::rates::{collaborative_ratio, country_return_share, first_departure, PublicationIndex, RateError};
use scimobility::records::{missing_country_records, parse_records, write_csv, write_jsonl, InputFormat, RecordStore};
use scimobility::synth::{generate, GeneratorConfig};

fn population(count: usize, seed: u64) -> (RecordStore, scimobility::synth::GroundTruth) {
    generate(&GeneratorConfig {
        researcher_count: count,
        seed,
        ..GeneratorConfig::default()
    })
    .unwrap()
}

fn ten_thousand_records() -> RecordStore {
    let (store, _) = population(2500, 3);
    assert!(store.len() >= 10_000, "only {} records", store.len());
    RecordStore::new(store.into_records().into_iter().take(10_000).collect()).unwrap()
}

#[test]
fn jsonl_round_trip_10k() {
    let store = ten_thousand_records();
    let mut buf = Vec::new();
    write_jsonl(store.records(), &mut buf).unwrap();
    let parsed = parse_records(buf.as_slice(), InputFormat::Jsonl).unwrap();
    assert!(parsed.rejects.is_empty());
    assert_eq!(parsed.store, store);
    let mut again = Vec::new();
    write_jsonl(parsed.store.records(), &mut again).unwrap();
    assert_eq!(again, buf);
}

#[test]
fn csv_round_trip_10k() {
    let store = ten_thousand_records();
    let mut buf = Vec::new();
    write_csv(store.records(), &mut buf).unwrap();
    let parsed = parse_records(buf.as_slice(), InputFormat::Csv).unwrap();
    assert!(parsed.rejects.is_empty());
    assert_eq!(parsed.store, store);
}

#[test]
fn planted_missing_share_is_exact() {
    let store = ten_thousand_records();
    let records: Vec<_> = store
        .into_records()
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            r.affiliation.country = if i % 20 == 7 { None } else { r.affiliation.country.or(Some(GERMANY)) };
            r
        })
        .collect();
    let store = RecordStore::new(records).unwrap();
    let missing = missing_country_records(&store);
    assert_eq!(missing.len() * 20, store.len());
    assert_eq!(missing.len() as f64 / store.len() as f64, 0.05);
}

#[test]
fn missing_list_matches_generator_bookkeeping() {
    let (store, truth) = population(400, 5);
    let listed: BTreeSet<&str> = missing_country_records(&store).into_iter().collect();
    let hidden: BTreeSet<&str> = truth.records.values().filter(|r| r.hidden).map(|r| r.record_id.as_str()).collect();
    assert!(!hidden.is_empty());
    assert_eq!(listed, hidden);
}

#[test]
fn imputations_match_hidden_truth() {
    let (store, truth) = population(1000, 17);
    let (model, held_out) = train(
        &labeled_rows(&store, 5000, 17),
        &TrainConfig {
            seed: 17,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    assert!(held_out > 0.9, "held-out accuracy {held_out}");
    let (filled, report) = impute(&store, &model, 0.5).unwrap();
    let imputed: Vec<_> = report.iter().filter(|e| e.status == ImputationStatus::Imputed).collect();
    assert!(imputed.len() * 2 > report.len(), "{} of {} imputed", imputed.len(), report.len());
    let correct = imputed
        .iter()
        .filter(|e| e.predicted == Some(truth.records[&e.record_id].country))
        .count();
    let share = correct as f64 / imputed.len() as f64;
    assert!(share >= 0.95, "{correct} of {} imputations correct", imputed.len());
    // Observed countries are never touched.
    for (before, after) in store.records().iter().zip(filled.records()) {
        if before.country().is_some() {
            assert_eq!(before.country(), after.country());
        }
    }
}

#[test]
fn collaborative_ratio_matches_recount() {
    let (store, truth) = population(600, 23);
    let index = PublicationIndex::build(&store);
    let mut german_pubs: BTreeSet<&str> = BTreeSet::new();
    for r in store.records() {
        if r.country() == Some(GERMANY) {
            german_pubs.insert(&r.publication_id);
        }
    }
    let mut checked = 0;
    for t in build_timelines(&store) {
        let result = collaborative_ratio(&t, &store, &index);
        let Some(d) = first_departure(&t, t.last_pub_year) else {
            assert!(matches!(result, Err(RateError::NoAbroadPublications(_))));
            continue;
        };
        let mut pubs: BTreeMap<&str, bool> = BTreeMap::new();
        for r in store.author_records(&t.author_id) {
            if r.year >= d && t.effective_country(r.year).unwrap() != GERMANY {
                pubs.insert(&r.publication_id, german_pubs.contains(r.publication_id.as_str()));
            }
        }
        let ratio = result.unwrap();
        assert_eq!(ratio.total, pubs.len());
        assert_eq!(ratio.german_linked, pubs.values().filter(|&&g| g).count());
        assert!((0.0..=1.0).contains(&ratio.ratio));
        checked += 1;
    }
    assert!(checked > 20, "only {checked} movers");
    assert!(truth.identities.values().any(|t| !t.events.is_empty()));
}

#[test]
fn return_share_counts_first_destinations() {
    // No hidden countries or merged identities, so the records show the true moves.
    let (store, truth) = generate(&GeneratorConfig {
        researcher_count: 800,
        seed: 31,
        departure_hazard: 0.05,
        return_hazard: vec![0.2],
        missing_country_probability: 0.0,
        merge_rate: 0.0,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let timelines = build_timelines(&store);
    let mut per_host: BTreeMap<_, (usize, usize)> = BTreeMap::new();
    for t in truth.identities.values().filter(|t| !t.ghost && t.countries[0].1 == GERMANY) {
        let Some(i) = t.countries.iter().position(|&(_, c)| c != GERMANY) else { continue };
        let host = t.countries[i].1;
        let returned = t.countries[i..].iter().any(|&(_, c)| c == GERMANY);
        let e = per_host.entry(host).or_default();
        e.0 += 1;
        e.1 += returned as usize;
    }
    assert!(!per_host.is_empty());
    for (host, (outward, returned)) in per_host {
        let share = country_return_share(&timelines, host).unwrap();
        assert_eq!(share, returned as f64 / outward as f64, "{host}");
    }
}
