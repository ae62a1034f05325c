//! Authorship records: data model, ingestion, validation and indexing.
//!
//! One [`AuthorshipRecord`] links one author to one publication through a
//! single primary affiliation. A [`RecordStore`] is immutable once built and
//! keeps two exhaustive indexes, by author and by (author, year).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{self, BufRead, BufReader, Read, Write};
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::country::CountryCode;

/// Observation window; records outside it are rejected at ingestion.
pub const OBSERVATION_WINDOW: RangeInclusive<i32> = 1996..=2020;

/// Column order of the flat CSV layout.
pub const CSV_COLUMNS: [&str; 16] = [
    "record_id",
    "author_id",
    "publication_id",
    "year",
    "author_full_name",
    "coauthor_names",
    "institution",
    "city",
    "address_line",
    "country",
    "journal_title",
    "publication_title",
    "keywords",
    "subject_tags",
    "funding_texts",
    "grant_numbers",
];

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unreadable input: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema mismatch: {rejected} of {total} rows rejected")]
    SchemaMismatch { rejected: usize, total: usize },
    #[error("schema mismatch: header {found:?} does not match the expected columns")]
    Header { found: Vec<String> },
    #[error("record `{record_id}` invalid: {reason}")]
    Invalid { record_id: String, reason: String },
    #[error("unknown input format `{0}`")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affiliation {
    pub institution: String,
    pub city: String,
    pub address_line: String,
    // Required key, `null` when absent.
    #[serde(deserialize_with = "Option::deserialize")]
    pub country: Option<CountryCode>,
}

impl Affiliation {
    pub fn new(institution: &str, city: &str, address_line: &str, country: Option<CountryCode>) -> Self {
        Self {
            institution: institution.to_string(),
            city: city.to_string(),
            address_line: address_line.to_string(),
            country,
        }
    }

    pub fn is_blank(&self) -> bool {
        self.institution.trim().is_empty()
            && self.city.trim().is_empty()
            && self.address_line.trim().is_empty()
    }

    /// The three free-text fields in a fixed order.
    pub fn text_fields(&self) -> [&str; 3] {
        [&self.institution, &self.city, &self.address_line]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthorshipRecord {
    pub record_id: String,
    pub author_id: String,
    pub publication_id: String,
    pub year: i32,
    pub author_full_name: String,
    pub coauthor_names: Vec<String>,
    pub affiliation: Affiliation,
    pub journal_title: String,
    pub publication_title: String,
    pub keywords: Vec<String>,
    pub subject_tags: Vec<String>,
    pub funding_texts: Vec<String>,
    pub grant_numbers: Vec<String>,
}

impl AuthorshipRecord {
    pub fn country(&self) -> Option<CountryCode> {
        self.affiliation.country
    }

    fn check(&self) -> Result<(), String> {
        if self.record_id.trim().is_empty() {
            return Err("empty record_id".into());
        }
        if !OBSERVATION_WINDOW.contains(&self.year) {
            return Err("year out of window".into());
        }
        if self.author_full_name.trim().is_empty() {
            return Err("empty author_full_name".into());
        }
        if self.affiliation.is_blank() {
            return Err("empty affiliation".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl FromStr for InputFormat {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" | "ndjson" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            other => Err(StoreError::UnknownFormat(other.to_string())),
        }
    }
}

/// A row that failed validation, with its 1-based input line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug)]
pub struct ParseOutcome {
    pub store: RecordStore,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordStore {
    records: Vec<AuthorshipRecord>,
    by_id: HashMap<String, usize>,
    author_index: BTreeMap<String, Vec<usize>>,
    year_index: BTreeMap<(String, i32), Vec<usize>>,
}

impl RecordStore {
    /// Builds a store, failing on the first invalid or duplicate record.
    pub fn new(records: Vec<AuthorshipRecord>) -> Result<Self, StoreError> {
        let mut seen = HashSet::with_capacity(records.len());
        for record in &records {
            record.check().map_err(|reason| StoreError::Invalid {
                record_id: record.record_id.clone(),
                reason,
            })?;
            if !seen.insert(record.record_id.as_str()) {
                return Err(StoreError::Invalid {
                    record_id: record.record_id.clone(),
                    reason: "duplicate record_id".into(),
                });
            }
        }
        Ok(Self::index(records))
    }

    fn index(records: Vec<AuthorshipRecord>) -> Self {
        let mut by_id = HashMap::with_capacity(records.len());
        let mut author_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut year_index: BTreeMap<(String, i32), Vec<usize>> = BTreeMap::new();
        for (pos, record) in records.iter().enumerate() {
            by_id.insert(record.record_id.clone(), pos);
            author_index.entry(record.author_id.clone()).or_default().push(pos);
            year_index
                .entry((record.author_id.clone(), record.year))
                .or_default()
                .push(pos);
        }
        Self {
            records,
            by_id,
            author_index,
            year_index,
        }
    }

    pub fn records(&self) -> &[AuthorshipRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<AuthorshipRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, record_id: &str) -> Option<&AuthorshipRecord> {
        self.by_id.get(record_id).map(|&pos| &self.records[pos])
    }

    pub fn position(&self, record_id: &str) -> Option<usize> {
        self.by_id.get(record_id).copied()
    }

    /// Author ids in sorted order.
    pub fn author_ids(&self) -> impl Iterator<Item = &str> {
        self.author_index.keys().map(String::as_str)
    }

    pub fn author_count(&self) -> usize {
        self.author_index.len()
    }

    /// Store positions of an author's records, in input order.
    pub fn author_positions(&self, author_id: &str) -> &[usize] {
        self.author_index.get(author_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn author_records(&self, author_id: &str) -> impl Iterator<Item = &AuthorshipRecord> {
        self.author_positions(author_id).iter().map(|&p| &self.records[p])
    }

    pub fn author_record_ids(&self, author_id: &str) -> Vec<&str> {
        self.author_records(author_id).map(|r| r.record_id.as_str()).collect()
    }

    pub fn author_year_records(&self, author_id: &str, year: i32) -> impl Iterator<Item = &AuthorshipRecord> {
        self.year_index
            .get(&(author_id.to_string(), year))
            .into_iter()
            .flatten()
            .map(|&p| &self.records[p])
    }

    /// Total number of (author, year) index entries, summed over their lists.
    pub fn year_index_len(&self) -> usize {
        self.year_index.values().map(Vec::len).sum()
    }

    /// Returns a copy with every record passed through `f`. Ids must stay unique.
    pub fn map_records<F>(&self, f: F) -> Result<Self, StoreError>
    where
        F: FnMut(&AuthorshipRecord) -> AuthorshipRecord,
    {
        Self::new(self.records.iter().map(f).collect())
    }
}

/// Ids of records whose affiliation country is absent, in store order.
pub fn missing_country_records(store: &RecordStore) -> Vec<&str> {
    store
        .records()
        .iter()
        .filter(|r| r.affiliation.country.is_none())
        .map(|r| r.record_id.as_str())
        .collect()
}

/// Parses a record stream, collecting malformed rows as rejects.
///
/// More than half of the rows rejected is treated as a schema mismatch.
pub fn parse_records<R: Read>(input: R, format: InputFormat) -> Result<ParseOutcome, StoreError> {
    let mut accepted = Vec::new();
    let mut rejects = Vec::new();
    let mut ids = HashSet::new();
    let mut total = 0usize;

    let mut accept = |line: u64, parsed: Result<AuthorshipRecord, String>| {
        total += 1;
        let outcome = parsed.and_then(|record| {
            record.check()?;
            if !ids.insert(record.record_id.clone()) {
                return Err("duplicate record_id".to_string());
            }
            Ok(record)
        });
        match outcome {
            Ok(record) => accepted.push(record),
            Err(reason) => rejects.push(Reject { line, reason }),
        }
    };

    match format {
        InputFormat::Jsonl => {
            let reader = BufReader::new(input);
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed = serde_json::from_str::<AuthorshipRecord>(&line)
                    .map_err(|e| format!("malformed record: {e}"));
                accept(idx as u64 + 1, parsed);
            }
        }
        InputFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(true)
                .from_reader(input);
            let header = reader.headers()?.clone();
            if header.iter().ne(CSV_COLUMNS.iter().copied()) {
                return Err(StoreError::Header {
                    found: header.iter().map(str::to_string).collect(),
                });
            }
            for row in reader.records() {
                let row = match row {
                    Ok(row) => row,
                    Err(err) => match err.kind() {
                        csv::ErrorKind::Io(_) => return Err(err.into()),
                        _ => {
                            let line = err.position().map(|p| p.line()).unwrap_or(0);
                            accept(line, Err(format!("malformed row: {err}")));
                            continue;
                        }
                    },
                };
                let line = row.position().map(|p| p.line()).unwrap_or(0);
                accept(line, record_from_csv(&row));
            }
        }
    }

    if rejects.len() * 2 > total {
        return Err(StoreError::SchemaMismatch {
            rejected: rejects.len(),
            total,
        });
    }
    Ok(ParseOutcome {
        store: RecordStore::index(accepted),
        rejects,
    })
}

fn split_list(field: &str) -> Vec<String> {
    field
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn record_from_csv(row: &csv::StringRecord) -> Result<AuthorshipRecord, String> {
    if row.len() != CSV_COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", CSV_COLUMNS.len(), row.len()));
    }
    let f = |i: usize| row.get(i).unwrap_or("");
    let year = f(3)
        .trim()
        .parse::<i32>()
        .map_err(|_| format!("malformed year `{}`", f(3)))?;
    let country = match f(9).trim() {
        "" => None,
        raw => Some(CountryCode::normalize(raw).map_err(|e| e.to_string())?),
    };
    Ok(AuthorshipRecord {
        record_id: f(0).to_string(),
        author_id: f(1).to_string(),
        publication_id: f(2).to_string(),
        year,
        author_full_name: f(4).to_string(),
        coauthor_names: split_list(f(5)),
        affiliation: Affiliation::new(f(6), f(7), f(8), country),
        journal_title: f(10).to_string(),
        publication_title: f(11).to_string(),
        keywords: split_list(f(12)),
        subject_tags: split_list(f(13)),
        funding_texts: split_list(f(14)),
        grant_numbers: split_list(f(15)),
    })
}

pub fn write_jsonl<W: Write>(records: &[AuthorshipRecord], mut out: W) -> Result<(), StoreError> {
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(records: &[AuthorshipRecord], out: W) -> Result<(), StoreError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_COLUMNS)?;
    for r in records {
        let year = r.year.to_string();
        let country = r.affiliation.country.map(|c| c.to_string()).unwrap_or_default();
        let fields: [&str; 16] = [
            &r.record_id,
            &r.author_id,
            &r.publication_id,
            &year,
            &r.author_full_name,
            &r.coauthor_names.join(";"),
            &r.affiliation.institution,
            &r.affiliation.city,
            &r.affiliation.address_line,
            &country,
            &r.journal_title,
            &r.publication_title,
            &r.keywords.join(";"),
            &r.subject_tags.join(";"),
            &r.funding_texts.join(";"),
            &r.grant_numbers.join(";"),
        ];
        writer.write_record(fields)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_rejects<W: Write>(rejects: &[Reject], mut out: W) -> Result<(), StoreError> {
    for reject in rejects {
        serde_json::to_writer(&mut out, reject).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, year: i32, country: &str) -> String {
        format!(
            r#"{{"record_id":"{id}","author_id":"a1","publication_id":"p-{id}","year":{year},"author_full_name":"Anna Schmidt","coauthor_names":["B. Weber"],"affiliation":{{"institution":"Max Planck Institute","city":"Rostock","address_line":"Konrad-Zuse-Str. 1","country":{country}}},"journal_title":"Demography","publication_title":"Migration","keywords":["migration"],"subject_tags":["SOCI"],"funding_texts":[],"grant_numbers":[]}}"#
        )
    }

    #[test]
    fn three_good_lines() {
        let input = [line("r1", 2000, "\"DE\""), line("r2", 2001, "null"), line("r3", 2002, "\"Germany\"")].join("\n");
        let out = parse_records(input.as_bytes(), InputFormat::Jsonl).unwrap();
        assert_eq!(out.store.len(), 3);
        assert!(out.rejects.is_empty());
        assert_eq!(out.store.get("r3").unwrap().country().unwrap().as_str(), "DE");
        assert_eq!(missing_country_records(&out.store), vec!["r2"]);
    }

    #[test]
    fn out_of_window_year_is_rejected() {
        let input = [line("r1", 2000, "\"DE\""), line("r2", 1850, "\"DE\""), line("r3", 2002, "\"DE\"")].join("\n");
        let out = parse_records(input.as_bytes(), InputFormat::Jsonl).unwrap();
        assert_eq!(out.store.len(), 2);
        assert_eq!(
            out.rejects,
            vec![Reject {
                line: 2,
                reason: "year out of window".into()
            }]
        );
    }

    #[test]
    fn duplicate_id_keeps_first() {
        let input = [line("r1", 2000, "\"DE\""), line("r1", 2001, "\"US\""), line("r2", 2001, "\"US\"")].join("\n");
        let out = parse_records(input.as_bytes(), InputFormat::Jsonl).unwrap();
        assert_eq!(out.store.get("r1").unwrap().year, 2000);
        assert_eq!(out.rejects[0].reason, "duplicate record_id");
    }

    #[test]
    fn missing_key_and_bad_country_are_rejects() {
        let missing_country_key = line("r2", 2000, "null").replace(",\"country\":null", "");
        let input = [
            line("r1", 2000, "\"DE\""),
            missing_country_key,
            line("r3", 2000, "\"Atlantis\""),
            line("r4", 2000, "\"FR\""),
            line("r5", 2000, "\"FR\""),
        ]
        .join("\n");
        let out = parse_records(input.as_bytes(), InputFormat::Jsonl).unwrap();
        assert_eq!(out.store.len(), 3);
        assert_eq!(out.rejects.iter().map(|r| r.line).collect::<Vec<_>>(), vec![2, 3]);
        assert!(out.rejects[1].reason.contains("Atlantis"));
    }

    #[test]
    fn majority_rejected_is_fatal() {
        let input = [line("r1", 1990, "\"DE\""), line("r2", 1991, "\"DE\""), line("r3", 2000, "\"DE\"")].join("\n");
        let err = parse_records(input.as_bytes(), InputFormat::Jsonl).unwrap_err();
        assert!(matches!(err, StoreError::SchemaMismatch { rejected: 2, total: 3 }));
    }

    #[test]
    fn csv_header_must_match() {
        let err = parse_records("a,b,c\n1,2,3\n".as_bytes(), InputFormat::Csv).unwrap_err();
        assert!(matches!(err, StoreError::Header { .. }));
    }

    #[test]
    fn csv_rows_parse_with_lists_and_null_country() {
        let header = CSV_COLUMNS.join(",");
        let input = format!(
            "{header}\nr1,a1,p1,2004,Anna Schmidt,B. Weber;C. Braun,MPI,Rostock,Str 1,DE,Demography,Title,k1;k2,SOCI,DFG,G-1\n\
             r2,a1,p2,2005,Anna Schmidt,,MPI,Rostock,Str 1,,Demography,Title,,,,\n\
             r3,a1,p3,abc,Anna Schmidt,,MPI,Rostock,Str 1,,Demography,Title,,,,\n"
        );
        let out = parse_records(input.as_bytes(), InputFormat::Csv).unwrap();
        assert_eq!(out.store.len(), 2);
        let r1 = out.store.get("r1").unwrap();
        assert_eq!(r1.coauthor_names, vec!["B. Weber", "C. Braun"]);
        assert_eq!(r1.keywords, vec!["k1", "k2"]);
        assert!(out.store.get("r2").unwrap().country().is_none());
        assert_eq!(out.rejects[0].line, 4);
    }

    #[test]
    fn indexes_resolve() {
        let input = [line("r1", 2000, "\"DE\""), line("r2", 2000, "\"US\""), line("r3", 2002, "\"DE\"")].join("\n");
        let store = parse_records(input.as_bytes(), InputFormat::Jsonl).unwrap().store;
        assert_eq!(store.author_record_ids("a1"), vec!["r1", "r2", "r3"]);
        assert_eq!(store.author_year_records("a1", 2000).count(), 2);
        assert_eq!(store.author_year_records("a1", 2001).count(), 0);
        assert_eq!(store.year_index_len(), 3);
    }

    #[test]
    fn store_new_rejects_invalid() {
        let input = line("r1", 2000, "\"DE\"");
        let mut rec: AuthorshipRecord = serde_json::from_str(&input).unwrap();
        rec.author_full_name = " ".into();
        assert!(matches!(RecordStore::new(vec![rec]), Err(StoreError::Invalid { .. })));
    }
}
