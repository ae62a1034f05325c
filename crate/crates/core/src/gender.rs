//! Gender labels from first names.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::records::RecordStore;

const BUILTIN_TABLE: &str = include_str!("../data/first_names.csv");

pub const DEFAULT_PROBABILITY_FLOOR: f64 = 0.8;

#[derive(Debug, thiserror::Error)]
pub enum GenderError {
    #[error("line {line}: {reason}")]
    Invalid { line: u64, reason: String },
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Unknown,
}

impl Gender {
    pub fn as_str(&self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Unknown => "unknown",
        }
    }

    pub fn is_known(&self) -> bool {
        *self != Gender::Unknown
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" | "f" => Ok(Gender::Female),
            "male" | "m" => Ok(Gender::Male),
            "unknown" => Ok(Gender::Unknown),
            other => Err(format!("unknown gender `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Table,
    Manual,
    None,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Table => "table",
            Method::Manual => "manual",
            Method::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub gender: Gender,
    pub method: Method,
}

impl Assignment {
    pub const UNKNOWN: Assignment = Assignment {
        gender: Gender::Unknown,
        method: Method::None,
    };
}

/// Folds diacritics and a few letters that do not decompose.
fn fold(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    for c in token.nfd().filter(|c| !unicode_normalization::char::is_combining_mark(*c)) {
        match c {
            'ß' => out.push_str("ss"),
            'æ' | 'Æ' => out.push_str("ae"),
            'œ' | 'Œ' => out.push_str("oe"),
            'ø' | 'Ø' => out.push('o'),
            'ł' | 'Ł' => out.push('l'),
            'đ' | 'Đ' => out.push('d'),
            'ı' => out.push('i'),
            c => out.extend(c.to_lowercase()),
        }
    }
    out
}

/// First given-name token: lower-cased and folded, skipping initials.
///
/// "Surname, Given Names" puts the given names after the comma; otherwise
/// every token but the last is a given name. Returns "" when only initials
/// remain.
pub fn normalize_first_name(full_name: &str) -> String {
    let given: Vec<&str> = match full_name.split_once(',') {
        Some((_, rest)) => rest.split_whitespace().collect(),
        None => {
            let tokens: Vec<&str> = full_name.split_whitespace().collect();
            let keep = tokens.len().saturating_sub(1);
            tokens[..keep].to_vec()
        }
    };
    for token in given {
        let cleaned: String = fold(token)
            .chars()
            .filter(|c| c.is_alphanumeric() || *c == '-')
            .collect();
        let cleaned = cleaned.trim_matches('-');
        if cleaned.chars().filter(|c| c.is_alphabetic()).count() >= 2 {
            return cleaned.to_string();
        }
    }
    String::new()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NameGenderTable {
    entries: HashMap<String, (Gender, f64)>,
}

impl NameGenderTable {
    /// The table bundled with the crate.
    pub fn builtin() -> Self {
        Self::from_csv(BUILTIN_TABLE.as_bytes()).expect("bundled name table is valid")
    }

    /// Reads `name,gender,probability` rows. Names are normalized like first
    /// names; a later row for the same name replaces the earlier one.
    pub fn from_csv<R: Read>(input: R) -> Result<Self, GenderError> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers()?.clone();
        if header.iter().map(str::trim).ne(["name", "gender", "probability"]) {
            return Err(GenderError::Header(header.iter().map(String::from).collect()));
        }
        let mut table = Self::default();
        for row in reader.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let invalid = |reason: String| GenderError::Invalid { line, reason };
            let name = fold(row[0].trim());
            if name.is_empty() {
                return Err(invalid("empty name".into()));
            }
            let gender: Gender = row[1].parse().map_err(invalid)?;
            if !gender.is_known() {
                return Err(invalid("table gender must be female or male".into()));
            }
            let probability: f64 = row[2]
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad probability `{}`", &row[2])))?;
            if !(0.5..=1.0).contains(&probability) {
                return Err(invalid(format!("probability {probability} outside [0.5, 1]")));
            }
            table.insert(&name, gender, probability);
        }
        Ok(table)
    }

    pub fn insert(&mut self, name: &str, gender: Gender, probability: f64) {
        assert!(gender.is_known() && (0.5..=1.0).contains(&probability));
        self.entries.insert(fold(name), (gender, probability));
    }

    pub fn lookup(&self, first_name: &str) -> Option<(Gender, f64)> {
        self.entries.get(first_name).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds every row of `other`, replacing clashing names.
    pub fn extend(&mut self, other: NameGenderTable) {
        self.entries.extend(other.entries);
    }
}

/// Reads `revised_author_id,gender` overrides.
pub fn read_overrides<R: Read>(input: R) -> Result<BTreeMap<String, Gender>, GenderError> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().map(str::trim).ne(["revised_author_id", "gender"]) {
        return Err(GenderError::Header(header.iter().map(String::from).collect()));
    }
    let mut overrides = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let gender: Gender = row[1].parse().map_err(|reason| GenderError::Invalid { line, reason })?;
        if !gender.is_known() {
            return Err(GenderError::Invalid {
                line,
                reason: "override gender must be female or male".into(),
            });
        }
        overrides.insert(row[0].trim().to_string(), gender);
    }
    Ok(overrides)
}

/// Most frequent full name per author; ties go to the smallest string.
pub fn profile_names(store: &RecordStore) -> BTreeMap<String, String> {
    store
        .author_ids()
        .map(|author| {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for r in store.author_records(author) {
                *counts.entry(r.author_full_name.as_str()).or_default() += 1;
            }
            let max = counts.values().copied().max().unwrap_or(0);
            let name = counts.into_iter().find(|&(_, c)| c == max).map(|(n, _)| n).unwrap_or("");
            (author.to_string(), name.to_string())
        })
        .collect()
}

/// Override first, then a table hit at or above the floor, else unknown.
pub fn assign_gender(
    profiles: &BTreeMap<String, String>,
    table: &NameGenderTable,
    probability_floor: f64,
    overrides: &BTreeMap<String, Gender>,
) -> BTreeMap<String, Assignment> {
    profiles
        .iter()
        .map(|(author, full_name)| {
            let assignment = if let Some(&gender) = overrides.get(author) {
                Assignment {
                    gender,
                    method: Method::Manual,
                }
            } else {
                match table.lookup(&normalize_first_name(full_name)) {
                    Some((gender, p)) if p >= probability_floor => Assignment {
                        gender,
                        method: Method::Table,
                    },
                    _ => Assignment::UNKNOWN,
                }
            };
            (author.clone(), assignment)
        })
        .collect()
}

/// Share of profiles with a known label.
pub fn coverage(assignments: &BTreeMap<String, Assignment>) -> f64 {
    if assignments.is_empty() {
        return 0.0;
    }
    let known = assignments.values().filter(|a| a.gender.is_known()).count();
    known as f64 / assignments.len() as f64
}
