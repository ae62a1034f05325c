//! Topic → discipline mapping and per-researcher discipline labels.

use std::collections::BTreeMap;
use std::io::Read;

use super::{TopicError, TopicModel};

const CANONICAL_MAP: &str = include_str!("../../data/topic_disciplines.csv");

pub const CANONICAL_DISCIPLINES: [&str; 17] = [
    "Agricultural, Biological and Environmental Sciences",
    "Biochemistry, Genetics and Molecular Biology",
    "Chemistry and Chemical Engineering",
    "Computer Science",
    "Earth and Planetary Sciences",
    "Economics and Social Science",
    "Engineering",
    "Energy",
    "Health Professions",
    "Immunology and Microbiology",
    "Materials Science",
    "Mathematics",
    "Medicine",
    "Neuroscience",
    "Pharmacology, Toxicology and Pharmaceutics",
    "Physics and Astronomy",
    "Psychology",
];

pub const MULTIDISCIPLINARY: &str = "Multidisciplinary";

pub const DEFAULT_MULTIDISCIPLINARY_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct DisciplineMap {
    topics: Vec<&'static str>,
    pub multidisciplinary_threshold: f64,
}

fn canonical_name(name: &str) -> Option<&'static str> {
    CANONICAL_DISCIPLINES.iter().copied().find(|d| *d == name.trim())
}

impl DisciplineMap {
    pub fn new(disciplines: &[&str], threshold: f64) -> Result<Self, TopicError> {
        let topics = disciplines
            .iter()
            .map(|d| canonical_name(d).ok_or_else(|| TopicError::Map(format!("unknown discipline `{d}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        if topics.is_empty() {
            return Err(TopicError::Map("no topics".into()));
        }
        Ok(Self {
            topics,
            multidisciplinary_threshold: threshold,
        })
    }

    /// The shipped 30-topic mapping.
    pub fn canonical() -> Self {
        Self::from_csv(CANONICAL_MAP.as_bytes()).expect("shipped map is valid")
    }

    /// Reads `topic_index,discipline` rows; indices must cover 0..n exactly.
    pub fn from_csv<R: Read>(input: R) -> Result<Self, TopicError> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers()?.clone();
        if header.iter().map(str::trim).ne(["topic_index", "discipline"]) {
            return Err(TopicError::Map(format!("unexpected header {header:?}")));
        }
        let mut rows: BTreeMap<usize, String> = BTreeMap::new();
        for row in reader.records() {
            let row = row?;
            let index: usize = row[0]
                .trim()
                .parse()
                .map_err(|_| TopicError::Map(format!("bad topic index `{}`", &row[0])))?;
            if rows.insert(index, row[1].to_string()).is_some() {
                return Err(TopicError::Map(format!("topic {index} mapped twice")));
            }
        }
        if rows.keys().copied().ne(0..rows.len()) {
            return Err(TopicError::Map("topic indices must be 0..n without gaps".into()));
        }
        let names: Vec<&str> = rows.values().map(String::as_str).collect();
        Self::new(&names, DEFAULT_MULTIDISCIPLINARY_THRESHOLD)
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn discipline(&self, topic: usize) -> &'static str {
        self.topics[topic]
    }

    /// Distinct discipline names in canonical order.
    pub fn disciplines(&self) -> Vec<&'static str> {
        CANONICAL_DISCIPLINES
            .iter()
            .copied()
            .filter(|d| self.topics.contains(d))
            .collect()
    }
}

/// Discipline of the most probable topic, or [`MULTIDISCIPLINARY`] unless
/// that probability strictly exceeds the threshold.
pub fn assign_discipline(row: &[f64], map: &DisciplineMap) -> &'static str {
    let Some((topic, &p)) = row
        .iter()
        .enumerate()
        .fold(None::<(usize, &f64)>, |best, (i, p)| match best {
            Some((_, b)) if b >= p => best,
            _ => Some((i, p)),
        })
    else {
        return MULTIDISCIPLINARY;
    };
    if p > map.multidisciplinary_threshold {
        map.discipline(topic)
    } else {
        MULTIDISCIPLINARY
    }
}

/// Author id → discipline for every document of the model.
pub fn assign_disciplines(model: &TopicModel, map: &DisciplineMap) -> Result<BTreeMap<String, String>, TopicError> {
    if map.len() != model.k {
        return Err(TopicError::Map(format!(
            "map covers {} topics, model has {}",
            map.len(),
            model.k
        )));
    }
    Ok(model
        .author_ids
        .iter()
        .zip(&model.doc_topic)
        .map(|(a, row)| (a.clone(), assign_discipline(row, map).to_string()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_map_covers_all_disciplines() {
        let map = DisciplineMap::canonical();
        assert_eq!(map.len(), 30);
        assert_eq!(map.disciplines().len(), 17);
        assert_eq!(map.discipline(0), "Earth and Planetary Sciences");
        assert_eq!(map.discipline(18), "Earth and Planetary Sciences");
        assert_eq!(map.discipline(1), "Materials Science");
        assert_eq!(map.discipline(14), "Materials Science");
        assert_eq!(map.discipline(29), "Physics and Astronomy");
    }

    #[test]
    fn threshold_is_strict() {
        let map = DisciplineMap::new(&["Physics and Astronomy", "Medicine", "Mathematics", "Energy"], 0.3).unwrap();
        assert_eq!(assign_discipline(&[0.7, 0.2, 0.1, 0.0], &map), "Physics and Astronomy");
        assert_eq!(assign_discipline(&[0.25, 0.25, 0.25, 0.25], &map), MULTIDISCIPLINARY);
        assert_eq!(assign_discipline(&[0.3, 0.3, 0.3, 0.1], &map), MULTIDISCIPLINARY);
        assert_eq!(assign_discipline(&[0.2, 0.45, 0.35, 0.0], &map), "Medicine");
    }

    #[test]
    fn map_validation() {
        assert!(DisciplineMap::new(&["Astrology"], 0.3).is_err());
        assert!(DisciplineMap::from_csv("topic_index,discipline\n0,Medicine\n2,Energy\n".as_bytes()).is_err());
        assert!(DisciplineMap::from_csv("topic_index,discipline\n0,Medicine\n0,Energy\n".as_bytes()).is_err());
        let ok = DisciplineMap::from_csv("topic_index,discipline\n1,Energy\n0,Medicine\n".as_bytes()).unwrap();
        assert_eq!(ok.discipline(1), "Energy");
    }
}
