//! Flat `key=value` text files: one pair per line, `#` comments.

use std::collections::BTreeMap;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KvError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("key `{key}`: cannot parse `{value}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("unknown key `{0}`")]
    Unknown(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvFile {
    entries: BTreeMap<String, String>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(KvError::Syntax { line: i + 1 })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(KvError::Syntax { line: i + 1 });
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(KvError::Duplicate {
                    line: i + 1,
                    key: key.to_string(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn from_pairs<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            entries: pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, KvError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse().map_err(|e: T::Err| KvError::Value {
                    key: key.to_string(),
                    value: v.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T, KvError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str) -> Result<T, KvError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| KvError::Missing(key.to_string()))
    }

    /// Comma-separated list.
    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>, KvError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|item| {
                item.parse().map_err(|e: T::Err| KvError::Value {
                    key: key.to_string(),
                    value: item.to_string(),
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// Fails on the first key not starting with one of `prefixes`.
    pub fn check_known(&self, prefixes: &[&str]) -> Result<(), KvError> {
        match self.entries.keys().find(|k| !prefixes.iter().any(|p| k.starts_with(p))) {
            Some(k) => Err(KvError::Unknown(k.clone())),
            None => Ok(()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn render(&self) -> String {
        self.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_get() {
        let kv = KvFile::parse("# comment\nseed = 42\n\nlda.k=3\ncohorts=1998-2001, 2002-2005\n").unwrap();
        assert_eq!(kv.get::<u64>("seed").unwrap(), Some(42));
        assert_eq!(kv.get_or::<usize>("lda.iters", 1000).unwrap(), 1000);
        assert_eq!(
            kv.list::<String>("cohorts").unwrap().unwrap(),
            vec!["1998-2001".to_string(), "2002-2005".to_string()]
        );
        assert!(kv.get::<u64>("lda.k").is_ok());
        assert!(matches!(kv.require::<u64>("nope"), Err(KvError::Missing(_))));
        assert!(matches!(KvFile::parse("a=1\na=2"), Err(KvError::Duplicate { line: 2, .. })));
        assert!(matches!(KvFile::parse("novalue"), Err(KvError::Syntax { line: 1 })));
        assert!(matches!(kv.get::<f64>("cohorts"), Err(KvError::Value { .. })));
        assert_eq!(KvFile::parse(&kv.render()).unwrap(), kv);
    }
}
