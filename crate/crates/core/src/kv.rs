//! Flat `key = value` text documents used for experiment configs and synthetic map specs.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. A key may
//! repeat only where the consumer allows it (e.g. `anomaly`).

use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KvError {
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: invalid value {value:?} for `{key}`")]
    Value { line: usize, key: String, value: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl Entry {
    pub fn parse<V: FromStr>(&self) -> Result<V, KvError> {
        self.value.parse().map_err(|_| self.invalid())
    }

    pub fn invalid(&self) -> KvError {
        KvError::Value { line: self.line, key: self.key.clone(), value: self.value.clone() }
    }

    /// Comma-separated list of `n` values.
    pub fn parse_list<V: FromStr>(&self, n: usize) -> Result<Vec<V>, KvError> {
        let parts: Vec<&str> = self.value.split(',').map(str::trim).collect();
        if parts.len() != n {
            return Err(self.invalid());
        }
        parts.iter().map(|p| p.parse().map_err(|_| self.invalid())).collect()
    }
}

/// Splits a document into entries, rejecting keys outside `allowed`.
/// Keys in `repeatable` may appear more than once.
pub fn parse_entries(text: &str, allowed: &[&str], repeatable: &[&str]) -> Result<Vec<Entry>, KvError> {
    let mut out: Vec<Entry> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| KvError::Syntax { line, text: raw.to_string() })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(KvError::Syntax { line, text: raw.to_string() });
        }
        if !allowed.contains(&key) {
            return Err(KvError::UnknownKey { line, key: key.into() });
        }
        if !repeatable.contains(&key) && out.iter().any(|e| e.key == key) {
            return Err(KvError::Duplicate { line, key: key.into() });
        }
        out.push(Entry { line, key: key.into(), value: value.trim().into() });
    }
    Ok(out)
}
