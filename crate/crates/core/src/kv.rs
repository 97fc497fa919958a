//! Plain-text `key = value` documents.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored and list
//! values are comma separated. Keys may appear at most once.

use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvDoc {
    origin: String,
    entries: Vec<(String, String)>,
}

impl KvDoc {
    pub fn new(origin: impl Into<String>) -> Self {
        Self {
            origin: origin.into(),
            entries: Vec::new(),
        }
    }

    pub fn parse(text: &str, origin: impl Into<String>) -> Result<Self> {
        let mut doc = Self::new(origin);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| doc.err(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(doc.err(format!("line {}: malformed key `{key}`", i + 1)));
            }
            if doc.get(key).is_some() {
                return Err(doc.err(format!("line {}: duplicate key `{key}`", i + 1)));
            }
            doc.entries.push((key.to_string(), value.trim().to_string()));
        }
        Ok(doc)
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Insert or replace a value, keeping the original position of the key.
    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        let i = self.entries.iter().position(|(k, _)| k == key)?;
        Some(self.entries.remove(i).1)
    }

    pub fn value<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        self.get(key).map(|raw| self.convert(key, raw)).transpose()
    }

    pub fn value_or<V: FromStr>(&self, key: &str, default: V) -> Result<V> {
        Ok(self.value(key)?.unwrap_or(default))
    }

    pub fn require<V: FromStr>(&self, key: &str) -> Result<V> {
        self.value(key)?
            .ok_or_else(|| self.err(format!("missing required key `{key}`")))
    }

    pub fn flag(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|raw| match raw {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(self.err(format!("key `{key}`: expected a boolean, got `{raw}`"))),
            })
            .transpose()
    }

    /// Comma-separated list; an empty value is an empty list.
    pub fn list<V: FromStr>(&self, key: &str) -> Result<Option<Vec<V>>> {
        self.get(key)
            .map(|raw| {
                raw.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| self.convert(key, s))
                    .collect()
            })
            .transpose()
    }

    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, _)) => Err(self.err(format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }

    /// Render back to text; parsing the result yields an equal document.
    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn err(&self, msg: impl Display) -> Error {
        Error::Config(format!("{}: {msg}", self.origin))
    }

    fn convert<V: FromStr>(&self, key: &str, raw: &str) -> Result<V> {
        raw.parse()
            .map_err(|_| self.err(format!("key `{key}`: cannot parse `{raw}`")))
    }
}

/// Join values into a comma-separated list.
pub fn join<V: Display>(values: impl IntoIterator<Item = V>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}
