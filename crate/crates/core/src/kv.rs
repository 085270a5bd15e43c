//! `key = value` text used by dataset manifests and run configs.
//!
//! Blank lines and lines starting with `#` are skipped; a `#` after a value
//! starts a trailing comment. Keys may not repeat.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// 1-based line number.
    pub line: usize,
}

pub fn parse_kv(text: &str, path: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                message: format!("expected 'key = value', found '{content}'"),
            });
        };
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                message: "empty key".into(),
            });
        }
        if !seen.insert(key.clone()) {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                message: format!("duplicate key '{key}'"),
            });
        }
        out.push(Entry {
            key,
            value: v.trim().to_string(),
            line,
        });
    }
    Ok(out)
}

impl Entry {
    /// Parses the value, reporting failures against this entry's line.
    pub fn parse<V: std::str::FromStr>(&self, path: &str) -> Result<V> {
        self.value.parse().map_err(|_| Error::Parse {
            path: path.to_string(),
            line: self.line,
            message: format!("invalid value '{}' for {}", self.value, self.key),
        })
    }

    /// Comma-separated list; an empty value gives an empty list.
    pub fn list(&self) -> Vec<String> {
        self.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    }
}
