//! Line-oriented `key = value` text used by schema files and reports.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may repeat;
//! order is preserved.

use crate::{Error, Result};

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`, got `{line}`", i + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse(format!("line {}: empty key", i + 1)));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// First value stored under `key`.
pub fn lookup<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

pub fn require<'a>(pairs: &'a [(String, String)], key: &str) -> Result<&'a str> {
    lookup(pairs, key).ok_or_else(|| Error::Parse(format!("missing key `{key}`")))
}

pub fn require_parsed<T: std::str::FromStr>(pairs: &[(String, String)], key: &str) -> Result<T> {
    let raw = require(pairs, key)?;
    raw.parse().map_err(|_| Error::Parse(format!("key `{key}`: cannot parse `{raw}`")))
}
