//! Plain-text `key = value` sidecar files.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected key = value", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Looks up and parses one value.
pub fn field<T>(map: &BTreeMap<String, String>, key: &str) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    let raw = map
        .get(key)
        .ok_or_else(|| Error::Format(format!("missing key {key:?}")))?;
    raw.parse()
        .map_err(|e| Error::Format(format!("{key} = {raw:?}: {e}")))
}

/// Parses a `sep`-separated list.
pub fn list<T>(raw: &str, sep: char) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(sep)
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| Error::Format(format!("list item {s:?}: {e}")))
        })
        .collect()
}
