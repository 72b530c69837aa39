//! Flat `key = value` config format shared by relevance configs and
//! parameter-space files. `#` starts a comment, blank lines are skipped,
//! and a value of the form `[a, b, c]` is a list.

use crate::error::{Error, Result};

/// One parsed line: a key plus either a scalar or a list of raw value strings.
#[derive(Debug, Clone, PartialEq)]
pub enum KvValue {
    Scalar(String),
    List(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct KvEntry {
    pub key: String,
    pub value: KvValue,
    pub line: usize,
}

/// Parse the full text, preserving declaration order. Duplicate keys are an error.
pub fn parse(text: &str) -> Result<Vec<KvEntry>> {
    let mut entries: Vec<KvEntry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (key, rhs) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {line_no}: expected `key = value`, got {raw:?}"
            ))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {line_no}: empty key")));
        }
        if entries.iter().any(|e| e.key == key) {
            return Err(Error::Config(format!(
                "line {line_no}: duplicate key {key:?}"
            )));
        }
        let rhs = rhs.trim();
        let value = if let Some(inner) = rhs.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {line_no}: unterminated list")))?;
            let items: Vec<String> = inner
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            KvValue::List(items)
        } else {
            if rhs.is_empty() {
                return Err(Error::Config(format!(
                    "line {line_no}: empty value for {key:?}"
                )));
            }
            KvValue::Scalar(rhs.to_string())
        };
        entries.push(KvEntry {
            key: key.to_string(),
            value,
            line: line_no,
        });
    }
    Ok(entries)
}

pub fn parse_f64(key: &str, raw: &str, line: usize) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| Error::Config(format!("line {line}: {key} expects a number, got {raw:?}")))
        .and_then(|v| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("line {line}: {key} must be finite")))
            }
        })
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}
