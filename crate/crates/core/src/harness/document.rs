//! Untyped `[section] key = value` documents, read from INI-style text or
//! from a JSON object of objects.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

/// One problem found in a configuration, with its location when known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: Option<usize>,
    /// `section.key`, or the section name alone.
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(line: Option<usize>, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    pub line: Option<usize>,
    pub entries: BTreeMap<String, Entry>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    pub sections: BTreeMap<String, Section>,
}

impl Document {
    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section)?.entries.get(key)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    /// Sets a value, creating the section if needed.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.sections.entry(section.to_string()).or_default().entries.insert(
            key.to_string(),
            Entry {
                value: value.into(),
                line: None,
            },
        );
    }

    pub fn remove(&mut self, section: &str, key: &str) {
        if let Some(s) = self.sections.get_mut(section) {
            s.entries.remove(key);
        }
    }

    /// Parses JSON when the first non-blank character is `{`, INI otherwise.
    pub fn parse(text: &str) -> (Self, Vec<Diagnostic>) {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_ini(text)
        }
    }

    pub fn parse_ini(text: &str) -> (Self, Vec<Diagnostic>) {
        let mut doc = Document::default();
        let mut diags = Vec::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = strip_comment(raw).trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    diags.push(Diagnostic::new(Some(line), body, "unterminated section header"));
                    continue;
                };
                let name = name.trim().to_ascii_lowercase();
                if doc.sections.contains_key(&name) {
                    diags.push(Diagnostic::new(Some(line), &name, "duplicate section"));
                }
                doc.sections.entry(name.clone()).or_insert_with(|| Section {
                    line: Some(line),
                    entries: BTreeMap::new(),
                });
                current = Some(name);
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                diags.push(Diagnostic::new(Some(line), body, "expected `key = value`"));
                continue;
            };
            let key = key.trim().to_ascii_lowercase();
            let Some(section) = &current else {
                diags.push(Diagnostic::new(Some(line), &key, "key outside of any [section]"));
                continue;
            };
            if key.is_empty() {
                diags.push(Diagnostic::new(Some(line), section.as_str(), "empty key"));
                continue;
            }
            let entries = &mut doc.sections.get_mut(section).expect("section exists").entries;
            if entries.contains_key(&key) {
                diags.push(Diagnostic::new(Some(line), format!("{section}.{key}"), "duplicate key"));
            }
            entries.insert(
                key,
                Entry {
                    value: unquote(value.trim()).to_string(),
                    line: Some(line),
                },
            );
        }
        (doc, diags)
    }

    pub fn parse_json(text: &str) -> (Self, Vec<Diagnostic>) {
        let mut doc = Document::default();
        let value: serde_json::Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => return (doc, vec![Diagnostic::new(Some(e.line()), "json", e.to_string())]),
        };
        let Some(top) = value.as_object() else {
            return (
                doc,
                vec![Diagnostic::new(None, "json", "expected an object of sections")],
            );
        };
        let mut diags = Vec::new();
        for (name, body) in top {
            let name = name.to_ascii_lowercase();
            let Some(obj) = body.as_object() else {
                diags.push(Diagnostic::new(None, &name, "section must be an object"));
                continue;
            };
            let section = doc.sections.entry(name.clone()).or_default();
            for (key, v) in obj {
                match scalar_text(v) {
                    Some(s) => {
                        section
                            .entries
                            .insert(key.to_ascii_lowercase(), Entry { value: s, line: None });
                    }
                    None => diags.push(Diagnostic::new(None, format!("{name}.{key}"), "unsupported value type")),
                }
            }
        }
        (doc, diags)
    }
}

fn scalar_text(v: &serde_json::Value) -> Option<String> {
    use serde_json::Value;
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Array(items) => items
            .iter()
            .map(scalar_text)
            .collect::<Option<Vec<_>>>()
            .map(|v| v.join(",")),
        Value::Null | Value::Object(_) => None,
    }
}

/// Drops a `#` or `;` comment that starts the line or follows whitespace.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if (b == b'#' || b == b';') && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

fn unquote(v: &str) -> &str {
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return &v[1..v.len() - 1];
        }
    }
    v
}

/// Splits a list value on commas, tolerating surrounding brackets.
pub fn split_list(v: &str) -> Vec<&str> {
    let v = v.trim();
    let v = v.strip_prefix('[').and_then(|s| s.strip_suffix(']')).unwrap_or(v);
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ini_sections_comments_and_lines() {
        let text = "# header\n[model]\nname = gaussian ; trailing\n\n[Algorithm]\nbeta = 1e4\ny = [1, 3]\n";
        let (doc, diags) = Document::parse(text);
        assert!(diags.is_empty(), "{diags:?}");
        assert_eq!(doc.get("model", "name").unwrap().value, "gaussian");
        let beta = doc.get("algorithm", "beta").unwrap();
        assert_eq!((beta.value.as_str(), beta.line), ("1e4", Some(6)));
        assert_eq!(split_list(&doc.get("algorithm", "y").unwrap().value), ["1", "3"]);
    }

    #[test]
    fn ini_diagnostics_carry_lines() {
        let (_, diags) = Document::parse("beta = 1\n[a]\nnonsense\n[a]\nk = 1\nk = 2\n");
        let lines: Vec<_> = diags.iter().map(|d| d.line.unwrap()).collect();
        assert_eq!(lines, [1, 3, 4, 6]);
    }

    #[test]
    fn json_matches_ini() {
        let (a, _) = Document::parse("[model]\nname = gaussian\ny = 1,3\n[algorithm]\nbeta = 10000\n");
        let (b, d) = Document::parse(r#"{"model": {"name": "gaussian", "y": [1, 3]}, "algorithm": {"beta": 10000}}"#);
        assert!(d.is_empty());
        for (s, k) in [("model", "name"), ("model", "y"), ("algorithm", "beta")] {
            assert_eq!(a.get(s, k).unwrap().value, b.get(s, k).unwrap().value);
        }
    }
}
