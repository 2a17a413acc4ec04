//! Reader and writer for the flat YAML subset used by `project.yaml`:
//! top-level `key: scalar` pairs and `key:` followed by `- item` string
//! lists. No nesting, anchors, or multi-line scalars.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Scalar(String),
    List(Vec<String>),
}

/// Parsed document, keys in file order.
pub type Document = Vec<(String, Value)>;

pub fn parse(text: &str) -> Result<Document> {
    let mut doc: Document = Vec::new();
    let mut seen = BTreeMap::new();
    // True while the most recent key had no inline value.
    let mut open_list = false;
    for (n, raw) in text.lines().enumerate() {
        let lineno = n + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(item) = trimmed.strip_prefix("- ").or_else(|| (trimmed == "-").then_some("")) {
            if !open_list {
                return Err(err(lineno, "list item without a list key"));
            }
            let item = scalar(item, lineno)?;
            match doc.last_mut() {
                Some((_, Value::List(items))) => items.push(item),
                Some((_, v)) => *v = Value::List(vec![item]),
                None => return Err(err(lineno, "list item without a list key")),
            }
            continue;
        }
        if raw.starts_with(' ') || raw.starts_with('\t') {
            return Err(err(lineno, "nested mappings are not supported"));
        }
        let (key, rest) = raw
            .split_once(':')
            .ok_or_else(|| err(lineno, "expected `key: value`"))?;
        let key = key.trim();
        if key.is_empty() || key.contains(' ') {
            return Err(err(lineno, "invalid key"));
        }
        if seen.insert(key.to_string(), true).is_some() {
            return Err(err(lineno, &format!("duplicate key {key:?}")));
        }
        let rest = rest.trim();
        open_list = rest.is_empty();
        let value = if rest.is_empty() {
            // Becomes a list if items follow.
            Value::Scalar(String::new())
        } else if rest == "[]" {
            Value::List(Vec::new())
        } else {
            Value::Scalar(scalar(rest, lineno)?)
        };
        doc.push((key.to_string(), value));
    }
    Ok(doc)
}

fn err(line: usize, msg: &str) -> Error {
    Error::parse("project.yaml", format!("line {line}: {msg}"))
}

fn scalar(s: &str, line: usize) -> Result<String> {
    let s = s.trim();
    if s.starts_with('"') {
        let end = closing_double_quote(s).ok_or_else(|| err(line, "unterminated string"))?;
        let tail = s[end + 1..].trim();
        if !tail.is_empty() && !tail.starts_with('#') {
            return Err(err(line, "trailing characters after string"));
        }
        return serde_json::from_str(&s[..=end]).map_err(|e| err(line, &e.to_string()));
    }
    if let Some(body) = s.strip_prefix('\'') {
        let mut out = String::new();
        let mut chars = body.chars().peekable();
        while let Some(c) = chars.next() {
            if c == '\'' {
                if chars.peek() == Some(&'\'') {
                    chars.next();
                    out.push('\'');
                } else {
                    return Ok(out);
                }
            } else {
                out.push(c);
            }
        }
        return Err(err(line, "unterminated string"));
    }
    let plain = match s.find(" #") {
        Some(i) => &s[..i],
        None => s,
    };
    Ok(plain.trim().to_string())
}

fn closing_double_quote(s: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    let mut i = 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'"' => return Some(i),
            _ => i += 1,
        }
    }
    None
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

pub fn render(doc: &Document) -> String {
    let mut out = String::new();
    for (k, v) in doc {
        match v {
            Value::Scalar(s) => {
                out.push_str(k);
                out.push_str(": ");
                out.push_str(&quote(s));
                out.push('\n');
            }
            Value::List(items) if items.is_empty() => {
                out.push_str(k);
                out.push_str(": []\n");
            }
            Value::List(items) => {
                out.push_str(k);
                out.push_str(":\n");
                for item in items {
                    out.push_str("  - ");
                    out.push_str(&quote(item));
                    out.push('\n');
                }
            }
        }
    }
    out
}
