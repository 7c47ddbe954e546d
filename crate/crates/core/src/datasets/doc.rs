//! A small hierarchical key-value text format.
//!
//! This is a strict subset of YAML block style: maps (`key: value`), lists
//! (`- item`), scalars, two-space indentation, full-line `#` comments and
//! the empty collections `{}` and `[]`. Scalars that would be ambiguous are
//! written in double quotes with `\\`, `\"` and `\n` escapes.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Doc {
    Scalar(String),
    List(Vec<Doc>),
    Map(Vec<(String, Doc)>),
}

impl Doc {
    pub fn scalar(s: impl ToString) -> Self {
        Doc::Scalar(s.to_string())
    }

    pub fn map() -> MapBuilder {
        MapBuilder(Vec::new())
    }

    pub fn get(&self, key: &str) -> Option<&Doc> {
        match self {
            Doc::Map(entries) => entries.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Doc::Scalar(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Doc]> {
        match self {
            Doc::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&[(String, Doc)]> {
        match self {
            Doc::Map(entries) => Some(entries),
            _ => None,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self {
            Doc::Map(entries) if !entries.is_empty() => emit_map(entries, 0, &mut out),
            Doc::List(items) if !items.is_empty() => emit_list(items, 0, &mut out),
            Doc::Map(_) => out.push_str("{}\n"),
            Doc::List(_) => out.push_str("[]\n"),
            Doc::Scalar(s) => {
                out.push_str(&quote(s));
                out.push('\n');
            }
        }
        out
    }

    /// Parse `text`; `file` is only used in error messages.
    pub fn parse(text: &str, file: &Path) -> Result<Doc> {
        let mut lines = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let raw = raw.strip_suffix('\r').unwrap_or(raw);
            let trimmed = raw.trim_start_matches(' ');
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if trimmed.starts_with('\t') {
                return Err(Error::parse(file, k + 1, "tabs are not allowed for indentation"));
            }
            lines.push(Line {
                number: k + 1,
                indent: raw.len() - trimmed.len(),
                content: trimmed.trim_end().to_string(),
            });
        }
        match lines.as_slice() {
            [] => return Ok(Doc::Map(Vec::new())),
            [only] if only.content == "{}" || only.content == "[]" => {
                return inline_value(&only.content).map_err(|m| Error::parse(file, only.number, m));
            }
            _ => {}
        }
        let mut parser = Parser { lines, pos: 0, file };
        let indent = parser.lines[0].indent;
        let doc = parser.block(indent)?;
        if let Some(line) = parser.lines.get(parser.pos) {
            return Err(Error::parse(file, line.number, "unexpected indentation"));
        }
        Ok(doc)
    }
}

pub struct MapBuilder(Vec<(String, Doc)>);

impl MapBuilder {
    pub fn entry(mut self, key: &str, value: Doc) -> Self {
        self.0.push((key.to_string(), value));
        self
    }

    pub fn scalar(self, key: &str, value: impl ToString) -> Self {
        self.entry(key, Doc::scalar(value))
    }

    pub fn opt_scalar<T: ToString>(self, key: &str, value: Option<T>) -> Self {
        match value {
            Some(v) => self.scalar(key, v),
            None => self,
        }
    }

    pub fn build(self) -> Doc {
        Doc::Map(self.0)
    }
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s.trim() != s
        || s.contains([':', '#', '\n', '\r', '\t', '"', '\\'])
        || s.starts_with(['-', '{', '[', '\''])
}

fn quote(s: &str) -> String {
    if !needs_quotes(s) {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn emit_value_after_key(value: &Doc, indent: usize, out: &mut String) {
    match value {
        Doc::Scalar(s) => {
            out.push(' ');
            out.push_str(&quote(s));
            out.push('\n');
        }
        Doc::Map(m) if m.is_empty() => out.push_str(" {}\n"),
        Doc::List(l) if l.is_empty() => out.push_str(" []\n"),
        Doc::Map(m) => {
            out.push('\n');
            emit_map(m, indent + 2, out);
        }
        Doc::List(l) => {
            out.push('\n');
            emit_list(l, indent + 2, out);
        }
    }
}

fn emit_map(entries: &[(String, Doc)], indent: usize, out: &mut String) {
    for (key, value) in entries {
        debug_assert!(!key.is_empty() && !needs_quotes(key), "unsupported key {key:?}");
        out.push_str(&" ".repeat(indent));
        out.push_str(key);
        out.push(':');
        emit_value_after_key(value, indent, out);
    }
}

fn emit_list(items: &[Doc], indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    for item in items {
        match item {
            Doc::Map(m) if !m.is_empty() => {
                let mut inner = String::new();
                emit_map(m, indent + 2, &mut inner);
                out.push_str(&pad);
                out.push_str("- ");
                out.push_str(&inner[indent + 2..]);
            }
            Doc::List(l) if !l.is_empty() => {
                out.push_str(&pad);
                out.push_str("-\n");
                emit_list(l, indent + 2, out);
            }
            other => {
                out.push_str(&pad);
                out.push('-');
                emit_value_after_key(other, indent, out);
            }
        }
    }
}

struct Line {
    number: usize,
    indent: usize,
    content: String,
}

impl Line {
    fn is_list_item(&self) -> bool {
        self.content == "-" || self.content.starts_with("- ")
    }
}

struct Parser<'a> {
    lines: Vec<Line>,
    pos: usize,
    file: &'a Path,
}

impl Parser<'_> {
    fn err(&self, number: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.file, number, msg)
    }

    fn block(&mut self, indent: usize) -> Result<Doc> {
        if self.lines[self.pos].is_list_item() {
            self.list(indent)
        } else {
            self.map(indent)
        }
    }

    /// Value for a key or list item that had nothing after the marker.
    fn nested(&mut self, parent_indent: usize, number: usize) -> Result<Doc> {
        match self.lines.get(self.pos) {
            Some(next) if next.indent > parent_indent => {
                let indent = next.indent;
                self.block(indent)
            }
            _ => Err(self.err(number, "missing value")),
        }
    }

    fn map(&mut self, indent: usize) -> Result<Doc> {
        let mut entries: Vec<(String, Doc)> = Vec::new();
        while let Some(line) = self.lines.get(self.pos) {
            if line.indent < indent {
                break;
            }
            let number = line.number;
            if line.indent > indent {
                return Err(self.err(number, "unexpected indentation"));
            }
            if line.is_list_item() {
                return Err(self.err(number, "list item where a key was expected"));
            }
            let (key, rest) = split_key(&line.content).ok_or_else(|| self.err(number, "expected `key: value`"))?;
            if entries.iter().any(|(k, _)| k == &key) {
                return Err(self.err(number, format!("duplicate key `{key}`")));
            }
            self.pos += 1;
            let value = if rest.is_empty() {
                self.nested(indent, number)?
            } else {
                inline_value(&rest).map_err(|m| self.err(number, m))?
            };
            entries.push((key, value));
        }
        Ok(Doc::Map(entries))
    }

    fn list(&mut self, indent: usize) -> Result<Doc> {
        let mut items = Vec::new();
        while let Some(line) = self.lines.get(self.pos) {
            if line.indent < indent {
                break;
            }
            let number = line.number;
            if line.indent > indent || !line.is_list_item() {
                return Err(self.err(number, "expected a list item"));
            }
            let rest = line.content[1..].trim_start().to_string();
            if rest.is_empty() {
                self.pos += 1;
                items.push(self.nested(indent, number)?);
            } else if split_key(&rest).is_some() {
                // `- key: value` opens a map whose keys sit two columns in.
                let line = &mut self.lines[self.pos];
                line.indent = indent + 2;
                line.content = rest;
                items.push(self.map(indent + 2)?);
            } else {
                self.pos += 1;
                items.push(inline_value(&rest).map_err(|m| self.err(number, m))?);
            }
        }
        Ok(Doc::List(items))
    }
}

/// Split `key: rest` / `key:`; `None` when the line is a plain scalar.
fn split_key(content: &str) -> Option<(String, String)> {
    if content.starts_with('"') {
        return None;
    }
    let (key, rest) = match content.find(": ") {
        Some(at) => (&content[..at], content[at + 2..].trim()),
        None => (content.strip_suffix(':')?, ""),
    };
    if key.is_empty() || key.contains(':') {
        return None;
    }
    Some((key.to_string(), rest.to_string()))
}

fn inline_value(text: &str) -> std::result::Result<Doc, String> {
    match text {
        "{}" => Ok(Doc::Map(Vec::new())),
        "[]" => Ok(Doc::List(Vec::new())),
        _ if text.starts_with('"') => unquote(text).map(Doc::Scalar),
        _ => Ok(Doc::Scalar(text.to_string())),
    }
}

fn unquote(text: &str) -> std::result::Result<String, String> {
    let mut out = String::new();
    let mut chars = text[1..].chars();
    loop {
        match chars.next() {
            None => return Err("unterminated quoted string".into()),
            Some('"') => break,
            Some('\\') => match chars.next() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some('t') => out.push('\t'),
                other => return Err(format!("unknown escape {other:?}")),
            },
            Some(c) => out.push(c),
        }
    }
    if !chars.as_str().trim().is_empty() {
        return Err("trailing characters after quoted string".into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Doc> {
        Doc::parse(text, Path::new("test.yaml"))
    }

    #[test]
    fn parses_nested_structure() {
        let text = "\
instance: 1
# comment
building:
  type: end of terrace
  year: 1905
appliances:
  - name: fridge
    meters:
      - 2
    room: kitchen
  - name: kettle
    meters: []
empty: {}
";
        let doc = parse(text).unwrap();
        assert_eq!(doc.get("instance").unwrap().as_str(), Some("1"));
        assert_eq!(
            doc.get("building").unwrap().get("type").unwrap().as_str(),
            Some("end of terrace")
        );
        let apps = doc.get("appliances").unwrap().as_list().unwrap();
        assert_eq!(apps.len(), 2);
        assert_eq!(apps[0].get("meters").unwrap().as_list().unwrap()[0].as_str(), Some("2"));
        assert_eq!(apps[1].get("meters").unwrap().as_list().unwrap().len(), 0);
        assert_eq!(doc.get("empty").unwrap().as_map().unwrap().len(), 0);
        assert_eq!(parse(&doc.to_text()).unwrap(), doc);
    }

    #[test]
    fn quoting_round_trips() {
        let doc = Doc::map()
            .scalar("a", "x: y")
            .scalar("b", "")
            .scalar("c", "- dash")
            .scalar("d", "quote \" and \\ and\nnewline")
            .build();
        let text = doc.to_text();
        assert_eq!(parse(&text).unwrap(), doc);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse("a: 1\n    b: 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("a: 1\na: 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("a:\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        assert!(parse("a: \"open\n").is_err());
    }

    fn key() -> impl Strategy<Value = String> {
        "[a-z_][a-z0-9_]{0,8}"
    }

    fn arb_doc() -> impl Strategy<Value = Doc> {
        let leaf = "\\PC{0,12}".prop_map(Doc::Scalar);
        leaf.prop_recursive(4, 32, 5, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..5).prop_map(Doc::List),
                prop::collection::btree_map(key(), inner, 0..5)
                    .prop_map(|m| Doc::Map(m.into_iter().collect())),
            ]
        })
    }

    proptest! {
        #[test]
        fn emit_then_parse_is_identity(doc in arb_doc()) {
            let doc = match doc {
                Doc::Scalar(_) => Doc::Map(vec![("k".into(), doc)]),
                d => d,
            };
            let text = doc.to_text();
            let back = parse(&text).unwrap();
            prop_assert_eq!(back, doc, "text was:\n{}", text);
        }
    }
}
