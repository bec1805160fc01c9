//! Header field definitions, loaded from a sidecar file.
//!
//! One definition per line: `<header>.<field> <width_bits>`. Blank lines
//! and `#` comments are ignored. Widths are limited to 1..=32 because
//! every runtime value, window slot, and generated register is 32 bits.

use std::collections::BTreeMap;

pub const MAX_FIELD_WIDTH: u8 = 32;

/// Known header fields and their bit widths, keyed by `header.field`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HeaderSet {
    fields: BTreeMap<String, u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HeaderError {
    #[error("line {line}: expected `header.field <width>`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: width {width} out of range 1..={max} for `{name}`", max = MAX_FIELD_WIDTH)]
    BadWidth { line: usize, name: String, width: u64 },
    #[error("line {line}: duplicate definition of `{name}`")]
    Duplicate { line: usize, name: String },
}

impl HeaderSet {
    pub fn width_of(&self, dotted: &str) -> Option<u8> {
        self.fields.get(dotted).copied()
    }

    pub fn contains(&self, dotted: &str) -> bool {
        self.fields.contains_key(dotted)
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Definitions in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u8)> {
        self.fields.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn insert(&mut self, dotted: impl Into<String>, width: u8) {
        self.fields.insert(dotted.into(), width);
    }
}

fn valid_segment(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn valid_dotted(s: &str) -> bool {
    let mut parts = s.split('.');
    matches!(
        (parts.next(), parts.next(), parts.next()),
        (Some(h), Some(f), None) if valid_segment(h) && valid_segment(f)
    )
}

/// Parse a sidecar file. Line numbers in errors are 1-based.
pub fn parse_headers(src: &str) -> Result<HeaderSet, HeaderError> {
    let mut set = HeaderSet::default();
    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        let text = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        let mut parts = text.split_whitespace();
        let (name, width_text) = match (parts.next(), parts.next(), parts.next()) {
            (Some(n), Some(w), None) => (n, w),
            _ => {
                return Err(HeaderError::Malformed { line, text: text.to_string() })
            }
        };
        if !valid_dotted(name) {
            return Err(HeaderError::Malformed { line, text: text.to_string() });
        }
        let width: u64 = width_text
            .parse()
            .map_err(|_| HeaderError::Malformed { line, text: text.to_string() })?;
        if width == 0 || width > MAX_FIELD_WIDTH as u64 {
            return Err(HeaderError::BadWidth { line, name: name.to_string(), width });
        }
        if set.contains(name) {
            return Err(HeaderError::Duplicate { line, name: name.to_string() });
        }
        set.insert(name, width as u8);
    }
    Ok(set)
}
