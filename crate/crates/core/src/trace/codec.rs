//! Reversible backslash escaping for free-text TSV fields.
//!
//! Tabs, newlines, carriage returns and backslashes are the only characters
//! that could break a row, so they are the only characters touched.

use std::borrow::Cow;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("dangling backslash at end of field")]
    DanglingBackslash,
    #[error("invalid escape sequence `\\{0}`")]
    InvalidEscape(char),
}

pub fn escape_field(text: &str) -> Cow<'_, str> {
    if !text.contains(['\t', '\n', '\r', '\\']) {
        return Cow::Borrowed(text);
    }
    let mut out = String::with_capacity(text.len() + 8);
    for ch in text.chars() {
        match ch {
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\\' => out.push_str("\\\\"),
            other => out.push(other),
        }
    }
    Cow::Owned(out)
}

pub fn unescape_field(text: &str) -> Result<Cow<'_, str>, CodecError> {
    if !text.contains('\\') {
        return Ok(Cow::Borrowed(text));
    }
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => return Err(CodecError::InvalidEscape(other)),
            None => return Err(CodecError::DanglingBackslash),
        }
    }
    Ok(Cow::Owned(out))
}
