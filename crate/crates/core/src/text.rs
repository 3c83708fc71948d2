//! Field escaping for the tab-separated formats and small token helpers.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EscapeError {
    #[error("dangling backslash at end of field")]
    DanglingBackslash,
    #[error("unknown escape sequence \\{0}")]
    UnknownEscape(char),
}

/// Escapes backslash, tab, newline and carriage return.
pub fn escape_field(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_field(escaped: &str) -> Result<String, EscapeError> {
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(EscapeError::UnknownEscape(other)),
            None => return Err(EscapeError::DanglingBackslash),
        }
    }
    Ok(out)
}

/// Punctuation marks detached by the punctuation-splitting tokenizer.
pub const PUNCTUATION: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\''];

pub fn is_punct(c: char) -> bool {
    PUNCTUATION.contains(&c)
}

/// Splits a whitespace token into `(leading punctuation, core, trailing punctuation)`.
///
/// A token made only of punctuation has an empty core and everything in the prefix.
pub fn split_affixes(token: &str) -> (&str, &str, &str) {
    let start = token
        .char_indices()
        .find(|(_, c)| !is_punct(*c))
        .map(|(i, _)| i)
        .unwrap_or(token.len());
    let end = token
        .char_indices()
        .rev()
        .find(|(_, c)| !is_punct(*c))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(start)
        .max(start);
    (&token[..start], &token[start..end], &token[end..])
}

/// Whitespace tokens, the unit of word-order and agreement perturbations.
pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

pub fn join_words<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_ref());
    }
    out
}
