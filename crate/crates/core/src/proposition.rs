use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One normalized natural-language condition: a precondition, an effect or a
/// world-state item.
///
/// The wrapped text is always the output of [`normalize_proposition`], so two
/// propositions are equal exactly when their normalized texts are equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Proposition(String);

impl Proposition {
    pub fn new(raw: &str) -> Result<Self> {
        normalize_proposition(raw)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Proposition {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Proposition {
    type Error = Error;

    fn try_from(raw: String) -> Result<Self> {
        normalize_proposition(&raw)
    }
}

impl TryFrom<&str> for Proposition {
    type Error = Error;

    fn try_from(raw: &str) -> Result<Self> {
        normalize_proposition(raw)
    }
}

impl From<Proposition> for String {
    fn from(p: Proposition) -> String {
        p.0
    }
}

/// Lowercase, collapse whitespace, drop list markers and terminal periods.
///
/// Applied until a fixed point, so the result is idempotent even for inputs
/// like `"1. - foo."` where removing one marker exposes another.
pub fn normalize_proposition(raw: &str) -> Result<Proposition> {
    let mut current = normalize_once(raw);
    loop {
        let next = normalize_once(&current);
        if next == current {
            break;
        }
        current = next;
    }
    if current.is_empty() {
        return Err(Error::EmptyProposition);
    }
    Ok(Proposition(current))
}

fn normalize_once(raw: &str) -> String {
    let mut collapsed = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !collapsed.is_empty() {
            collapsed.push(' ');
        }
        collapsed.push_str(word);
    }
    let stripped = strip_list_marker(&collapsed);
    let trimmed = stripped.trim_end_matches('.').trim_end();
    trimmed.to_lowercase()
}

/// Removes one leading `1.`, `1)`, `-`, `*` or `•` marker when it is followed
/// by whitespace (or is the whole text). `3.5 cups` is left alone.
pub fn strip_list_marker(text: &str) -> &str {
    let text = text.trim_start();
    let rest = if let Some(rest) = text
        .strip_prefix('-')
        .or_else(|| text.strip_prefix('*'))
        .or_else(|| text.strip_prefix('•'))
    {
        rest
    } else {
        let digits = text.bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            return text;
        }
        match text[digits..].chars().next() {
            Some('.') | Some(')') => &text[digits + 1..],
            _ => return text,
        }
    };
    match rest.chars().next() {
        None => rest,
        Some(c) if c.is_whitespace() => rest.trim_start(),
        Some(_) => text,
    }
}
