//! Prompt templates with `$slot` placeholders, and parsing of enumerated
//! list responses.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::proposition::strip_list_marker;
use crate::{Error, Result};

/// A prompt body with `$name` slots. `$$` renders a literal `$`.
///
/// Slot names are ASCII alphanumerics and underscores; a `.` is part of the
/// name only when followed by another name character, so `$model_output_4.1`
/// is one slot while `for $task.` ends the slot before the period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    name: String,
    body: String,
    required_slots: Vec<String>,
}

#[derive(Debug, PartialEq, Eq)]
enum Piece<'a> {
    Text(&'a str),
    Dollar,
    Slot(&'a str),
}

fn is_name_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn pieces(body: &str) -> Vec<Piece<'_>> {
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'$' {
            i += 1;
            continue;
        }
        if start < i {
            out.push(Piece::Text(&body[start..i]));
        }
        if bytes.get(i + 1) == Some(&b'$') {
            out.push(Piece::Dollar);
            i += 2;
            start = i;
            continue;
        }
        let name_start = i + 1;
        let mut end = name_start;
        while end < bytes.len() {
            let dotted = bytes[end] == b'.'
                && end > name_start
                && bytes.get(end + 1).copied().is_some_and(is_name_char);
            if is_name_char(bytes[end]) || dotted {
                end += 1;
            } else {
                break;
            }
        }
        if end == name_start {
            // lone `$`, e.g. "$ 5"
            out.push(Piece::Text(&body[i..i + 1]));
        } else {
            out.push(Piece::Slot(&body[name_start..end]));
        }
        i = end;
        start = end;
    }
    if start < bytes.len() {
        out.push(Piece::Text(&body[start..]));
    }
    out
}

impl PromptTemplate {
    /// Builds a template whose required slots are exactly the slots in the
    /// body.
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        let body = body.into();
        let mut seen = BTreeSet::new();
        let required_slots = pieces(&body)
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(s) if seen.insert(s) => Some(String::from(s)),
                _ => None,
            })
            .collect();
        Self {
            name: name.into(),
            body,
            required_slots,
        }
    }

    /// Builds a template with an explicit slot list, checking it against the
    /// body.
    pub fn with_slots(
        name: impl Into<String>,
        body: impl Into<String>,
        required_slots: Vec<String>,
    ) -> Result<Self> {
        let derived = Self::new(name, body);
        let want: BTreeSet<&str> = required_slots.iter().map(String::as_str).collect();
        let have: BTreeSet<&str> = derived.required_slots.iter().map(String::as_str).collect();
        if want != have {
            let missing: Vec<_> = have.difference(&want).copied().collect();
            let extra: Vec<_> = want.difference(&have).copied().collect();
            return Err(Error::InvalidTemplate {
                template: derived.name,
                reason: alloc::format!("undeclared slots {missing:?}, unused slots {extra:?}"),
            });
        }
        Ok(Self {
            required_slots,
            ..derived
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn required_slots(&self) -> &[String] {
        &self.required_slots
    }
}

/// Substitutes every slot. Bindings not named by the template are ignored.
pub fn render_template(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
) -> Result<String> {
    if let Some(slot) = template
        .required_slots
        .iter()
        .find(|s| !bindings.contains_key(s.as_str()))
    {
        return Err(Error::MissingSlot {
            template: template.name.clone(),
            slot: slot.clone(),
        });
    }
    let mut out = String::with_capacity(template.body.len());
    for piece in pieces(&template.body) {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Dollar => out.push('$'),
            Piece::Slot(s) => out.push_str(&bindings[s]),
        }
    }
    Ok(out)
}

/// Splits an enumerated list response into items.
///
/// Numbering (`1.`, `1)`), bullets (`-`, `*`, `•`) and surrounding whitespace
/// are stripped and blank lines dropped; order is kept.
pub fn parse_item_list(raw: &str) -> Result<Vec<String>> {
    let items: Vec<String> = raw
        .lines()
        .map(|line| strip_list_marker(line.trim()).trim())
        .filter(|line| !line.is_empty())
        .map(String::from)
        .collect();
    if items.is_empty() {
        return Err(Error::EmptyList);
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (String::from(*k), String::from(*v)))
            .collect()
    }

    #[test]
    fn renders_slot() {
        let t = PromptTemplate::new("plan", "Plan for $task");
        assert_eq!(
            render_template(&t, &bind(&[("task", "soup")])).unwrap(),
            "Plan for soup"
        );
    }

    #[test]
    fn missing_slot() {
        let t = PromptTemplate::new("two", "$a and $b");
        assert_eq!(
            render_template(&t, &bind(&[("a", "x")])),
            Err(Error::MissingSlot {
                template: "two".into(),
                slot: "b".into()
            })
        );
    }

    #[test]
    fn no_slots_is_identity() {
        let t = PromptTemplate::new("plain", "Nothing to fill.");
        assert_eq!(
            render_template(&t, &BTreeMap::new()).unwrap(),
            "Nothing to fill."
        );
    }

    #[test]
    fn dotted_names_and_escapes() {
        let t = PromptTemplate::new("x", "$model_output_step_4.1 for $task. Costs $$5 or $ 6");
        assert_eq!(t.required_slots(), ["model_output_step_4.1", "task"]);
        let out = render_template(
            &t,
            &bind(&[("model_output_step_4.1", "A"), ("task", "B $c")]),
        )
        .unwrap();
        assert_eq!(out, "A for B $c. Costs $5 or $ 6");
    }

    #[test]
    fn explicit_slots_checked() {
        assert!(PromptTemplate::with_slots("t", "$a", vec!["a".into()]).is_ok());
        assert!(PromptTemplate::with_slots("t", "$a", vec!["a".into(), "b".into()]).is_err());
        assert!(PromptTemplate::with_slots("t", "$a $b", vec!["a".into()]).is_err());
    }

    #[test]
    fn parses_lists() {
        assert_eq!(
            parse_item_list("1. Boil water\n2. Add pasta").unwrap(),
            ["Boil water", "Add pasta"]
        );
        assert_eq!(parse_item_list("- a\n\n- b").unwrap(), ["a", "b"]);
        assert_eq!(parse_item_list("  3) c \n* d").unwrap(), ["c", "d"]);
        assert_eq!(parse_item_list("   "), Err(Error::EmptyList));
    }
}
