//! Rendering of plans into prompt text and parsing of the structured replies.

use chainworld_core::{normalize_proposition, ActionStep};

use crate::error::{Error, Result};

/// `1. a\n2. b`
pub fn numbered<'a>(items: impl IntoIterator<Item = &'a str>) -> String {
    items
        .into_iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Action texts of the steps as a numbered list.
pub fn render_actions(steps: &[ActionStep]) -> String {
    numbered(steps.iter().map(|s| s.action_text.as_str()))
}

/// One annotated block per `(number, step)`.
pub fn render_blocks<'a>(steps: impl IntoIterator<Item = (usize, &'a ActionStep)>) -> String {
    let mut out = String::new();
    for (n, step) in steps {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&format!("Step {n}: {}\nPreconditions:\n", step.action_text));
        for p in &step.preconditions {
            out.push_str(&format!("- {p}\n"));
        }
        out.push_str("Effects:\n");
        for e in &step.effects {
            out.push_str(&format!("- {e}\n"));
        }
    }
    out
}

/// Every step of a plan as numbered blocks.
pub fn render_plan_blocks(steps: &[ActionStep]) -> String {
    render_blocks(steps.iter().enumerate().map(|(i, s)| (i + 1, s)))
}

/// A parsed `Step N: ...` block. A missing list stays `None`, an empty one
/// is `Some(vec![])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub number: usize,
    pub action_text: String,
    pub preconditions: Option<Vec<String>>,
    pub effects: Option<Vec<String>>,
}

impl Block {
    /// Both lists present and non-empty.
    pub fn is_complete(&self) -> bool {
        self.preconditions.as_ref().is_some_and(|p| !p.is_empty())
            && self.effects.as_ref().is_some_and(|e| !e.is_empty())
    }
}

/// True for replies that mean "nothing", such as a blank reply or `none`.
pub fn is_none_reply(raw: &str) -> bool {
    let t = raw.trim().trim_end_matches('.').to_ascii_lowercase();
    t.is_empty() || t == "none" || t == "n/a"
}

fn strip_bullet(line: &str) -> &str {
    for marker in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(marker) {
            return rest.trim();
        }
    }
    chainworld_core::proposition::strip_list_marker(line).trim()
}

fn header(line: &str) -> Option<(usize, &str)> {
    let rest = line
        .strip_prefix("Step ")
        .or_else(|| line.strip_prefix("step "))
        .or_else(|| line.strip_prefix("STEP "))?;
    let (num, text) = rest.split_once(':')?;
    let number = num.trim().parse().ok()?;
    Some((number, text.trim()))
}

enum Section {
    None,
    Pre,
    Eff,
}

/// Parses `Step N:` blocks. Lines outside any block must be blank.
pub fn parse_blocks(raw: &str) -> Result<Vec<Block>> {
    let mut blocks: Vec<Block> = Vec::new();
    let mut section = Section::None;
    for (lineno, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some((number, text)) = header(line) {
            blocks.push(Block {
                number,
                action_text: text.into(),
                preconditions: None,
                effects: None,
            });
            section = Section::None;
            continue;
        }
        let Some(block) = blocks.last_mut() else {
            return Err(Error::UnparseableEdit(format!(
                "line {}: text before the first step: {line:?}",
                lineno + 1
            )));
        };
        let lower = line.to_ascii_lowercase();
        let (list, rest) = if let Some(rest) = lower.strip_prefix("preconditions:") {
            section = Section::Pre;
            (&mut block.preconditions, &line[line.len() - rest.len()..])
        } else if let Some(rest) = lower.strip_prefix("effects:") {
            section = Section::Eff;
            (&mut block.effects, &line[line.len() - rest.len()..])
        } else {
            let list = match section {
                Section::Pre => &mut block.preconditions,
                Section::Eff => &mut block.effects,
                Section::None => {
                    return Err(Error::UnparseableEdit(format!(
                        "line {}: item outside a precondition or effect list: {line:?}",
                        lineno + 1
                    )))
                }
            };
            list.get_or_insert_with(Vec::new)
                .push(strip_bullet(line).into());
            continue;
        };
        let items = list.get_or_insert_with(Vec::new);
        let rest = rest.trim();
        if !rest.is_empty() && !is_none_reply(rest) {
            items.push(strip_bullet(rest).into());
        }
    }
    Ok(blocks)
}

/// Normalized form of an action text, used to align replies with steps.
pub fn action_key(text: &str) -> Option<String> {
    normalize_proposition(text).ok().map(|p| p.into_string())
}

/// Parses `(1) text` / `(2) text` lines.
pub fn parse_categories(raw: &str) -> Result<Vec<(u8, String)>> {
    let mut out = Vec::new();
    for line in raw.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let parsed = line
            .strip_prefix("(1)")
            .map(|t| (1, t))
            .or_else(|| line.strip_prefix("(2)").map(|t| (2, t)));
        match parsed {
            Some((cat, text)) if !text.trim().is_empty() => {
                out.push((cat, text.trim().to_string()))
            }
            _ => {
                return Err(Error::UnparseableEdit(format!(
                    "bad categorization line {line:?}"
                )))
            }
        }
    }
    Ok(out)
}
