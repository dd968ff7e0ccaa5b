//! Precondition and effect inference behind a pluggable backend.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::plan::dedup;
use crate::prompt::parse_item_list;
use crate::{normalize_proposition, ActionPlan, Error, Proposition, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Precondition,
    Effect,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Precondition, Direction::Effect];

    /// Instruction that precedes the action text in model inputs.
    pub fn instruction(self) -> &'static str {
        match self {
            Direction::Precondition => "List the preconditions of the action:",
            Direction::Effect => "List the effects of the action:",
        }
    }

    pub fn gold(self, step: &crate::ActionStep) -> &[Proposition] {
        match self {
            Direction::Precondition => &step.preconditions,
            Direction::Effect => &step.effects,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Precondition => "precondition",
            Direction::Effect => "effect",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferenceQuery<'a> {
    pub action_text: &'a str,
    /// Task description, for backends configured to see plan context.
    pub task: Option<&'a str>,
}

impl<'a> InferenceQuery<'a> {
    pub fn action(action_text: &'a str) -> Self {
        Self {
            action_text,
            task: None,
        }
    }
}

/// Produces raw proposition texts for an action. Callers go through
/// [`infer`], which normalizes and deduplicates.
pub trait InferenceBackend {
    fn infer_raw(&self, direction: Direction, query: &InferenceQuery<'_>) -> Result<Vec<String>>;
}

impl<B: InferenceBackend + ?Sized> InferenceBackend for &B {
    fn infer_raw(&self, direction: Direction, query: &InferenceQuery<'_>) -> Result<Vec<String>> {
        (**self).infer_raw(direction, query)
    }
}

impl<B: InferenceBackend + ?Sized> InferenceBackend for Box<B> {
    fn infer_raw(&self, direction: Direction, query: &InferenceQuery<'_>) -> Result<Vec<String>> {
        (**self).infer_raw(direction, query)
    }
}

/// Normalized, duplicate-free inference output. Items that normalize to
/// nothing are dropped; an empty result is an error.
pub fn infer<B: InferenceBackend + ?Sized>(
    backend: &B,
    direction: Direction,
    query: &InferenceQuery<'_>,
) -> Result<Vec<Proposition>> {
    if query.action_text.trim().is_empty() {
        return Err(Error::InvalidArgument("action text is empty".into()));
    }
    let items = normalize_items(&backend.infer_raw(direction, query)?);
    if items.is_empty() {
        return Err(Error::InferenceEmpty(query.action_text.into()));
    }
    Ok(items)
}

/// Normalizes and deduplicates raw items, dropping ones that normalize to
/// nothing.
pub fn normalize_items(raw: &[String]) -> Vec<Proposition> {
    dedup(
        raw.iter()
            .filter_map(|r| normalize_proposition(r).ok())
            .collect(),
    )
}

pub fn infer_preconditions<B: InferenceBackend + ?Sized>(
    backend: &B,
    action_text: &str,
) -> Result<Vec<Proposition>> {
    infer(
        backend,
        Direction::Precondition,
        &InferenceQuery::action(action_text),
    )
}

pub fn infer_effects<B: InferenceBackend + ?Sized>(
    backend: &B,
    action_text: &str,
) -> Result<Vec<Proposition>> {
    infer(
        backend,
        Direction::Effect,
        &InferenceQuery::action(action_text),
    )
}

/// Parses a model's enumerated-list output into raw items.
///
/// An output with no items maps to [`Error::InferenceEmpty`].
pub fn parse_inference_output(action_text: &str, output: &str) -> Result<Vec<String>> {
    match parse_item_list(output) {
        Ok(items) => Ok(items),
        Err(Error::EmptyList) => Err(Error::InferenceEmpty(action_text.into())),
        Err(e) => Err(e),
    }
}

fn action_key(text: &str) -> String {
    normalize_proposition(text)
        .map(Proposition::into_string)
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Gold {
    preconditions: Vec<Proposition>,
    effects: Vec<Proposition>,
}

/// Answers from a reference corpus's gold annotations.
///
/// Actions are keyed by normalized action text. When the same action appears
/// in several steps the first one (corpus order) wins; later ones with a
/// different annotation are recorded as collisions.
#[derive(Debug, Clone, Default)]
pub struct CorpusLookup {
    entries: BTreeMap<String, Gold>,
    collisions: Vec<String>,
}

impl CorpusLookup {
    pub fn from_corpus(corpus: &[ActionPlan]) -> Self {
        let mut lookup = Self::default();
        for step in corpus.iter().flat_map(|p| &p.steps) {
            let gold = Gold {
                preconditions: step.preconditions.clone(),
                effects: step.effects.clone(),
            };
            let key = action_key(&step.action_text);
            match lookup.entries.get(&key) {
                Some(existing) if *existing != gold => lookup.collisions.push(key),
                Some(_) => {}
                None => {
                    lookup.entries.insert(key, gold);
                }
            }
        }
        lookup
    }

    /// Action texts whose later occurrences disagree with the stored gold.
    pub fn collisions(&self) -> &[String] {
        &self.collisions
    }

    pub fn contains(&self, action_text: &str) -> bool {
        self.entries.contains_key(&action_key(action_text))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl InferenceBackend for CorpusLookup {
    fn infer_raw(&self, direction: Direction, query: &InferenceQuery<'_>) -> Result<Vec<String>> {
        let gold = self
            .entries
            .get(&action_key(query.action_text))
            .ok_or_else(|| Error::UnknownAction(query.action_text.into()))?;
        let items = match direction {
            Direction::Precondition => &gold.preconditions,
            Direction::Effect => &gold.effects,
        };
        Ok(items.iter().map(|p| p.as_str().to_string()).collect())
    }
}

/// One supervised example for a seq2seq inference model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub input: String,
    pub target: String,
    pub direction: Direction,
}

const TASK_PREFIX: &str = "Task: ";

/// The model input for an action: an instruction line, optionally preceded by
/// the task description.
pub fn model_input(direction: Direction, action_text: &str, task: Option<&str>) -> String {
    match task {
        Some(task) => format!(
            "{TASK_PREFIX}{}\n{} {}",
            task.trim(),
            direction.instruction(),
            action_text.trim()
        ),
        None => format!("{} {}", direction.instruction(), action_text.trim()),
    }
}

/// Decoded form of a [`TrainingPair`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedPair {
    pub action_text: String,
    pub task: Option<String>,
    pub gold: Vec<Proposition>,
}

impl TrainingPair {
    pub fn new(
        direction: Direction,
        action_text: &str,
        task: Option<&str>,
        gold: &[Proposition],
    ) -> Self {
        let target = gold
            .iter()
            .map(Proposition::as_str)
            .collect::<Vec<_>>()
            .join("\n");
        Self {
            input: model_input(direction, action_text, task),
            target,
            direction,
        }
    }

    /// Recovers the action, optional task and gold list.
    pub fn decode(&self) -> Result<DecodedPair> {
        let (task, line) = match self.input.strip_prefix(TASK_PREFIX) {
            Some(rest) => match rest.split_once('\n') {
                Some((task, line)) => (Some(String::from(task)), line),
                None => return Err(Error::InvalidArgument("task line without action".into())),
            },
            None => (None, self.input.as_str()),
        };
        let action_text = line
            .strip_prefix(self.direction.instruction())
            .ok_or_else(|| Error::InvalidArgument(format!("unexpected input {:?}", self.input)))?
            .trim();
        let gold = self
            .target
            .lines()
            .map(normalize_proposition)
            .collect::<Result<Vec<_>>>()?;
        if gold.is_empty() {
            return Err(Error::AnnotationIncomplete(action_text.into()));
        }
        Ok(DecodedPair {
            action_text: action_text.into(),
            task,
            gold,
        })
    }
}

/// One pair per step, in (plan, step) order.
pub fn export_training_pairs(
    corpus: &[ActionPlan],
    direction: Direction,
    include_task: bool,
) -> Result<Vec<TrainingPair>> {
    let mut pairs = Vec::new();
    for plan in corpus {
        for step in &plan.steps {
            let gold = direction.gold(step);
            if gold.is_empty() {
                return Err(Error::AnnotationIncomplete(format!(
                    "{}/{}",
                    plan.id, step.id
                )));
            }
            let task = include_task.then_some(plan.task_description.as_str());
            pairs.push(TrainingPair::new(direction, &step.action_text, task, gold));
        }
    }
    Ok(pairs)
}
