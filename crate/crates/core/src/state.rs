use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Proposition, Result};

/// An ordered, duplicate-free set of propositions.
///
/// Equality of items is normalized string equality. Insertion order is kept
/// so that serialized states and diffs are stable across runs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<Proposition>", into = "Vec<Proposition>")]
pub struct WorldState {
    items: Vec<Proposition>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a state from items, keeping the first occurrence of duplicates.
    pub fn from_items<I>(items: I) -> Self
    where
        I: IntoIterator<Item = Proposition>,
    {
        let mut state = Self::new();
        for item in items {
            state.insert(item);
        }
        state
    }

    /// Returns false if the item was already present.
    pub fn insert(&mut self, item: Proposition) -> bool {
        if self.contains(&item) {
            return false;
        }
        self.items.push(item);
        true
    }

    pub fn contains(&self, item: &Proposition) -> bool {
        self.items.iter().any(|x| x == item)
    }

    pub fn items(&self) -> &[Proposition] {
        &self.items
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Proposition> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Set inclusion, ignoring order.
    pub fn is_subset(&self, other: &WorldState) -> bool {
        self.items.iter().all(|x| other.contains(x))
    }

    /// Set equality, ignoring order.
    pub fn same_items(&self, other: &WorldState) -> bool {
        self.len() == other.len() && self.is_subset(other)
    }
}

impl From<Vec<Proposition>> for WorldState {
    fn from(items: Vec<Proposition>) -> Self {
        Self::from_items(items)
    }
}

impl From<WorldState> for Vec<Proposition> {
    fn from(state: WorldState) -> Self {
        state.items
    }
}

impl FromIterator<Proposition> for WorldState {
    fn from_iter<T: IntoIterator<Item = Proposition>>(iter: T) -> Self {
        Self::from_items(iter)
    }
}

impl<'a> IntoIterator for &'a WorldState {
    type Item = &'a Proposition;
    type IntoIter = core::slice::Iter<'a, Proposition>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

/// Additions and deletions applied in one transition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDelta", into = "RawDelta")]
pub struct StateDelta {
    additions: Vec<Proposition>,
    deletions: Vec<Proposition>,
}

#[derive(Serialize, Deserialize)]
struct RawDelta {
    additions: Vec<Proposition>,
    deletions: Vec<Proposition>,
}

impl TryFrom<RawDelta> for StateDelta {
    type Error = Error;

    fn try_from(raw: RawDelta) -> Result<Self> {
        StateDelta::new(raw.additions, raw.deletions)
    }
}

impl From<StateDelta> for RawDelta {
    fn from(delta: StateDelta) -> Self {
        RawDelta {
            additions: delta.additions,
            deletions: delta.deletions,
        }
    }
}

impl StateDelta {
    /// Duplicates within each list are dropped; an item on both lists is an
    /// error.
    pub fn new(additions: Vec<Proposition>, deletions: Vec<Proposition>) -> Result<Self> {
        let additions = dedup(additions);
        let deletions = dedup(deletions);
        if let Some(clash) = deletions.iter().find(|d| additions.contains(d)) {
            return Err(Error::OverlappingDelta(clash.as_str().into()));
        }
        Ok(Self {
            additions,
            deletions,
        })
    }

    pub fn additions(&self) -> &[Proposition] {
        &self.additions
    }

    pub fn deletions(&self) -> &[Proposition] {
        &self.deletions
    }

    pub fn is_empty(&self) -> bool {
        self.additions.is_empty() && self.deletions.is_empty()
    }
}

fn dedup(items: Vec<Proposition>) -> Vec<Proposition> {
    let mut seen = BTreeSet::new();
    items
        .into_iter()
        .filter(|p| seen.insert(p.clone()))
        .collect()
}

/// Non-fatal conditions noticed while transforming states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "item", rename_all = "snake_case")]
pub enum Warning {
    /// A deletion named an item the state did not hold.
    MissingDeletion(Proposition),
    /// Every precondition of the plan is produced by some effect, so the
    /// derived initial state is empty.
    EmptyInitialState(String),
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::MissingDeletion(p) => write!(f, "{p} not present"),
            Warning::EmptyInitialState(plan) => {
                write!(f, "plan {plan}: every precondition is covered by an effect")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub state: WorldState,
    pub warnings: Vec<Warning>,
}

/// `(state \ deletions) ∪ additions`: surviving items keep their order and new
/// additions follow in the order given.
pub fn apply_delta(state: &WorldState, delta: &StateDelta) -> Applied {
    let warnings = delta
        .deletions
        .iter()
        .filter(|d| !state.contains(d))
        .cloned()
        .map(Warning::MissingDeletion)
        .collect();
    let mut next: WorldState = state
        .iter()
        .filter(|item| !delta.deletions.contains(item))
        .cloned()
        .collect();
    for item in &delta.additions {
        next.insert(item.clone());
    }
    Applied {
        state: next,
        warnings,
    }
}

pub fn diff_states(old: &WorldState, new: &WorldState) -> StateDelta {
    let additions = new.iter().filter(|p| !old.contains(p)).cloned().collect();
    let deletions = old.iter().filter(|p| !new.contains(p)).cloned().collect();
    StateDelta {
        additions,
        deletions,
    }
}
