use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Proposition, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionStep {
    pub id: String,
    pub action_text: String,
    #[serde(default)]
    pub preconditions: Vec<Proposition>,
    #[serde(default)]
    pub effects: Vec<Proposition>,
}

impl ActionStep {
    /// A step with no annotation yet.
    pub fn bare(id: impl Into<String>, action_text: impl Into<String>) -> Result<Self> {
        Self::annotated(id, action_text, Vec::new(), Vec::new())
    }

    pub fn annotated(
        id: impl Into<String>,
        action_text: impl Into<String>,
        preconditions: Vec<Proposition>,
        effects: Vec<Proposition>,
    ) -> Result<Self> {
        let action_text: String = action_text.into();
        let action_text = String::from(action_text.trim());
        if action_text.is_empty() {
            return Err(Error::EmptyAction);
        }
        Ok(Self {
            id: id.into(),
            action_text,
            preconditions: dedup(preconditions),
            effects: dedup(effects),
        })
    }

    pub fn is_annotated(&self) -> bool {
        !self.preconditions.is_empty() && !self.effects.is_empty()
    }
}

pub(crate) fn dedup(items: Vec<Proposition>) -> Vec<Proposition> {
    let mut seen = BTreeSet::new();
    items
        .into_iter()
        .filter(|p| seen.insert(p.clone()))
        .collect()
}

/// Pipeline stages a plan has been through, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Raw,
    Pruned,
    Annotated,
    Rechained,
    /// Survived the corpus-level chaining filter.
    Filtered,
}

/// One structured edit made to a plan by an LLM step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditLog {
    pub stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub added: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regenerated: Vec<String>,
}

impl EditLog {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty() && self.regenerated.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub filtered_out: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edits: Vec<EditLog>,
}

impl Provenance {
    pub fn raw() -> Self {
        Self {
            stages: alloc::vec![Stage::Raw],
            ..Self::default()
        }
    }

    pub fn has(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    pub fn push(&mut self, stage: Stage) {
        self.stages.push(stage);
    }
}

/// Ordered action steps for one task; the unit of the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPlan {
    pub id: String,
    pub task_description: String,
    pub steps: Vec<ActionStep>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl ActionPlan {
    pub fn new(
        id: impl Into<String>,
        task_description: impl Into<String>,
        steps: Vec<ActionStep>,
        provenance: Provenance,
    ) -> Result<Self> {
        let plan = Self {
            id: id.into(),
            task_description: task_description.into(),
            steps,
            provenance,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Checks the invariants that deserialization alone cannot.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for step in &self.steps {
            if !ids.insert(step.id.as_str()) {
                return Err(Error::DuplicateStepId(step.id.clone()));
            }
            if step.action_text.trim().is_empty() {
                return Err(Error::EmptyAction);
            }
        }
        Ok(())
    }

    /// Every precondition of every step, in step order.
    pub fn pooled_preconditions(&self) -> Vec<Proposition> {
        self.steps
            .iter()
            .flat_map(|s| s.preconditions.iter().cloned())
            .collect()
    }

    /// Every effect of every step, in step order.
    pub fn pooled_effects(&self) -> Vec<Proposition> {
        self.steps
            .iter()
            .flat_map(|s| s.effects.iter().cloned())
            .collect()
    }

    pub fn first_unannotated(&self) -> Option<&ActionStep> {
        self.steps.iter().find(|s| !s.is_annotated())
    }

    pub fn step(&self, id: &str) -> Option<&ActionStep> {
        self.steps.iter().find(|s| s.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_ids_rejected() {
        let steps = vec![
            ActionStep::bare("s1", "boil water").unwrap(),
            ActionStep::bare("s1", "add pasta").unwrap(),
        ];
        let err = ActionPlan::new("p", "pasta", steps, Provenance::raw()).unwrap_err();
        assert_eq!(err, Error::DuplicateStepId("s1".into()));
    }

    #[test]
    fn step_lists_dedup() {
        let x = Proposition::new("x").unwrap();
        let step =
            ActionStep::annotated("s1", " boil ", vec![x.clone(), x.clone()], vec![x.clone()])
                .unwrap();
        assert_eq!(step.action_text, "boil");
        assert_eq!(step.preconditions.len(), 1);
        assert_eq!(ActionStep::bare("s", "  "), Err(Error::EmptyAction));
    }

    #[test]
    fn jsonl_field_names() {
        let step = ActionStep::annotated(
            "s1",
            "boil water",
            vec![Proposition::new("stove is on").unwrap()],
            vec![Proposition::new("water is boiling").unwrap()],
        )
        .unwrap();
        let plan = ActionPlan::new("p1", "pasta", vec![step], Provenance::raw()).unwrap();
        let json = serde_json::to_string(&plan).unwrap();
        assert_eq!(
            json,
            r#"{"id":"p1","task_description":"pasta","steps":[{"id":"s1","action_text":"boil water","preconditions":["stove is on"],"effects":["water is boiling"]}],"provenance":{"stages":["raw"],"filtered_out":false}}"#
        );
        let back: ActionPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
    }
}
