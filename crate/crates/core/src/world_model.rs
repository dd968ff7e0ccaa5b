//! Valid action prediction, state transition prediction, and refactoring of
//! annotated plans into ground-truth state traces.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::inference::{infer, Direction, InferenceBackend, InferenceQuery};
use crate::matcher::{CoverageTask, Matcher};
use crate::plan::dedup;
use crate::{apply_delta, ActionPlan, Error, Proposition, Result, StateDelta, Warning, WorldState};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityVerdict {
    pub valid: bool,
    /// The preconditions that were checked, in order.
    pub preconditions: Vec<Proposition>,
    /// (precondition, state item) for every match found.
    pub matched: Vec<(Proposition, Proposition)>,
    pub unmatched: Vec<Proposition>,
}

/// Matches each precondition against all state items. No preconditions means
/// valid.
pub fn check_preconditions<M: Matcher + ?Sized>(
    matcher: &M,
    preconditions: &[Proposition],
    state: &WorldState,
) -> Result<ValidityVerdict> {
    let mut verdict = ValidityVerdict {
        valid: true,
        preconditions: preconditions.to_vec(),
        matched: Vec::new(),
        unmatched: Vec::new(),
    };
    if preconditions.is_empty() {
        return Ok(verdict);
    }
    let items = state.items();
    let matches = matcher.matches(CoverageTask::PreconditionsInState, preconditions, items)?;
    if matches.len() != preconditions.len() {
        return Err(Error::MalformedJudgment(alloc::format!(
            "{} coverage rows for {} preconditions",
            matches.len(),
            preconditions.len()
        )));
    }
    for (pre, hits) in preconditions.iter().zip(&matches) {
        if hits.is_empty() {
            verdict.unmatched.push(pre.clone());
        }
        for &j in hits {
            let item = items.get(j).ok_or_else(|| {
                Error::MalformedJudgment(alloc::format!("state item index {j} out of range"))
            })?;
            verdict.matched.push((pre.clone(), item.clone()));
        }
    }
    verdict.valid = verdict.unmatched.is_empty();
    Ok(verdict)
}

/// Every (state item, effect item) pair the matcher judges contradictory.
pub fn find_contradictions<M: Matcher + ?Sized>(
    matcher: &M,
    effects: &[Proposition],
    state: &WorldState,
) -> Result<Vec<(Proposition, Proposition)>> {
    if effects.is_empty() || state.is_empty() {
        return Ok(Vec::new());
    }
    let items = state.items();
    let mut pairs = matcher.contradictions(effects, items)?;
    pairs.sort();
    pairs.dedup();
    pairs
        .into_iter()
        .map(|c| match (items.get(c.state), effects.get(c.effect)) {
            (Some(s), Some(e)) => Ok((s.clone(), e.clone())),
            _ => Err(Error::MalformedJudgment(alloc::format!(
                "contradiction index ({}, {}) out of range",
                c.state,
                c.effect
            ))),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionResult {
    pub new_state: WorldState,
    pub delta: StateDelta,
    /// (state item, effect item) pairs that caused deletions.
    pub contradictions: Vec<(Proposition, Proposition)>,
    /// The effects that were applied.
    pub effects: Vec<Proposition>,
    /// Present when the precondition check ran.
    pub validity: Option<ValidityVerdict>,
    pub warnings: Vec<Warning>,
}

/// Adds `effects` and deletes every state item contradicting one of them.
///
/// A state item that is itself one of the effects is never deleted, so the
/// delta stays disjoint.
pub fn apply_effects<M: Matcher + ?Sized>(
    matcher: &M,
    state: &WorldState,
    effects: &[Proposition],
) -> Result<TransitionResult> {
    let effects = dedup(effects.to_vec());
    let contradictions: Vec<_> = find_contradictions(matcher, &effects, state)?
        .into_iter()
        .filter(|(s, _)| !effects.contains(s))
        .collect();
    let deletions: Vec<Proposition> = state
        .iter()
        .filter(|item| contradictions.iter().any(|(s, _)| s == *item))
        .cloned()
        .collect();
    let delta = StateDelta::new(effects.clone(), deletions)?;
    let applied = apply_delta(state, &delta);
    Ok(TransitionResult {
        new_state: applied.state,
        delta,
        contradictions,
        effects,
        validity: None,
        warnings: applied.warnings,
    })
}

/// Precondition/effect inference plus a matcher.
#[derive(Debug, Clone)]
pub struct WorldModel<B, M> {
    pub inference: B,
    pub matcher: M,
}

impl<B: InferenceBackend, M: Matcher> WorldModel<B, M> {
    pub fn new(inference: B, matcher: M) -> Self {
        Self { inference, matcher }
    }

    pub fn predict_valid_action(
        &self,
        action_text: &str,
        state: &WorldState,
    ) -> Result<ValidityVerdict> {
        let pre = infer(
            &self.inference,
            Direction::Precondition,
            &InferenceQuery::action(action_text),
        )?;
        check_preconditions(&self.matcher, &pre, state)
    }

    /// Predicts the successor state. Unless `force` is set, the action must be
    /// valid in `state` first.
    pub fn predict_transition(
        &self,
        action_text: &str,
        state: &WorldState,
        force: bool,
    ) -> Result<TransitionResult> {
        let validity = if force {
            None
        } else {
            let verdict = self.predict_valid_action(action_text, state)?;
            if !verdict.valid {
                return Err(Error::InvalidAction {
                    action: action_text.to_string(),
                    unmatched: verdict.unmatched.into_iter().map(String::from).collect(),
                });
            }
            Some(verdict)
        };
        let effects = infer(
            &self.inference,
            Direction::Effect,
            &InferenceQuery::action(action_text),
        )?;
        let mut result = apply_effects(&self.matcher, state, &effects)?;
        result.validity = validity;
        Ok(result)
    }
}

/// All preconditions of the plan except those covered by some effect of the
/// plan, in step order then item order.
pub fn derive_initial_state<M: Matcher + ?Sized>(
    plan: &ActionPlan,
    matcher: &M,
) -> Result<(WorldState, Vec<Warning>)> {
    let preconditions = dedup(plan.pooled_preconditions());
    let effects = plan.pooled_effects();
    if preconditions.is_empty() {
        return Ok((WorldState::new(), Vec::new()));
    }
    let covered: Vec<bool> = if effects.is_empty() {
        alloc::vec![false; preconditions.len()]
    } else {
        let uncovered = matcher.uncovered(
            CoverageTask::PreconditionsInEffects,
            &preconditions,
            &effects,
        )?;
        let mut covered = alloc::vec![true; preconditions.len()];
        for i in uncovered {
            *covered.get_mut(i).ok_or_else(|| {
                Error::MalformedJudgment(alloc::format!("precondition index {i} out of range"))
            })? = false;
        }
        covered
    };
    let state: WorldState = preconditions
        .into_iter()
        .zip(covered)
        .filter(|(_, c)| !c)
        .map(|(p, _)| p)
        .collect();
    let warnings = if state.is_empty() {
        alloc::vec![Warning::EmptyInitialState(plan.id.clone())]
    } else {
        Vec::new()
    };
    Ok((state, warnings))
}

/// Ground-truth states of one plan: `states[k]` is the state before step `k`,
/// `deltas[k]` turns `states[k]` into `states[k + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateTrace {
    pub plan_id: String,
    pub states: Vec<WorldState>,
    pub deltas: Vec<StateDelta>,
    pub warnings: Vec<Warning>,
}

/// One line of a serialized state trace. `delta` is the change that produced
/// `state`; it is empty for the initial state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub plan_id: String,
    pub step_index: usize,
    pub state: WorldState,
    pub delta: StateDelta,
}

impl StateTrace {
    pub fn records(&self) -> Vec<TraceRecord> {
        self.states
            .iter()
            .enumerate()
            .map(|(k, state)| TraceRecord {
                plan_id: self.plan_id.clone(),
                step_index: k,
                state: state.clone(),
                delta: if k == 0 {
                    StateDelta::default()
                } else {
                    self.deltas[k - 1].clone()
                },
            })
            .collect()
    }
}

/// Replays the plan's gold effects from the derived initial state, deleting
/// whatever the matcher says each step's effects contradict.
pub fn derive_state_trace<M: Matcher + ?Sized>(
    plan: &ActionPlan,
    matcher: &M,
) -> Result<StateTrace> {
    let (initial, mut warnings) = derive_initial_state(plan, matcher)?;
    let mut states = alloc::vec![initial];
    let mut deltas = Vec::with_capacity(plan.steps.len());
    for step in &plan.steps {
        let current = states.last().expect("trace starts non-empty");
        let result = apply_effects(matcher, current, &step.effects)?;
        warnings.extend(result.warnings);
        deltas.push(result.delta);
        states.push(result.new_state);
    }
    Ok(StateTrace {
        plan_id: plan.id.clone(),
        states,
        deltas,
        warnings,
    })
}
