//! Search-space analysis: can an unseen action's preconditions be produced by
//! effects available in the corpus, and in how many ways.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::inference::{infer, normalize_items, Direction, InferenceBackend, InferenceQuery};
use crate::matcher::{CoverageTask, Matcher};
use crate::{ActionPlan, Error, Proposition, Result};

/// An effect item with the step that produces it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PooledEffect {
    pub effect: Proposition,
    pub plan_id: String,
    pub step_id: String,
}

/// Infers effects for every step in the corpus. Duplicate texts from
/// different steps stay separate entries.
///
/// Steps whose inference fails are collected and reported together as
/// [`Error::PartialPool`].
pub fn build_effect_pool<B: InferenceBackend + ?Sized>(
    corpus: &[ActionPlan],
    backend: &B,
) -> Result<Vec<PooledEffect>> {
    let mut pool = Vec::new();
    let mut failed = Vec::new();
    for plan in corpus {
        for step in &plan.steps {
            match infer(
                backend,
                Direction::Effect,
                &InferenceQuery::action(&step.action_text),
            ) {
                Ok(effects) => pool.extend(effects.into_iter().map(|effect| PooledEffect {
                    effect,
                    plan_id: plan.id.clone(),
                    step_id: step.id.clone(),
                })),
                Err(_) => failed.push(format!("{}/{}", plan.id, step.id)),
            }
        }
    }
    if !failed.is_empty() {
        return Err(Error::PartialPool { failed });
    }
    Ok(pool)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatisfiabilityResult {
    pub action_text: String,
    pub preconditions: Vec<Proposition>,
    pub satisfiable: bool,
    pub per_precondition_match_counts: Vec<u64>,
    /// Product of the match counts when satisfiable, else 0. Saturates at
    /// `u64::MAX`.
    pub ways: u64,
}

/// Match counts for already-inferred preconditions.
pub fn satisfiability_of<M: Matcher + ?Sized>(
    action_text: &str,
    preconditions: Vec<Proposition>,
    pool: &[PooledEffect],
    matcher: &M,
) -> Result<SatisfiabilityResult> {
    let counts: Vec<u64> = if preconditions.is_empty() {
        Vec::new()
    } else if pool.is_empty() {
        alloc::vec![0; preconditions.len()]
    } else {
        let items: Vec<Proposition> = pool.iter().map(|p| p.effect.clone()).collect();
        let matches =
            matcher.matches(CoverageTask::PreconditionsInEffects, &preconditions, &items)?;
        if matches.len() != preconditions.len() {
            return Err(Error::MalformedJudgment(format!(
                "{} coverage rows for {} preconditions",
                matches.len(),
                preconditions.len()
            )));
        }
        matches
            .iter()
            .map(|m| m.iter().collect::<BTreeSet<_>>().len() as u64)
            .collect()
    };
    let satisfiable = counts.iter().all(|&c| c >= 1);
    let ways = if satisfiable {
        counts.iter().fold(1u64, |acc, &c| acc.saturating_mul(c))
    } else {
        0
    };
    Ok(SatisfiabilityResult {
        action_text: action_text.into(),
        preconditions,
        satisfiable,
        per_precondition_match_counts: counts,
        ways,
    })
}

/// Infers the action's preconditions and matches each against every pool
/// item.
pub fn satisfiability<M: Matcher + ?Sized, B: InferenceBackend + ?Sized>(
    action_text: &str,
    pool: &[PooledEffect],
    matcher: &M,
    backend: &B,
) -> Result<SatisfiabilityResult> {
    if action_text.trim().is_empty() {
        return Err(Error::InvalidArgument("action text is empty".into()));
    }
    // No preconditions is a legitimate answer here: the action is vacuously
    // satisfiable.
    let raw = match backend.infer_raw(
        Direction::Precondition,
        &InferenceQuery::action(action_text),
    ) {
        Err(Error::InferenceEmpty(_)) => Vec::new(),
        other => other?,
    };
    let preconditions = normalize_items(&raw);
    satisfiability_of(action_text, preconditions, pool, matcher)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub actions: usize,
    pub satisfiable: usize,
    pub pct_satisfiable: f64,
    /// Mean ways over satisfiable actions only; `None` when there are none.
    pub mean_ways_over_satisfiable: Option<f64>,
}

pub fn summarize(results: &[SatisfiabilityResult]) -> SearchSummary {
    let sat: Vec<_> = results.iter().filter(|r| r.satisfiable).collect();
    let pct = if results.is_empty() {
        0.0
    } else {
        100.0 * sat.len() as f64 / results.len() as f64
    };
    let mean = (!sat.is_empty())
        .then(|| sat.iter().map(|r| r.ways as f64).sum::<f64>() / sat.len() as f64);
    SearchSummary {
        actions: results.len(),
        satisfiable: sat.len(),
        pct_satisfiable: pct,
        mean_ways_over_satisfiable: mean,
    }
}

/// Satisfiability for each action, plus the summary.
pub fn analyze<M: Matcher + ?Sized, B: InferenceBackend + ?Sized>(
    actions: &[String],
    pool: &[PooledEffect],
    matcher: &M,
    backend: &B,
) -> Result<(Vec<SatisfiabilityResult>, SearchSummary)> {
    let results = actions
        .iter()
        .map(|a| satisfiability(a, pool, matcher, backend))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&results);
    Ok((results, summary))
}

/// Candidate actions whose text (normalized) never appears in the training
/// corpus, in input order without repeats.
pub fn unseen_actions(candidates: &[String], training: &[ActionPlan]) -> Vec<String> {
    let key = |s: &str| {
        crate::normalize_proposition(s)
            .map(Proposition::into_string)
            .ok()
    };
    let seen: BTreeSet<String> = training
        .iter()
        .flat_map(|p| &p.steps)
        .filter_map(|s| key(&s.action_text))
        .collect();
    let mut emitted = BTreeSet::new();
    candidates
        .iter()
        .filter(|c| match key(c) {
            Some(k) => !seen.contains(&k) && emitted.insert(k),
            None => false,
        })
        .cloned()
        .collect()
}
