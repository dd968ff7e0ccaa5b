//! Plan-level chaining statistics and the corpus filter built on them.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::matcher::{CoverageTask, Matcher};
use crate::{ActionPlan, Error, Proposition, Result, Stage};

/// How the two uncovered fractions combine into one filter score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreRule {
    #[default]
    Mean,
    Max,
}

impl ScoreRule {
    pub fn combine(self, pre: f64, eff: f64) -> f64 {
        match self {
            ScoreRule::Mean => (pre + eff) / 2.0,
            ScoreRule::Max => pre.max(eff),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainingReport {
    pub plan_id: String,
    pub uncovered_preconditions: Vec<Proposition>,
    pub uncovered_effects: Vec<Proposition>,
    pub pct_uncovered_pre: f64,
    pub pct_uncovered_eff: f64,
    pub score: f64,
}

fn fraction(uncovered: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        uncovered as f64 / total as f64
    }
}

fn pick(items: &[Proposition], indices: Vec<usize>) -> Result<Vec<Proposition>> {
    let mut indices = indices;
    indices.sort_unstable();
    indices.dedup();
    indices
        .into_iter()
        .map(|i| {
            items.get(i).cloned().ok_or_else(|| {
                Error::MalformedJudgment(alloc::format!("item index {i} out of range"))
            })
        })
        .collect()
}

/// Which pooled preconditions no effect of the plan covers, and which pooled
/// effects no precondition covers. Pools count every occurrence.
pub fn chaining_report<M: Matcher + ?Sized>(
    plan: &ActionPlan,
    matcher: &M,
    rule: ScoreRule,
) -> Result<ChainingReport> {
    let pre = plan.pooled_preconditions();
    let eff = plan.pooled_effects();
    let uncovered_pre = if pre.is_empty() || eff.is_empty() {
        (0..pre.len()).collect()
    } else {
        matcher.uncovered(CoverageTask::PreconditionsInEffects, &pre, &eff)?
    };
    let uncovered_eff = if pre.is_empty() || eff.is_empty() {
        (0..eff.len()).collect()
    } else {
        matcher.uncovered(CoverageTask::EffectsInPreconditions, &eff, &pre)?
    };
    let uncovered_preconditions = pick(&pre, uncovered_pre)?;
    let uncovered_effects = pick(&eff, uncovered_eff)?;
    let pct_uncovered_pre = fraction(uncovered_preconditions.len(), pre.len());
    let pct_uncovered_eff = fraction(uncovered_effects.len(), eff.len());
    Ok(ChainingReport {
        plan_id: plan.id.clone(),
        uncovered_preconditions,
        uncovered_effects,
        pct_uncovered_pre,
        pct_uncovered_eff,
        score: rule.combine(pct_uncovered_pre, pct_uncovered_eff),
    })
}

/// `ceil(fraction * n)`, tolerant of the float error in products such as
/// `0.05 * 40`.
pub fn discard_count(fraction: f64, n: usize) -> usize {
    let exact = fraction * n as f64;
    let count = libm::ceil(exact - 1e-9);
    if count <= 0.0 {
        0
    } else {
        (count as usize).min(n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filtered {
    pub kept: Vec<ActionPlan>,
    pub discarded: Vec<ActionPlan>,
}

/// Drops the `ceil(fraction * N)` worst-chained plans.
///
/// Plans are ranked by score, highest first; among equal scores the larger
/// plan id goes first. Kept plans keep corpus order and gain
/// [`Stage::Filtered`]; discarded plans are returned in rank order with
/// `filtered_out` set.
pub fn filter_corpus(
    corpus: Vec<ActionPlan>,
    reports: &[ChainingReport],
    fraction: f64,
) -> Result<Filtered> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(alloc::format!(
            "filter fraction {fraction} outside [0, 1)"
        )));
    }
    if reports.len() != corpus.len() {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} reports for {} plans",
            reports.len(),
            corpus.len()
        )));
    }
    let mut scores = Vec::with_capacity(corpus.len());
    for plan in &corpus {
        let report = reports
            .iter()
            .find(|r| r.plan_id == plan.id)
            .ok_or_else(|| {
                Error::InvalidArgument(alloc::format!("no report for plan {}", plan.id))
            })?;
        if report.score.is_nan() {
            return Err(Error::InvalidArgument(alloc::format!(
                "NaN score for plan {}",
                plan.id
            )));
        }
        scores.push(report.score);
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| corpus[b].id.cmp(&corpus[a].id))
    });
    let n_discard = discard_count(fraction, corpus.len());
    let mut discard_flags = alloc::vec![false; corpus.len()];
    for &i in &order[..n_discard] {
        discard_flags[i] = true;
    }
    let mut slots: Vec<Option<ActionPlan>> = corpus.into_iter().map(Some).collect();
    let discarded = order[..n_discard]
        .iter()
        .map(|&i| {
            let mut plan = slots[i].take().expect("each index once");
            plan.provenance.filtered_out = true;
            plan
        })
        .collect();
    let kept = slots
        .into_iter()
        .flatten()
        .map(|mut plan| {
            plan.provenance.push(Stage::Filtered);
            plan
        })
        .collect();
    Ok(Filtered { kept, discarded })
}
