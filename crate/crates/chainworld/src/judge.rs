//! Semantic matching and plan-level coverage judged by an LLM.

use std::collections::{BTreeMap, BTreeSet};

use chainworld_core::chaining::{ChainingReport, ScoreRule};
use chainworld_core::matcher::{Contradiction, CoverageTask, Matcher};
use chainworld_core::prompt::parse_item_list;
use chainworld_core::{normalize_proposition, ActionPlan, Error as CoreError, Proposition};

use crate::format::{is_none_reply, numbered, render_plan_blocks};
use crate::gateway::Gateway;
use crate::templates;

fn malformed(msg: String) -> CoreError {
    CoreError::MalformedJudgment(msg)
}

fn strs(items: &[Proposition]) -> impl Iterator<Item = &str> {
    items.iter().map(Proposition::as_str)
}

/// Parses `n: 1, 3` / `n: none` rows, one per query, optionally behind a
/// prefix such as `effect`. Returns zero-based pool indices per query.
fn parse_rows<'a>(
    lines: impl Iterator<Item = &'a str>,
    prefix: &str,
    queries: usize,
    pool: usize,
) -> Result<Vec<Vec<usize>>, CoreError> {
    let mut rows: Vec<Option<Vec<usize>>> = vec![None; queries];
    for line in lines {
        let mut rest = line.trim();
        if !prefix.is_empty() {
            let lower = rest.to_ascii_lowercase();
            if !lower.starts_with(prefix) {
                return Err(malformed(format!("expected {prefix:?} row, got {line:?}")));
            }
            rest = rest[prefix.len()..].trim_start();
        }
        let (num, list) = rest
            .split_once(':')
            .ok_or_else(|| malformed(format!("row without ':' in {line:?}")))?;
        let q: usize = num
            .trim()
            .parse()
            .map_err(|_| malformed(format!("bad item number in {line:?}")))?;
        let slot = q
            .checked_sub(1)
            .and_then(|i| rows.get_mut(i))
            .ok_or_else(|| malformed(format!("item {q} out of range 1..={queries}")))?;
        if slot.is_some() {
            return Err(malformed(format!("item {q} judged twice")));
        }
        let mut found = BTreeSet::new();
        if !is_none_reply(list) {
            for part in list.split(',') {
                let n: usize = part
                    .trim()
                    .trim_end_matches('.')
                    .parse()
                    .map_err(|_| malformed(format!("bad state number {part:?} in {line:?}")))?;
                if n == 0 || n > pool {
                    return Err(malformed(format!("state item {n} out of range 1..={pool}")));
                }
                found.insert(n - 1);
            }
        }
        *slot = Some(found.into_iter().collect());
    }
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| malformed(format!("no judgment for item {}", i + 1))))
        .collect()
}

/// Reads the valid-action reply: per-item coverage rows then TRUE/FALSE.
/// The verdict must agree with the rows.
pub fn parse_validity_reply(
    raw: &str,
    queries: usize,
    pool: usize,
) -> Result<Vec<Vec<usize>>, CoreError> {
    let lines: Vec<&str> = raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let (last, rows) = lines
        .split_last()
        .ok_or_else(|| malformed("empty judgment".into()))?;
    let verdict = match last.trim_end_matches('.').to_ascii_uppercase().as_str() {
        "TRUE" => true,
        "FALSE" => false,
        _ => return Err(malformed(format!("expected TRUE or FALSE, got {last:?}"))),
    };
    let rows = parse_rows(rows.iter().copied(), "", queries, pool)?;
    let covered = rows.iter().all(|r| !r.is_empty());
    if covered != verdict {
        return Err(malformed(format!(
            "verdict {verdict} disagrees with per-item coverage"
        )));
    }
    Ok(rows)
}

pub fn parse_coverage_reply(
    raw: &str,
    queries: usize,
    pool: usize,
) -> Result<Vec<Vec<usize>>, CoreError> {
    parse_rows(
        raw.lines().filter(|l| !l.trim().is_empty()),
        "",
        queries,
        pool,
    )
}

pub fn parse_contradiction_reply(
    raw: &str,
    effects: usize,
    state: usize,
) -> Result<Vec<Contradiction>, CoreError> {
    let rows = parse_rows(
        raw.lines().filter(|l| !l.trim().is_empty()),
        "effect",
        effects,
        state,
    )?;
    let mut out: Vec<Contradiction> = rows
        .iter()
        .enumerate()
        .flat_map(|(effect, states)| {
            states
                .iter()
                .map(move |&state| Contradiction { state, effect })
        })
        .collect();
    out.sort();
    Ok(out)
}

/// A [`Matcher`] that asks the gateway.
#[derive(Debug, Clone, Copy)]
pub struct LlmMatcher<'g> {
    gateway: &'g Gateway,
}

impl<'g> LlmMatcher<'g> {
    pub fn new(gateway: &'g Gateway) -> Self {
        Self { gateway }
    }

    fn ask(&self, template: &str, bindings: [(&str, String); 2]) -> Result<String, CoreError> {
        let bindings: BTreeMap<String, String> = bindings
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Ok(self
            .gateway
            .complete(templates::get(template), &bindings, None)?
            .text)
    }
}

impl Matcher for LlmMatcher<'_> {
    fn matches(
        &self,
        task: CoverageTask,
        queries: &[Proposition],
        pool: &[Proposition],
    ) -> Result<Vec<Vec<usize>>, CoreError> {
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        if pool.is_empty() {
            return Ok(vec![Vec::new(); queries.len()]);
        }
        match task {
            CoverageTask::PreconditionsInState => {
                let reply = self.ask(
                    templates::VALID_ACTION,
                    [
                        ("inferred_action_preconditions", numbered(strs(queries))),
                        ("current_world_state", numbered(strs(pool))),
                    ],
                )?;
                parse_validity_reply(&reply, queries.len(), pool.len())
            }
            CoverageTask::PreconditionsInEffects | CoverageTask::EffectsInPreconditions => {
                let reply = self.ask(
                    templates::COVERAGE,
                    [
                        ("query_items", numbered(strs(queries))),
                        ("candidate_items", numbered(strs(pool))),
                    ],
                )?;
                parse_coverage_reply(&reply, queries.len(), pool.len())
            }
        }
    }

    fn contradictions(
        &self,
        effects: &[Proposition],
        state: &[Proposition],
    ) -> Result<Vec<Contradiction>, CoreError> {
        if effects.is_empty() || state.is_empty() {
            return Ok(Vec::new());
        }
        let reply = self.ask(
            templates::CONTRADICTION,
            [
                ("inferred_action_effects", numbered(strs(effects))),
                ("current_world_state", numbered(strs(state))),
            ],
        )?;
        parse_contradiction_reply(&reply, effects.len(), state.len())
    }
}

/// Maps a list of uncovered items back onto the pool. Every occurrence of a
/// named item counts; naming an item not in the pool is an error.
fn uncovered_from_reply(reply: &str, pool: &[Proposition]) -> Result<Vec<Proposition>, CoreError> {
    if is_none_reply(reply) {
        return Ok(Vec::new());
    }
    let mut named = BTreeSet::new();
    for item in parse_item_list(reply)? {
        let p = normalize_proposition(&item)?;
        if !pool.contains(&p) {
            return Err(malformed(format!("{p:?} is not an item of the plan")));
        }
        named.insert(p);
    }
    Ok(pool
        .iter()
        .filter(|p| named.contains(*p))
        .cloned()
        .collect())
}

/// Chaining report from the two plan-level coverage prompts.
pub fn llm_chaining_report(
    gateway: &Gateway,
    plan: &ActionPlan,
    rule: ScoreRule,
) -> Result<ChainingReport, CoreError> {
    let pre = plan.pooled_preconditions();
    let eff = plan.pooled_effects();
    let blocks = render_plan_blocks(&plan.steps);
    let ask = |template: &str| -> Result<String, CoreError> {
        let bindings = BTreeMap::from([(
            "model_output_step_4.3_after_post_processing".to_string(),
            blocks.clone(),
        )]);
        Ok(gateway
            .complete(templates::get(template), &bindings, None)?
            .text)
    };
    let (uncovered_preconditions, uncovered_effects) = if pre.is_empty() || eff.is_empty() {
        (pre.clone(), eff.clone())
    } else {
        (
            uncovered_from_reply(&ask(templates::UNCOVERED_PRECONDITIONS)?, &pre)?,
            uncovered_from_reply(&ask(templates::UNCOVERED_EFFECTS)?, &eff)?,
        )
    };
    let frac = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let pct_uncovered_pre = frac(uncovered_preconditions.len(), pre.len());
    let pct_uncovered_eff = frac(uncovered_effects.len(), eff.len());
    Ok(ChainingReport {
        plan_id: plan.id.clone(),
        uncovered_preconditions,
        uncovered_effects,
        pct_uncovered_pre,
        pct_uncovered_eff,
        score: rule.combine(pct_uncovered_pre, pct_uncovered_eff),
    })
}
