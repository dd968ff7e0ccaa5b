//! A deterministic stand-in for the LLM, answering every pipeline and judge
//! prompt from its bindings alone. Used live by tests and, through
//! `examples/record_script.rs`, to record the committed scripted fixture.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chainworld::error::{Error, Result};
use chainworld::format::{numbered, parse_blocks, Block};
use chainworld::gateway::{Backend, BackendKind, Call};
use chainworld::templates;
use chainworld_core::normalize_proposition;

/// (action prefix, effect pattern); `{}` is the dish.
const STAGES: [(&str, &str); 7] = [
    (
        "gather the ingredients for",
        "ingredients for {} are gathered",
    ),
    ("wash the produce for", "produce for {} is washed"),
    ("chop the vegetables for", "vegetables for {} are chopped"),
    ("season the", "{} is seasoned"),
    ("cook the", "{} is cooked"),
    ("plate the", "{} is plated"),
    ("serve the", "{} is served"),
];

/// Unrelated step that pruning removes.
pub const DISTRACTION: &str = "check the news on your phone";
/// Unrelated step that survives pruning and is categorized not dependent.
pub const CHORE: &str = "wipe down the counter";
pub const WEAK_PRECONDITION: &str = "the oven is preheated";
/// Tasks containing this word get a blank plan.
pub const FAILING_WORD: &str = "mystery";

fn fnv(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Dish named by a task such as "make tomato soup".
pub fn dish_of(task: &str) -> String {
    let t = task.trim().to_lowercase();
    for verb in ["make ", "cook ", "prepare ", "bake "] {
        if let Some(rest) = t.strip_prefix(verb) {
            return rest.trim().to_string();
        }
    }
    t
}

/// Which stages a dish's plan uses: always the first and last, plus
/// hash-chosen middle stages (3 to 6 steps).
fn stages_for(dish: &str) -> Vec<usize> {
    let h = fnv(dish);
    let mut out = vec![0];
    out.extend((1..6).filter(|i| h >> (i + 3) & 1 == 1).take(4));
    if out.len() < 2 {
        out.push(4);
    }
    out.push(6);
    out
}

pub fn has_distraction(dish: &str) -> bool {
    fnv(dish).is_multiple_of(3)
}

pub fn has_chore(dish: &str) -> bool {
    fnv(dish) % 5 == 2
}

/// The second step gets an unrelated precondition.
pub fn has_weak_link(dish: &str) -> bool {
    fnv(dish) % 4 == 1
}

fn action(stage: usize, dish: &str) -> String {
    format!("{} {dish}", STAGES[stage].0)
}

fn effect(stage: usize, dish: &str) -> String {
    STAGES[stage].1.replace("{}", dish)
}

fn initial(dish: &str) -> String {
    format!("a recipe for {dish} is chosen")
}

/// The raw plan generated for a task.
pub fn plan_steps(task: &str) -> Vec<String> {
    let dish = dish_of(task);
    let mut steps: Vec<String> = stages_for(&dish)
        .into_iter()
        .map(|s| action(s, &dish))
        .collect();
    if has_distraction(&dish) {
        steps.insert(1, DISTRACTION.into());
    }
    if has_chore(&dish) {
        let at = steps.len() - 1;
        steps.insert(at, CHORE.into());
    }
    steps
}

/// (stage, dish) for a canonical action text.
fn parse_action(text: &str) -> Option<(usize, String)> {
    let t = text.trim().trim_end_matches('.').to_lowercase();
    STAGES
        .iter()
        .enumerate()
        .find_map(|(i, (prefix, _))| t.strip_prefix(prefix).map(|d| (i, d.trim().to_string())))
}

fn list_items(raw: &str) -> Vec<String> {
    raw.lines()
        .map(|l| {
            chainworld_core::proposition::strip_list_marker(l.trim())
                .trim()
                .to_string()
        })
        .filter(|l| !l.is_empty())
        .collect()
}

struct Annotation {
    pre: Vec<String>,
    eff: Vec<String>,
}

/// The first-pass annotation of a step in the context of its plan listing.
fn annotate(steps: &[String], i: usize) -> Annotation {
    let text = &steps[i];
    if text == DISTRACTION {
        return Annotation {
            pre: vec!["the phone is unlocked".into()],
            eff: vec!["the news is read".into()],
        };
    }
    if text == CHORE {
        return Annotation {
            pre: vec!["the counter is dirty".into()],
            eff: vec!["the counter is clean".into()],
        };
    }
    let (stage, dish) = parse_action(text).expect("toy plans only hold known steps");
    let previous = steps[..i].iter().rev().find_map(|s| parse_action(s));
    let mut pre = match &previous {
        Some((p, d)) => vec![effect(*p, d)],
        None => vec![initial(&dish)],
    };
    if has_weak_link(&dish) && previous.is_some() && stages_for(&dish).get(1) == Some(&stage) {
        pre = vec![WEAK_PRECONDITION.into()];
    }
    Annotation {
        pre,
        eff: vec![effect(stage, &dish)],
    }
}

fn block(n: usize, text: &str, pre: &[String], eff: &[String]) -> String {
    let mut out = format!("Step {n}: {text}\nPreconditions:\n");
    for p in pre {
        out.push_str(&format!("- {p}\n"));
    }
    out.push_str("Effects:\n");
    for e in eff {
        out.push_str(&format!("- {e}\n"));
    }
    out
}

fn key(s: &str) -> String {
    normalize_proposition(s)
        .map(|p| p.into_string())
        .unwrap_or_default()
}

/// Blocks whose preconditions are not all produced by earlier steps.
fn weak_blocks(blocks: &[Block]) -> Vec<&Block> {
    let mut produced = BTreeSet::new();
    let mut out = Vec::new();
    for (i, b) in blocks.iter().enumerate() {
        let pre = b.preconditions.clone().unwrap_or_default();
        if i > 0 && pre.iter().any(|p| !produced.contains(&key(p))) {
            out.push(b);
        }
        produced.extend(b.effects.clone().unwrap_or_default().iter().map(|e| key(e)));
    }
    out
}

fn is_chore(text: &str) -> bool {
    key(text) == key(CHORE) || key(text) == key(DISTRACTION)
}

/// `n: i, j` rows matching each query against candidates by normalized
/// equality.
fn rows(queries: &str, pool: &str, prefix: &str) -> (String, bool) {
    let pool: Vec<String> = list_items(pool).iter().map(|s| key(s)).collect();
    let mut all = true;
    let mut out = Vec::new();
    for (q, item) in list_items(queries).iter().enumerate() {
        let hits: Vec<String> = pool
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == key(item))
            .map(|(i, _)| (i + 1).to_string())
            .collect();
        all &= !hits.is_empty();
        let list = if hits.is_empty() {
            "none".to_string()
        } else {
            hits.join(", ")
        };
        out.push(format!("{prefix}{}: {list}", q + 1));
    }
    (out.join("\n"), all)
}

fn uncovered(blocks_text: &str, preconditions: bool) -> String {
    let blocks = parse_blocks(blocks_text).expect("plan blocks parse");
    let pres: Vec<String> = blocks
        .iter()
        .flat_map(|b| b.preconditions.clone().unwrap_or_default())
        .collect();
    let effs: Vec<String> = blocks
        .iter()
        .flat_map(|b| b.effects.clone().unwrap_or_default())
        .collect();
    let (items, other) = if preconditions {
        (&pres, &effs)
    } else {
        (&effs, &pres)
    };
    let other: BTreeSet<String> = other.iter().map(|s| key(s)).collect();
    let mut seen = BTreeSet::new();
    let missing: Vec<&str> = items
        .iter()
        .filter(|i| !other.contains(&key(i)) && seen.insert(key(i)))
        .map(String::as_str)
        .collect();
    if missing.is_empty() {
        "none".into()
    } else {
        numbered(missing)
    }
}

/// Re-chained gold annotation of an action, for the inference prompts.
fn infer(action_text: &str, preconditions: bool) -> String {
    let Some((stage, dish)) = parse_action(action_text) else {
        return "none".into();
    };
    let stages = stages_for(&dish);
    let item = if !preconditions {
        effect(stage, &dish)
    } else {
        match stages.iter().position(|&s| s == stage) {
            Some(p) if p > 0 => effect(stages[p - 1], &dish),
            _ => initial(&dish),
        }
    };
    numbered([item.as_str()])
}

/// The toy model's answer to one prompt.
pub fn respond(template: &str, b: &BTreeMap<String, String>) -> String {
    let get = |k: &str| b.get(k).map(String::as_str).unwrap_or_default();
    match template {
        templates::GENERATE => {
            let task = get("domain_and_task_description");
            if task.contains(FAILING_WORD) {
                return String::new();
            }
            numbered(plan_steps(task).iter().map(String::as_str))
        }
        templates::PRUNE => {
            let kept: Vec<String> = list_items(get("model_output_step_1"))
                .into_iter()
                .filter(|s| s != DISTRACTION)
                .collect();
            numbered(kept.iter().map(String::as_str))
        }
        templates::ANNOTATE => {
            let steps = list_items(get("model_output_step_2"));
            (0..steps.len())
                .map(|i| {
                    let a = annotate(&steps, i);
                    block(i + 1, &steps[i], &a.pre, &a.eff)
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
        templates::IDENTIFY => {
            let blocks = parse_blocks(get("model_output_step_3")).expect("plan blocks parse");
            let weak = weak_blocks(&blocks);
            if weak.is_empty() {
                return "none".into();
            }
            weak.iter()
                .map(|b| {
                    block(
                        b.number,
                        &b.action_text,
                        &b.preconditions.clone().unwrap_or_default(),
                        &b.effects.clone().unwrap_or_default(),
                    )
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
        templates::REGENERATE => {
            let full = parse_blocks(get("model_output_step_3")).expect("plan blocks parse");
            let identified =
                parse_blocks(get("model_output_step_4.1")).expect("identified blocks parse");
            identified
                .iter()
                .map(|b| {
                    let eff = b.effects.clone().unwrap_or_default();
                    let pre = if is_chore(&b.action_text) {
                        b.preconditions.clone().unwrap_or_default()
                    } else {
                        let at = full
                            .iter()
                            .position(|f| f.number == b.number)
                            .expect("identified step in plan");
                        full[..at]
                            .iter()
                            .rev()
                            .find(|f| !is_chore(&f.action_text))
                            .and_then(|f| f.effects.clone())
                            .unwrap_or_else(|| vec![initial(&dish_of(&b.action_text))])
                    };
                    block(b.number, &b.action_text, &pre, &eff)
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
        templates::CATEGORIZE => parse_blocks(get("model_output_step_4.1"))
            .expect("identified blocks parse")
            .iter()
            .map(|b| {
                format!(
                    "({}) {}",
                    if is_chore(&b.action_text) { 2 } else { 1 },
                    b.action_text
                )
            })
            .collect::<Vec<_>>()
            .join("\n"),
        templates::UNCOVERED_PRECONDITIONS => {
            uncovered(get("model_output_step_4.3_after_post_processing"), true)
        }
        templates::UNCOVERED_EFFECTS => {
            uncovered(get("model_output_step_4.3_after_post_processing"), false)
        }
        templates::VALID_ACTION => {
            let (rows, all) = rows(
                get("inferred_action_preconditions"),
                get("current_world_state"),
                "",
            );
            format!("{rows}\n{}", if all { "TRUE" } else { "FALSE" })
        }
        templates::COVERAGE => rows(get("query_items"), get("candidate_items"), "").0,
        templates::CONTRADICTION => {
            let n = list_items(get("inferred_action_effects")).len();
            (1..=n)
                .map(|i| format!("effect {i}: none"))
                .collect::<Vec<_>>()
                .join("\n")
        }
        templates::FEWSHOT_PRECONDITIONS => infer(get("action"), true),
        templates::FEWSHOT_EFFECTS => infer(get("action"), false),
        other => panic!("toy model has no answer for template {other}"),
    }
}

/// [`respond`] behind the gateway's backend trait.
#[derive(Debug, Default)]
pub struct ToyBackend;

impl Backend for ToyBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn call(&self, call: &Call<'_>) -> Result<String> {
        Ok(respond(call.template_name, call.bindings))
    }
}

/// Wraps a backend and keeps every fingerprint -> reply it produced.
#[derive(Debug, Default)]
pub struct Recorder<B> {
    pub inner: B,
    pub log: std::sync::Arc<std::sync::Mutex<BTreeMap<String, String>>>,
}

impl<B: Backend> Backend for Recorder<B> {
    fn kind(&self) -> BackendKind {
        self.inner.kind()
    }

    fn call(&self, call: &Call<'_>) -> Result<String> {
        let text = self.inner.call(call)?;
        self.log
            .lock()
            .map_err(|_| Error::Config("recorder poisoned".into()))?
            .insert(call.fingerprint.to_string(), text.clone());
        Ok(text)
    }
}

/// The three corpus variants the committed script covers.
pub fn variants() -> [chainworld::pipeline::PipelineConfig; 3] {
    use chainworld::pipeline::PipelineConfig;
    [
        PipelineConfig::default(),
        PipelineConfig {
            skip_local: true,
            ..PipelineConfig::default()
        },
        PipelineConfig {
            skip_global: true,
            ..PipelineConfig::default()
        },
    ]
}

/// Every reply the three variants need for `tasks` under the exact matcher,
/// keyed by fingerprint. Replies do not depend on the seed, so one script
/// serves every seed.
pub fn record_script(tasks: &[String]) -> BTreeMap<String, String> {
    use chainworld::gateway::{BackendConfig, Gateway};
    use chainworld::pipeline::{FewShotExamples, Pipeline, PlanCoverage};
    use chainworld_core::matcher::ExactMatcher;

    let log = std::sync::Arc::new(std::sync::Mutex::new(BTreeMap::new()));
    let recorder = Recorder {
        inner: ToyBackend,
        log: log.clone(),
    };
    let gateway = Gateway::with_backend(BackendConfig::default(), Box::new(recorder))
        .expect("default config is valid");
    let examples = FewShotExamples::bundled();
    for config in variants() {
        let pipeline = Pipeline::new(
            &gateway,
            config,
            &examples,
            PlanCoverage::Matcher(&ExactMatcher),
        )
        .expect("variant config is valid");
        pipeline
            .run(tasks, 1)
            .expect("toy model answers every prompt");
    }
    let script = log.lock().expect("recorder lock").clone();
    script
}
