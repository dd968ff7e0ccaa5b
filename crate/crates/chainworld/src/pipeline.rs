//! Corpus generation: plan generation, isolated-step pruning, annotation,
//! local re-chaining and the corpus-level chaining filter.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chainworld_core::chaining::{chaining_report, filter_corpus, ChainingReport, ScoreRule};
use chainworld_core::matcher::Matcher;
use chainworld_core::plan::EditLog;
use chainworld_core::prompt::parse_item_list;
use chainworld_core::{
    normalize_proposition, ActionPlan, ActionStep, Error as CoreError, Proposition, Provenance,
    Stage,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{
    action_key, is_none_reply, parse_blocks, parse_categories, render_actions, render_blocks,
    render_plan_blocks, Block,
};
use crate::gateway::Gateway;
use crate::judge::llm_chaining_report;
use crate::templates;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Skip pruning and local re-chaining.
    pub skip_local: bool,
    /// Skip the corpus-level filter.
    pub skip_global: bool,
    pub filter_fraction: f64,
    pub score_rule: ScoreRule,
    pub few_shot_count: usize,
    /// Few-shot fixture file; the bundled examples when unset.
    pub few_shot_path: Option<PathBuf>,
    /// Temperature for plan generation. Other steps use the backend default.
    pub generation_temperature: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            skip_local: false,
            skip_global: false,
            filter_fraction: 0.05,
            score_rule: ScoreRule::Mean,
            few_shot_count: 3,
            few_shot_path: None,
            generation_temperature: 0.7,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.filter_fraction) {
            return Err(Error::Config(format!(
                "filter_fraction {} outside [0, 1)",
                self.filter_fraction
            )));
        }
        if !(self.generation_temperature.is_finite() && self.generation_temperature >= 0.0) {
            return Err(Error::Config("generation_temperature must be >= 0".into()));
        }
        Ok(())
    }

    /// The variant name used in reports.
    pub fn variant(&self) -> &'static str {
        match (self.skip_local, self.skip_global) {
            (false, false) => "Full",
            (true, false) => "Ablation-Local",
            (false, true) => "Ablation-Global",
            (true, true) => "Ablation-Local-Global",
        }
    }
}

/// Worked examples for the prompts that take them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewShotExamples {
    #[serde(rename = "step_2")]
    pub prune: Vec<String>,
    #[serde(rename = "step_4.1")]
    pub identify: Vec<String>,
    #[serde(rename = "step_4.3")]
    pub categorize: Vec<String>,
}

impl FewShotExamples {
    pub fn bundled() -> Self {
        serde_json::from_str(include_str!("../fixtures/few_shot.json"))
            .expect("bundled few-shot fixture parses")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&raw).map_err(|source| Error::Json {
            location: path.display().to_string(),
            source,
        })
    }

    fn first(list: &[String], k: usize, what: &str) -> Result<String> {
        if k > list.len() {
            return Err(Error::Config(format!(
                "{k} few-shot examples requested for {what}, {} available",
                list.len()
            )));
        }
        Ok(list[..k].join("\n\n"))
    }
}

/// How step 5 judges plan-level coverage.
#[derive(Clone, Copy)]
pub enum PlanCoverage<'a> {
    Matcher(&'a (dyn Matcher + Sync)),
    /// The two plan-level coverage prompts.
    Llm(&'a Gateway),
}

/// A plan that could not be built, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub plan_id: String,
    pub task: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Every built plan before filtering, in task order.
    pub plans: Vec<ActionPlan>,
    pub reports: Vec<ChainingReport>,
    /// With the filter skipped, all plans.
    pub kept: Vec<ActionPlan>,
    pub discarded: Vec<ActionPlan>,
    pub failures: Vec<Failure>,
}

pub fn plan_id(task_index: usize) -> String {
    format!("p{:04}", task_index + 1)
}

/// Errors caused by one reply's content, as opposed to the backend or
/// environment. Only these skip a plan instead of aborting the run.
fn is_content_error(e: &Error) -> bool {
    match e {
        Error::GenerationFailed(_) | Error::UnparseableEdit(_) => true,
        Error::Core(c) => matches!(
            c,
            CoreError::AnnotationIncomplete(_)
                | CoreError::MalformedJudgment(_)
                | CoreError::EmptyList
                | CoreError::EmptyProposition
                | CoreError::EmptyAction
                | CoreError::DuplicateStepId(_)
        ),
        _ => false,
    }
}

fn propositions(items: &[String]) -> Vec<Proposition> {
    items
        .iter()
        .filter_map(|s| normalize_proposition(s).ok())
        .collect()
}

/// Index of the first unused step whose action matches `text`.
fn align(steps: &[ActionStep], used: &[bool], text: &str) -> Option<usize> {
    let key = action_key(text)?;
    (0..steps.len())
        .find(|&i| !used[i] && action_key(&steps[i].action_text).as_deref() == Some(key.as_str()))
}

pub struct Pipeline<'a> {
    gateway: &'a Gateway,
    config: PipelineConfig,
    coverage: PlanCoverage<'a>,
    shots_prune: String,
    shots_identify: String,
    shots_categorize: String,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        gateway: &'a Gateway,
        config: PipelineConfig,
        examples: &FewShotExamples,
        coverage: PlanCoverage<'a>,
    ) -> Result<Self> {
        config.validate()?;
        let k = config.few_shot_count;
        Ok(Self {
            shots_prune: FewShotExamples::first(&examples.prune, k, "step 2")?,
            shots_identify: FewShotExamples::first(&examples.identify, k, "step 4.1")?,
            shots_categorize: FewShotExamples::first(&examples.categorize, k, "step 4.3")?,
            gateway,
            config,
            coverage,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn ask(
        &self,
        template: &str,
        bindings: &[(&str, &str)],
        temperature: Option<f64>,
    ) -> Result<String> {
        let bindings: BTreeMap<String, String> = bindings
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Ok(self
            .gateway
            .complete(templates::get(template), &bindings, temperature)?
            .text)
    }

    /// Step 1: a raw plan of at least two unannotated steps, ids `s1..sN`.
    pub fn generate_plan(&self, id: &str, task: &str) -> Result<ActionPlan> {
        let task = task.trim();
        if task.is_empty() {
            return Err(CoreError::InvalidArgument("task description is empty".into()).into());
        }
        let reply = self.ask(
            templates::GENERATE,
            &[("domain_and_task_description", task)],
            Some(self.config.generation_temperature),
        )?;
        let lines = parse_item_list(&reply)
            .map_err(|_| Error::GenerationFailed(format!("{id}: no steps for {task:?}")))?;
        if lines.len() < 2 {
            return Err(Error::GenerationFailed(format!(
                "{id}: only {} step for {task:?}",
                lines.len()
            )));
        }
        let steps = lines
            .iter()
            .enumerate()
            .map(|(i, text)| ActionStep::bare(format!("s{}", i + 1), text.as_str()))
            .collect::<chainworld_core::Result<Vec<_>>>()?;
        Ok(ActionPlan::new(id, task, steps, Provenance::raw())?)
    }

    /// Step 2: drops isolated steps and adds any new ones the reply inserts.
    /// Kept steps are aligned by action text and must stay in order.
    pub fn prune_isolated_steps(&self, plan: ActionPlan) -> Result<ActionPlan> {
        let listing = render_actions(&plan.steps);
        let reply = self.ask(
            templates::PRUNE,
            &[
                ("few_shot_examples_step_2", &self.shots_prune),
                ("model_output_step_1", &listing),
            ],
            None,
        )?;
        let lines = parse_item_list(&reply)
            .map_err(|_| Error::GenerationFailed(format!("{}: pruning left no steps", plan.id)))?;
        let mut used = vec![false; plan.steps.len()];
        let mut cursor = 0;
        let mut next_id = plan
            .steps
            .iter()
            .filter_map(|s| s.id.strip_prefix('s')?.parse::<usize>().ok())
            .max()
            .unwrap_or(0)
            + 1;
        let mut steps = Vec::with_capacity(lines.len());
        let mut log = EditLog {
            stage: Some(Stage::Pruned),
            ..EditLog::default()
        };
        for line in &lines {
            match align(&plan.steps, &used, line) {
                Some(i) if i >= cursor => {
                    used[i] = true;
                    cursor = i + 1;
                    steps.push(plan.steps[i].clone());
                }
                Some(_) => {
                    return Err(Error::UnparseableEdit(format!(
                        "{}: step {line:?} moved",
                        plan.id
                    )));
                }
                None if plan
                    .steps
                    .iter()
                    .any(|s| action_key(&s.action_text) == action_key(line)) =>
                {
                    return Err(Error::UnparseableEdit(format!(
                        "{}: step {line:?} repeated",
                        plan.id
                    )));
                }
                None => {
                    let step = ActionStep::bare(format!("s{next_id}"), line.as_str())?;
                    next_id += 1;
                    log.added.push(step.action_text.clone());
                    steps.push(step);
                }
            }
        }
        log.removed = plan
            .steps
            .iter()
            .zip(&used)
            .filter(|(_, u)| !**u)
            .map(|(s, _)| s.id.clone())
            .collect();
        if steps.len() < 2 {
            return Err(Error::GenerationFailed(format!(
                "{}: fewer than two steps after pruning",
                plan.id
            )));
        }
        let mut provenance = plan.provenance;
        provenance.push(Stage::Pruned);
        if !log.is_empty() {
            provenance.edits.push(log);
        }
        Ok(ActionPlan::new(
            plan.id,
            plan.task_description,
            steps,
            provenance,
        )?)
    }

    /// Step 3: annotates every step, replacing any earlier annotation.
    pub fn annotate_preconditions_effects(&self, plan: ActionPlan) -> Result<ActionPlan> {
        let listing = render_actions(&plan.steps);
        let reply = self.ask(
            templates::ANNOTATE,
            &[("model_output_step_2", &listing)],
            None,
        )?;
        let blocks = parse_blocks(&reply)?;
        let mut assigned: Vec<Option<&Block>> = vec![None; plan.steps.len()];
        let mut used = vec![false; plan.steps.len()];
        for block in &blocks {
            let i = align(&plan.steps, &used, &block.action_text).ok_or_else(|| {
                Error::UnparseableEdit(format!(
                    "{}: annotation for unknown step {:?}",
                    plan.id, block.action_text
                ))
            })?;
            used[i] = true;
            assigned[i] = Some(block);
        }
        let mut steps = Vec::with_capacity(plan.steps.len());
        for (step, block) in plan.steps.iter().zip(assigned) {
            let incomplete = || CoreError::AnnotationIncomplete(format!("{}/{}", plan.id, step.id));
            let block = block.ok_or_else(incomplete)?;
            let pre = propositions(block.preconditions.as_deref().unwrap_or_default());
            let eff = propositions(block.effects.as_deref().unwrap_or_default());
            if pre.is_empty() || eff.is_empty() {
                return Err(incomplete().into());
            }
            steps.push(ActionStep::annotated(
                step.id.clone(),
                step.action_text.clone(),
                pre,
                eff,
            )?);
        }
        let mut provenance = plan.provenance;
        provenance.push(Stage::Annotated);
        Ok(ActionPlan::new(
            plan.id,
            plan.task_description,
            steps,
            provenance,
        )?)
    }

    /// Step 4: identify weakly chained steps, regenerate their annotations
    /// once, and keep only those then judged dependent.
    pub fn local_rechain(&self, plan: ActionPlan) -> Result<ActionPlan> {
        if plan.provenance.has(Stage::Rechained) {
            return Ok(plan);
        }
        if let Some(step) = plan.first_unannotated() {
            return Err(CoreError::AnnotationIncomplete(format!("{}/{}", plan.id, step.id)).into());
        }
        let full = render_plan_blocks(&plan.steps);
        let reply = self.ask(
            templates::IDENTIFY,
            &[
                ("few_shot_examples_step_4.1", &self.shots_identify),
                ("model_output_step_3", &full),
            ],
            None,
        )?;
        let mut provenance = plan.provenance.clone();
        provenance.push(Stage::Rechained);
        let identified_blocks = if is_none_reply(&reply) {
            Vec::new()
        } else {
            parse_blocks(&reply)?
        };
        if identified_blocks.is_empty() {
            return Ok(ActionPlan::new(
                plan.id,
                plan.task_description,
                plan.steps,
                provenance,
            )?);
        }

        let mut used = vec![false; plan.steps.len()];
        let mut identified = Vec::new();
        for block in &identified_blocks {
            let i = align(&plan.steps, &used, &block.action_text).ok_or_else(|| {
                Error::UnparseableEdit(format!(
                    "{}: identified unknown step {:?}",
                    plan.id, block.action_text
                ))
            })?;
            used[i] = true;
            identified.push(i);
        }
        identified.sort_unstable();
        let identified_text = render_blocks(identified.iter().map(|&i| (i + 1, &plan.steps[i])));

        let reply = self.ask(
            templates::REGENERATE,
            &[
                ("model_output_step_3", &full),
                ("model_output_step_4.1", &identified_text),
            ],
            None,
        )?;
        let mut regenerated: BTreeMap<usize, ActionStep> = BTreeMap::new();
        let blocked: Vec<bool> = (0..plan.steps.len())
            .map(|i| !identified.contains(&i))
            .collect();
        let mut used = blocked.clone();
        for block in parse_blocks(&reply)? {
            let i = align(&plan.steps, &used, &block.action_text).ok_or_else(|| {
                Error::UnparseableEdit(format!(
                    "{}: regenerated step {:?} was not identified",
                    plan.id, block.action_text
                ))
            })?;
            used[i] = true;
            let step = &plan.steps[i];
            let pre = propositions(block.preconditions.as_deref().unwrap_or_default());
            let eff = propositions(block.effects.as_deref().unwrap_or_default());
            if pre.is_empty() || eff.is_empty() {
                return Err(
                    CoreError::AnnotationIncomplete(format!("{}/{}", plan.id, step.id)).into(),
                );
            }
            regenerated.insert(
                i,
                ActionStep::annotated(step.id.clone(), step.action_text.clone(), pre, eff)?,
            );
        }
        if let Some(&missing) = identified.iter().find(|i| !regenerated.contains_key(i)) {
            return Err(Error::UnparseableEdit(format!(
                "{}: no regeneration for step {:?}",
                plan.id, plan.steps[missing].action_text
            )));
        }
        let regenerated_text = render_blocks(regenerated.iter().map(|(&i, s)| (i + 1, s)));

        let reply = self.ask(
            templates::CATEGORIZE,
            &[
                ("few_shot_examples_step_4.3", &self.shots_categorize),
                ("model_output_step_3", &full),
                ("model_output_step_4.1", &identified_text),
                ("model_output_step_4.2", &regenerated_text),
            ],
            None,
        )?;
        let mut category: BTreeMap<usize, u8> = BTreeMap::new();
        let mut used = blocked;
        for (cat, text) in parse_categories(&reply)? {
            let i = align(&plan.steps, &used, &text).ok_or_else(|| {
                Error::UnparseableEdit(format!(
                    "{}: categorized step {text:?} was not identified",
                    plan.id
                ))
            })?;
            used[i] = true;
            category.insert(i, cat);
        }
        if let Some(&missing) = identified.iter().find(|i| !category.contains_key(i)) {
            return Err(Error::UnparseableEdit(format!(
                "{}: step {:?} not categorized",
                plan.id, plan.steps[missing].action_text
            )));
        }

        let mut log = EditLog {
            stage: Some(Stage::Rechained),
            ..EditLog::default()
        };
        let mut steps = Vec::with_capacity(plan.steps.len());
        for (i, step) in plan.steps.iter().enumerate() {
            match category.get(&i) {
                None => steps.push(step.clone()),
                Some(1) => {
                    log.regenerated.push(step.id.clone());
                    steps.push(
                        regenerated
                            .remove(&i)
                            .expect("every identified step was regenerated"),
                    );
                }
                Some(_) => log.removed.push(step.id.clone()),
            }
        }
        if steps.is_empty() {
            return Err(Error::GenerationFailed(format!(
                "{}: re-chaining removed every step",
                plan.id
            )));
        }
        provenance.edits.push(log);
        Ok(ActionPlan::new(
            plan.id,
            plan.task_description,
            steps,
            provenance,
        )?)
    }

    pub fn chaining_report(&self, plan: &ActionPlan) -> Result<ChainingReport> {
        let rule = self.config.score_rule;
        Ok(match self.coverage {
            PlanCoverage::Matcher(m) => chaining_report(plan, m, rule)?,
            PlanCoverage::Llm(g) => llm_chaining_report(g, plan, rule)?,
        })
    }

    /// Steps 1 to 4 for one task, honouring `skip_local`.
    pub fn build_plan(&self, id: &str, task: &str) -> Result<ActionPlan> {
        let mut plan = self.generate_plan(id, task)?;
        if !self.config.skip_local {
            plan = self.prune_isolated_steps(plan)?;
        }
        plan = self.annotate_preconditions_effects(plan)?;
        if !self.config.skip_local {
            plan = self.local_rechain(plan)?;
        }
        Ok(plan)
    }

    /// Builds one plan per task on up to `jobs` threads, then filters the
    /// corpus unless `skip_global` is set. Output order follows task order.
    pub fn run(&self, tasks: &[String], jobs: usize) -> Result<PipelineOutput>
    where
        Self: Sync,
    {
        let jobs = jobs.clamp(1, tasks.len().max(1));
        let next = AtomicUsize::new(0);
        type Slot = Option<Result<(ActionPlan, ChainingReport)>>;
        let slots: Mutex<Vec<Slot>> = Mutex::new((0..tasks.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(task) = tasks.get(i) else { break };
                    let result = self.build_plan(&plan_id(i), task).and_then(|plan| {
                        let report = self.chaining_report(&plan)?;
                        Ok((plan, report))
                    });
                    slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(result);
                });
            }
        });

        let mut plans = Vec::new();
        let mut reports = Vec::new();
        let mut failures = Vec::new();
        let slots = slots.into_inner().unwrap_or_else(|e| e.into_inner());
        for (i, slot) in slots.into_iter().enumerate() {
            match slot.expect("every task was processed") {
                Ok((plan, report)) => {
                    plans.push(plan);
                    reports.push(report);
                }
                Err(e) if is_content_error(&e) => {
                    log::warn!("skipping {}: {e}", plan_id(i));
                    failures.push(Failure {
                        plan_id: plan_id(i),
                        task: tasks[i].clone(),
                        error: e.to_string(),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        let (kept, discarded) = if self.config.skip_global {
            (plans.clone(), Vec::new())
        } else {
            let f = filter_corpus(plans.clone(), &reports, self.config.filter_fraction)?;
            (f.kept, f.discarded)
        };
        Ok(PipelineOutput {
            plans,
            reports,
            kept,
            discarded,
            failures,
        })
    }
}
