//! Test-set construction and scoring for inference, valid action prediction
//! and state transition prediction.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::inference::{infer, Direction, InferenceBackend, InferenceQuery};
use crate::matcher::Matcher;
use crate::metrics::{bleu_n, rouge_l, sms, token_f1, Embedder};
use crate::world_model::{check_preconditions, derive_state_trace, StateTrace, WorldModel};
use crate::{
    normalize_proposition, ActionPlan, Error, Proposition, Result, StateDelta, WorldState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidActionCase {
    pub action_text: String,
    pub state: WorldState,
    pub label: Label,
    pub plan_id: String,
    pub step_id: String,
    /// Index into the plan's state trace that `state` came from.
    pub state_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCase {
    pub action_text: String,
    pub state: WorldState,
    pub gold: StateDelta,
    pub plan_id: String,
    pub step_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceCase {
    pub action_text: String,
    pub task_description: String,
    pub preconditions: Vec<Proposition>,
    pub effects: Vec<Proposition>,
    pub plan_id: String,
    pub step_id: String,
}

pub fn derive_traces<M: Matcher + ?Sized>(
    corpus: &[ActionPlan],
    matcher: &M,
) -> Result<Vec<StateTrace>> {
    corpus
        .iter()
        .map(|p| derive_state_trace(p, matcher))
        .collect()
}

type Candidates = (Vec<ValidActionCase>, Vec<ValidActionCase>);

/// Every positive and negative candidate, in corpus order.
fn valid_action_candidates<M: Matcher + ?Sized>(
    corpus: &[ActionPlan],
    traces: &[StateTrace],
    matcher: &M,
) -> Result<Candidates> {
    if traces.len() != corpus.len() {
        return Err(Error::InvalidArgument(
            "one state trace per plan is required".into(),
        ));
    }
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (plan, trace) in corpus.iter().zip(traces) {
        for (k, step) in plan.steps.iter().enumerate() {
            let case = |state_index: usize, label| ValidActionCase {
                action_text: step.action_text.clone(),
                state: trace.states[state_index].clone(),
                label,
                plan_id: plan.id.clone(),
                step_id: step.id.clone(),
                state_index,
            };
            if check_preconditions(matcher, &step.preconditions, &trace.states[k])?.valid {
                positives.push(case(k, Label::Valid));
            }
            for j in 0..k {
                if !check_preconditions(matcher, &step.preconditions, &trace.states[j])?.valid {
                    negatives.push(case(j, Label::Invalid));
                }
            }
        }
    }
    Ok((positives, negatives))
}

/// The largest balanced test-set size the corpus supports.
pub fn balanced_capacity<M: Matcher + ?Sized>(
    corpus: &[ActionPlan],
    traces: &[StateTrace],
    matcher: &M,
) -> Result<usize> {
    let (positives, negatives) = valid_action_candidates(corpus, traces, matcher)?;
    Ok(2 * positives.len().min(negatives.len()))
}

/// Balanced valid/invalid cases from gold state traces.
///
/// Positives pair step `k` with `trace[k]` (kept only if its gold
/// preconditions check out there). Negatives pair step `k` with an earlier
/// state `trace[j]`, `j < k`, where the gold preconditions fail. Exactly
/// `n / 2` of each are drawn with a seeded shuffle.
pub fn build_valid_action_testset<M: Matcher + ?Sized>(
    corpus: &[ActionPlan],
    traces: &[StateTrace],
    matcher: &M,
    n: usize,
    seed: u64,
) -> Result<Vec<ValidActionCase>> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "test-set size {n} must be even and positive"
        )));
    }
    let (mut positives, mut negatives) = valid_action_candidates(corpus, traces, matcher)?;
    let half = n / 2;
    if negatives.len() < half {
        return Err(Error::InsufficientNegatives {
            needed: half,
            available: negatives.len(),
        });
    }
    if positives.len() < half {
        return Err(Error::InsufficientPositives {
            needed: half,
            available: positives.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);
    let mut cases: Vec<_> = positives
        .into_iter()
        .take(half)
        .chain(negatives.into_iter().take(half))
        .collect();
    cases.shuffle(&mut rng);
    Ok(cases)
}

/// One case per step with the gold delta from the trace. With `limit`, a
/// seeded sample of that many cases.
pub fn build_transition_testset(
    corpus: &[ActionPlan],
    traces: &[StateTrace],
    limit: Option<usize>,
    seed: u64,
) -> Result<Vec<TransitionCase>> {
    if traces.len() != corpus.len() {
        return Err(Error::InvalidArgument(
            "one state trace per plan is required".into(),
        ));
    }
    let mut cases: Vec<_> = corpus
        .iter()
        .zip(traces)
        .flat_map(|(plan, trace)| {
            plan.steps
                .iter()
                .enumerate()
                .map(move |(k, step)| TransitionCase {
                    action_text: step.action_text.clone(),
                    state: trace.states[k].clone(),
                    gold: trace.deltas[k].clone(),
                    plan_id: plan.id.clone(),
                    step_id: step.id.clone(),
                })
        })
        .collect();
    if let Some(limit) = limit {
        if limit < cases.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            cases.shuffle(&mut rng);
            cases.truncate(limit);
        }
    }
    Ok(cases)
}

pub fn build_inference_testset(corpus: &[ActionPlan]) -> Vec<InferenceCase> {
    corpus
        .iter()
        .flat_map(|plan| {
            plan.steps.iter().map(move |step| InferenceCase {
                action_text: step.action_text.clone(),
                task_description: plan.task_description.clone(),
                preconditions: step.preconditions.clone(),
                effects: step.effects.clone(),
                plan_id: plan.id.clone(),
                step_id: step.id.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoldoutSplit {
    pub train: Vec<ActionPlan>,
    pub test: Vec<ActionPlan>,
    /// Normalized action texts that occur in both splits.
    pub collisions: Vec<String>,
}

impl HoldoutSplit {
    /// Inference cases from the test split, minus any action also seen in
    /// training.
    pub fn inference_cases(&self) -> Vec<InferenceCase> {
        let collided: BTreeSet<&str> = self.collisions.iter().map(String::as_str).collect();
        build_inference_testset(&self.test)
            .into_iter()
            .filter(|c| {
                normalize_proposition(&c.action_text)
                    .map(|k| !collided.contains(k.as_str()))
                    .unwrap_or(false)
            })
            .collect()
    }
}

/// Splits by plan: `holdout` plans drawn with a seeded shuffle go to test,
/// the rest to train, both in corpus order.
pub fn split_holdout(corpus: &[ActionPlan], holdout: usize, seed: u64) -> Result<HoldoutSplit> {
    if holdout > corpus.len() {
        return Err(Error::InvalidArgument(format!(
            "holdout of {holdout} plans from a corpus of {}",
            corpus.len()
        )));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_idx: BTreeSet<usize> = order.into_iter().take(holdout).collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, plan) in corpus.iter().enumerate() {
        if test_idx.contains(&i) {
            test.push(plan.clone());
        } else {
            train.push(plan.clone());
        }
    }
    let keys = |plans: &[ActionPlan]| -> BTreeSet<String> {
        plans
            .iter()
            .flat_map(|p| &p.steps)
            .filter_map(|s| normalize_proposition(&s.action_text).ok())
            .map(Proposition::into_string)
            .collect()
    };
    let collisions = keys(&train).intersection(&keys(&test)).cloned().collect();
    Ok(HoldoutSplit {
        train,
        test,
        collisions,
    })
}

/// Mean text scores over a test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextScores {
    pub token_f1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub rouge_l: f64,
    pub sms: f64,
}

impl TextScores {
    pub fn score<E: Embedder + ?Sized>(pred: &str, gold: &str, embedder: &E) -> Result<Self> {
        Ok(Self {
            token_f1: token_f1(pred, gold),
            bleu2: bleu_n(pred, gold, 2),
            bleu3: bleu_n(pred, gold, 3),
            rouge_l: rouge_l(pred, gold),
            sms: sms(pred, gold, embedder)?,
        })
    }

    fn mean(all: &[TextScores]) -> Option<TextScores> {
        if all.is_empty() {
            return None;
        }
        let n = all.len() as f64;
        let sum = |f: fn(&TextScores) -> f64| all.iter().map(f).sum::<f64>() / n;
        Some(TextScores {
            token_f1: sum(|s| s.token_f1),
            bleu2: sum(|s| s.bleu2),
            bleu3: sum(|s| s.bleu3),
            rouge_l: sum(|s| s.rouge_l),
            sms: sum(|s| s.sms),
        })
    }

    pub fn as_row(&self) -> [f64; 5] {
        [
            self.token_f1,
            self.bleu2,
            self.bleu3,
            self.rouge_l,
            self.sms,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalTask {
    PreconditionInference,
    EffectInference,
    /// Valid action accuracy plus transition text scores.
    WorldModel,
}

/// Scores for one task. `accuracy` is present only for the world-model task;
/// `text` for every task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: EvalTask,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<TextScores>,
}

fn render_items(items: &[Proposition]) -> Vec<&str> {
    let mut v: Vec<&str> = items.iter().map(Proposition::as_str).collect();
    v.sort_unstable();
    v
}

/// `add: x, y; delete: z` with each side sorted.
pub fn render_delta(delta: &StateDelta) -> String {
    format!(
        "add: {}; delete: {}",
        render_items(delta.additions()).join(", "),
        render_items(delta.deletions()).join(", ")
    )
}

/// Sorted, newline-joined list.
pub fn render_list(items: &[Proposition]) -> String {
    render_items(items).join("\n")
}

pub fn valid_action_accuracy<B, M>(
    model: &WorldModel<B, M>,
    cases: &[ValidActionCase],
) -> Result<f64>
where
    B: InferenceBackend,
    M: Matcher,
{
    if cases.is_empty() {
        return Err(Error::InvalidArgument("empty valid-action test set".into()));
    }
    let mut correct = 0usize;
    for case in cases {
        let verdict = model.predict_valid_action(&case.action_text, &case.state)?;
        let predicted = if verdict.valid {
            Label::Valid
        } else {
            Label::Invalid
        };
        if predicted == case.label {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / cases.len() as f64)
}

pub fn transition_scores<B, M, E>(
    model: &WorldModel<B, M>,
    cases: &[TransitionCase],
    embedder: &E,
) -> Result<Option<TextScores>>
where
    B: InferenceBackend,
    M: Matcher,
    E: Embedder + ?Sized,
{
    let mut all = Vec::with_capacity(cases.len());
    for case in cases {
        let predicted = model.predict_transition(&case.action_text, &case.state, true)?;
        all.push(TextScores::score(
            &render_delta(&predicted.delta),
            &render_delta(&case.gold),
            embedder,
        )?);
    }
    Ok(TextScores::mean(&all))
}

/// The world-model row: accuracy on valid-action cases, text scores on
/// transition cases.
pub fn evaluate_world_model<B, M, E>(
    model: &WorldModel<B, M>,
    valid_cases: &[ValidActionCase],
    transition_cases: &[TransitionCase],
    embedder: &E,
) -> Result<MetricReport>
where
    B: InferenceBackend,
    M: Matcher,
    E: Embedder + ?Sized,
{
    Ok(MetricReport {
        task: EvalTask::WorldModel,
        samples: valid_cases.len() + transition_cases.len(),
        accuracy: Some(valid_action_accuracy(model, valid_cases)?),
        text: transition_scores(model, transition_cases, embedder)?,
    })
}

/// Text scores between inferred and gold lists (both sorted then
/// newline-joined).
pub fn evaluate_inference<B, E>(
    backend: &B,
    cases: &[InferenceCase],
    direction: Direction,
    include_task: bool,
    embedder: &E,
) -> Result<MetricReport>
where
    B: InferenceBackend + ?Sized,
    E: Embedder + ?Sized,
{
    let mut all = Vec::with_capacity(cases.len());
    for case in cases {
        let query = InferenceQuery {
            action_text: &case.action_text,
            task: include_task.then_some(case.task_description.as_str()),
        };
        let predicted = infer(backend, direction, &query)?;
        let gold = match direction {
            Direction::Precondition => &case.preconditions,
            Direction::Effect => &case.effects,
        };
        all.push(TextScores::score(
            &render_list(&predicted),
            &render_list(gold),
            embedder,
        )?);
    }
    Ok(MetricReport {
        task: match direction {
            Direction::Precondition => EvalTask::PreconditionInference,
            Direction::Effect => EvalTask::EffectInference,
        },
        samples: cases.len(),
        accuracy: None,
        text: TextScores::mean(&all),
    })
}

pub const INFERENCE_COLUMNS: [&str; 5] = ["F1", "BLEU-2", "BLEU-3", "ROUGE-L", "SMS"];
pub const WORLD_MODEL_COLUMNS: [&str; 6] = ["Acc.", "F1", "BLEU-2", "BLEU-3", "ROUGE-L", "SMS"];

/// A labelled row of scores, e.g. one pipeline variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub values: Vec<Option<f64>>,
}

impl ReportRow {
    pub fn inference(label: &str, report: &MetricReport) -> Self {
        let values = match &report.text {
            Some(t) => t.as_row().iter().map(|&v| Some(v)).collect(),
            None => alloc::vec![None; 5],
        };
        Self {
            label: label.into(),
            values,
        }
    }

    pub fn world_model(label: &str, report: &MetricReport) -> Self {
        let mut values = alloc::vec![report.accuracy];
        match &report.text {
            Some(t) => values.extend(t.as_row().iter().map(|&v| Some(v))),
            None => values.extend([None; 5]),
        }
        Self {
            label: label.into(),
            values,
        }
    }
}

fn render_table(out: &mut String, columns: &[&str], sections: &[(Option<&str>, &[ReportRow])]) {
    let label_width = sections
        .iter()
        .flat_map(|(title, rows)| {
            rows.iter()
                .map(|r| r.label.len())
                .chain(title.map(str::len))
        })
        .max()
        .unwrap_or(0)
        .max(8);
    let col_width = columns.iter().map(|c| c.len()).max().unwrap_or(0).max(7);
    let rule_len = label_width + columns.len() * (col_width + 2);
    let rule: String = core::iter::repeat_n('-', rule_len).collect();
    let _ = write!(out, "{:<label_width$}", "");
    for c in columns {
        let _ = write!(out, "  {c:>col_width$}");
    }
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    for (title, rows) in sections {
        if let Some(title) = title {
            let _ = writeln!(out, "{title}");
        }
        for row in rows.iter() {
            let _ = write!(out, "{:<label_width$}", row.label);
            for v in &row.values {
                match v {
                    Some(v) => {
                        let _ = write!(out, "  {v:>col_width$.2}");
                    }
                    None => {
                        let _ = write!(out, "  {:>col_width$}", "-");
                    }
                }
            }
            out.push('\n');
        }
    }
    out.push_str(&rule);
    out.push('\n');
}

/// Aligned table with a precondition section and an effect section.
pub fn render_inference_table(
    precondition_rows: &[ReportRow],
    effect_rows: &[ReportRow],
) -> String {
    let mut out = String::new();
    render_table(
        &mut out,
        &INFERENCE_COLUMNS,
        &[
            (Some("Precondition Inference"), precondition_rows),
            (Some("Effect Inference"), effect_rows),
        ],
    );
    out
}

pub fn render_world_model_table(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    render_table(&mut out, &WORLD_MODEL_COLUMNS, &[(None, rows)]);
    out
}

/// Reference numbers from a large-scale corpus with fine-tuned seq2seq
/// inference models. They are recorded for comparison only; nothing in this
/// crate can reproduce them at desk scale.
pub mod reference {
    /// (label, [F1, BLEU-2, BLEU-3, ROUGE-L, SMS])
    pub const PRECONDITION_INFERENCE: [(&str, [f64; 5]); 3] = [
        ("Ablation-Local", [58.57, 63.47, 57.88, 51.07, 17.02]),
        ("Ablation-Global", [60.53, 66.25, 60.06, 52.24, 17.89]),
        ("Full Method", [65.67, 70.08, 64.99, 57.96, 19.77]),
    ];
    pub const EFFECT_INFERENCE: [(&str, [f64; 5]); 3] = [
        ("Ablation-Local", [55.03, 60.41, 54.70, 53.17, 16.56]),
        ("Ablation-Global", [58.51, 62.71, 57.92, 55.13, 17.55]),
        ("Full Method", [61.43, 65.20, 59.35, 57.72, 18.25]),
    ];
    /// (label, [Acc., F1, BLEU-2, BLEU-3, ROUGE-L, SMS])
    pub const WORLD_MODEL: [(&str, [f64; 6]); 3] = [
        ("Ablation-Local", [74.50, 49.73, 55.21, 49.83, 44.26, 12.96]),
        (
            "Ablation-Global",
            [77.00, 53.43, 59.09, 54.30, 49.71, 14.52],
        ),
        ("Full Method", [81.50, 56.05, 61.69, 56.18, 52.75, 15.19]),
    ];
    /// Percentage of unseen actions that were satisfiable.
    pub const PCT_SATISFIABLE: f64 = 83.5;
    /// Mean number of ways per satisfiable action.
    pub const MEAN_WAYS: f64 = 9.7;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::CorpusLookup;
    use crate::matcher::ExactMatcher;
    use crate::metrics::HashedBowEmbedder;
    use crate::{ActionStep, Provenance};
    use alloc::vec;

    fn ps(items: &[&str]) -> Vec<Proposition> {
        items.iter().map(|s| Proposition::new(s).unwrap()).collect()
    }

    fn step(id: &str, action: &str, pre: &[&str], eff: &[&str]) -> ActionStep {
        ActionStep::annotated(id, action, ps(pre), ps(eff)).unwrap()
    }

    fn toy_plan(prefix: &str) -> ActionPlan {
        let n = |s: &str| format!("{prefix} {s}");
        ActionPlan::new(
            prefix,
            "toy",
            vec![
                step("s1", &n("one"), &[&n("p1")], &[&n("e1")]),
                step("s2", &n("two"), &[&n("e1")], &[&n("e2")]),
                step("s3", &n("three"), &[&n("e2"), &n("p3")], &[&n("e3")]),
            ],
            Provenance::raw(),
        )
        .unwrap()
    }

    #[test]
    fn toy_cases() {
        let corpus = vec![toy_plan("a")];
        let traces = derive_traces(&corpus, &ExactMatcher).unwrap();
        // The toy plan has 3 positives and 3 negatives: (s2, t0), (s3, t0), (s3, t1).
        let cases = build_valid_action_testset(&corpus, &traces, &ExactMatcher, 6, 7).unwrap();
        assert!(cases
            .iter()
            .any(|c| c.step_id == "s3" && c.state_index == 0 && c.label == Label::Invalid));
        assert!(cases
            .iter()
            .any(|c| c.step_id == "s3" && c.state_index == 2 && c.label == Label::Valid));

        let four = build_valid_action_testset(&corpus, &traces, &ExactMatcher, 4, 7).unwrap();
        assert_eq!(four.iter().filter(|c| c.label == Label::Valid).count(), 2);
        assert_eq!(four.iter().filter(|c| c.label == Label::Invalid).count(), 2);
        assert_eq!(
            four,
            build_valid_action_testset(&corpus, &traces, &ExactMatcher, 4, 7).unwrap()
        );
        assert!(build_valid_action_testset(&corpus, &traces, &ExactMatcher, 3, 7).is_err());
    }

    #[test]
    fn single_step_plans_have_no_negatives() {
        let corpus: Vec<_> = (0..4)
            .map(|i| {
                ActionPlan::new(
                    format!("p{i}"),
                    "t",
                    vec![step("s1", &format!("a{i}"), &["x"], &["y"])],
                    Provenance::raw(),
                )
                .unwrap()
            })
            .collect();
        let traces = derive_traces(&corpus, &ExactMatcher).unwrap();
        assert_eq!(
            build_valid_action_testset(&corpus, &traces, &ExactMatcher, 2, 0),
            Err(Error::InsufficientNegatives {
                needed: 1,
                available: 0
            })
        );
    }

    #[test]
    fn oracle_closure() {
        let corpus = vec![toy_plan("a"), toy_plan("b")];
        let traces = derive_traces(&corpus, &ExactMatcher).unwrap();
        let model = WorldModel::new(CorpusLookup::from_corpus(&corpus), ExactMatcher);
        let emb = HashedBowEmbedder::default();
        let valid = build_valid_action_testset(&corpus, &traces, &ExactMatcher, 6, 1).unwrap();
        let trans = build_transition_testset(&corpus, &traces, None, 1).unwrap();
        let report = evaluate_world_model(&model, &valid, &trans, &emb).unwrap();
        assert_eq!(report.accuracy, Some(100.0));
        let text = report.text.unwrap();
        assert_eq!(text.token_f1, 100.0);
        assert!(text.as_row().iter().all(|&v| (v - 100.0).abs() < 1e-9));

        let cases = build_inference_testset(&corpus);
        for d in Direction::BOTH {
            let r = evaluate_inference(&model.inference, &cases, d, false, &emb).unwrap();
            assert_eq!(r.text.unwrap().token_f1, 100.0);
            assert_eq!(r.accuracy, None);
        }
    }

    #[test]
    fn delta_rendering_is_sorted() {
        let d = StateDelta::new(ps(&["b", "a"]), ps(&["z"])).unwrap();
        assert_eq!(render_delta(&d), "add: a, b; delete: z");
        assert_eq!(render_delta(&StateDelta::default()), "add: ; delete: ");
        assert_eq!(render_list(&ps(&["y", "x"])), "x\ny");
    }

    #[test]
    fn table_layout() {
        let report = MetricReport {
            task: EvalTask::WorldModel,
            samples: 4,
            accuracy: Some(100.0),
            text: Some(TextScores {
                token_f1: 90.0,
                bleu2: 80.0,
                bleu3: 70.0,
                rouge_l: 60.0,
                sms: 50.0,
            }),
        };
        let table = render_world_model_table(&[ReportRow::world_model("Full Method", &report)]);
        let header: Vec<_> = table.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header, WORLD_MODEL_COLUMNS);
        assert!(table.contains("Full Method   100.00"));

        let inf = MetricReport {
            task: EvalTask::PreconditionInference,
            accuracy: None,
            ..report
        };
        let table = render_inference_table(&[ReportRow::inference("Full Method", &inf)], &[]);
        let header: Vec<_> = table.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header, INFERENCE_COLUMNS);
        assert!(table.contains("Precondition Inference") && table.contains("Effect Inference"));
    }

    #[test]
    fn holdout_split() {
        let mut corpus: Vec<_> = ["a", "b", "c", "d"].iter().map(|p| toy_plan(p)).collect();
        corpus[3].steps[0].action_text = "a one".into();
        let split = split_holdout(&corpus, 2, 3).unwrap();
        assert_eq!(split.train.len() + split.test.len(), 4);
        assert_eq!(split, split_holdout(&corpus, 2, 3).unwrap());
        let all_steps = split.test.iter().map(|p| p.steps.len()).sum::<usize>();
        let cases = split.inference_cases();
        assert_eq!(cases.len(), all_steps - split.collisions.len());
        assert!(split_holdout(&corpus, 5, 0).is_err());
    }

    #[test]
    fn reference_rows() {
        assert_eq!(reference::PRECONDITION_INFERENCE[2].1[0], 65.67);
        assert_eq!(reference::WORLD_MODEL[2].1[0], 81.50);
    }
}
