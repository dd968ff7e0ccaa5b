//! Inference backends served through the gateway.

use std::collections::BTreeMap;

use chainworld_core::inference::{
    model_input, parse_inference_output, Direction, InferenceBackend, InferenceQuery,
};
use chainworld_core::{ActionStep, Error as CoreError};

use crate::format::numbered;
use crate::gateway::Gateway;
use crate::templates;

/// Two fine-tuned seq2seq models, one per direction. The prompt is exactly
/// the training-pair input.
#[derive(Debug, Clone, Copy)]
pub struct FinetunedEndpoint<'g> {
    pub preconditions: &'g Gateway,
    pub effects: &'g Gateway,
}

impl InferenceBackend for FinetunedEndpoint<'_> {
    fn infer_raw(
        &self,
        direction: Direction,
        query: &InferenceQuery<'_>,
    ) -> Result<Vec<String>, CoreError> {
        if query.action_text.trim().is_empty() {
            return Err(CoreError::InvalidArgument("action text is empty".into()));
        }
        let gateway = match direction {
            Direction::Precondition => self.preconditions,
            Direction::Effect => self.effects,
        };
        let bindings = BTreeMap::from([(
            "input".to_string(),
            model_input(direction, query.action_text, query.task),
        )]);
        let reply =
            gateway.complete(templates::get(templates::FINETUNED_INPUT), &bindings, None)?;
        parse_inference_output(query.action_text, &reply.text)
    }
}

/// A general LLM prompted with a few annotated example steps.
#[derive(Debug, Clone)]
pub struct FewShotLlm<'g> {
    gateway: &'g Gateway,
    preconditions_examples: String,
    effects_examples: String,
}

fn render_examples(examples: &[ActionStep], direction: Direction) -> String {
    let heading = match direction {
        Direction::Precondition => "Preconditions:",
        Direction::Effect => "Effects:",
    };
    examples
        .iter()
        .map(|s| {
            let items = direction.gold(s).iter().map(|p| p.as_str());
            format!("Action: {}\n{heading}\n{}", s.action_text, numbered(items))
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

impl<'g> FewShotLlm<'g> {
    pub fn new(gateway: &'g Gateway, examples: &[ActionStep]) -> Self {
        Self {
            gateway,
            preconditions_examples: render_examples(examples, Direction::Precondition),
            effects_examples: render_examples(examples, Direction::Effect),
        }
    }
}

impl InferenceBackend for FewShotLlm<'_> {
    fn infer_raw(
        &self,
        direction: Direction,
        query: &InferenceQuery<'_>,
    ) -> Result<Vec<String>, CoreError> {
        if query.action_text.trim().is_empty() {
            return Err(CoreError::InvalidArgument("action text is empty".into()));
        }
        let (template, examples) = match direction {
            Direction::Precondition => (
                templates::FEWSHOT_PRECONDITIONS,
                &self.preconditions_examples,
            ),
            Direction::Effect => (templates::FEWSHOT_EFFECTS, &self.effects_examples),
        };
        let context = query
            .task
            .map(|t| format!("Task: {}", t.trim()))
            .unwrap_or_default();
        let bindings = BTreeMap::from([
            ("few_shot_examples".to_string(), examples.clone()),
            ("task_context".to_string(), context),
            ("action".to_string(), query.action_text.trim().to_string()),
        ]);
        let reply = self
            .gateway
            .complete(templates::get(template), &bindings, None)?;
        parse_inference_output(query.action_text, &reply.text)
    }
}
