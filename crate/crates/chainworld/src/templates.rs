//! Prompt templates for corpus generation, semantic matching and few-shot
//! inference. Each body ends with an output-format instruction matching the
//! parser that reads the reply.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use chainworld_core::prompt::PromptTemplate;

pub const GENERATE: &str = "step1_generate";
pub const PRUNE: &str = "step2_prune";
pub const ANNOTATE: &str = "step3_annotate";
pub const IDENTIFY: &str = "step4_1_identify";
pub const REGENERATE: &str = "step4_2_regenerate";
pub const CATEGORIZE: &str = "step4_3_categorize";
pub const UNCOVERED_PRECONDITIONS: &str = "step5_1_uncovered_preconditions";
pub const UNCOVERED_EFFECTS: &str = "step5_2_uncovered_effects";
pub const VALID_ACTION: &str = "match_valid_action";
pub const CONTRADICTION: &str = "match_contradiction";
pub const COVERAGE: &str = "match_coverage";
pub const FEWSHOT_PRECONDITIONS: &str = "infer_preconditions_fewshot";
pub const FEWSHOT_EFFECTS: &str = "infer_effects_fewshot";
pub const FINETUNED_INPUT: &str = "infer_finetuned";

const LIST_FORMAT: &str = "Output format: write one item per line, numbered \"1.\", \"2.\", and so on. Write nothing else.";

const BLOCK_FORMAT: &str = "Output format: for each step write a line \"Step N: <action text>\" copying the action text exactly, then a line \"Preconditions:\" followed by one \"- <item>\" line per precondition, then a line \"Effects:\" followed by one \"- <item>\" line per effect. Write nothing else.";

const STEP_1: &str =
    "Give me a series of action steps that are generally involved in $domain_and_task_description.
Steps must have a strong dependency on each other.
Steps must be grounded in a specific concrete environment.

$format

A series of action steps:
";

const STEP_2: &str = "You will be given full action steps.
Identify and discard the action steps that you believe are isolated from and not quite dependent on other steps.
After discarding steps, if you find that without the discarded steps the full action steps lack coherence, you can optionally add new action steps in the place where you discard action steps, to make the full action steps look more coherent.
Unlike the discarded action steps, the new action steps you add must have a strong dependency on other existing steps.

Below are some examples of how to identify and discard isolated and independent action steps.
$few_shot_examples_step_2

Full action steps:
$model_output_step_1

$format Copy kept steps exactly.

Full action steps after discarding and adding steps:
";

const STEP_3: &str = "You will be given full action steps.
For each action step, independently infer all of its preconditions and effects which might comprise multiple sentences.
The precondition is the state that must be made true before action execution.
The effect is the state achieved after action execution.
Be as accurate and precise as possible.
Note that there is no need to make the precondition of step N identical to the effect of step N-1.

Full action steps:
$model_output_step_2

$format

Full action steps with preconditions and effects:
";

const STEP_4_1: &str = "You will be given full action steps with preconditions and effects.
Identify the action steps (along with their preconditions and effects) that you believe have preconditions and effects which are isolated from and not quite dependent on other steps' preconditions and effects.

Below are some examples of how to identify isolated and independent action steps.
$few_shot_examples_step_4.1

Full action steps with preconditions and effects:
$model_output_step_3

$format If no step is isolated, write \"none\".

Identified action steps with preconditions and effects:
";

const STEP_4_2: &str = "You will be given full action steps with preconditions and effects.
You will also be given identified action steps with preconditions and effects that are isolated from and not quite dependent on other steps' preconditions and effects.
Rethink and regenerate the preconditions and effects of these identified action steps, to make them more dependent on other steps' preconditions and effects than before.
The precondition is the state that must be made true before action execution.
The effect is the state achieved after action execution.
Be as accurate and precise as possible.

Full action steps with preconditions and effects:
$model_output_step_3

Identified action steps with preconditions and effects:
$model_output_step_4.1

$format

Identified action steps with newly generated preconditions and effects:
";

const STEP_4_3: &str = "You will be given full action steps with preconditions and effects.
You will also be given identified action steps with preconditions and effects that are isolated from and not quite dependent on other steps' preconditions and effects.
You will also be given identified action steps with newly generated preconditions and effects.
Categorize these identified action steps (with newly generated preconditions and effects) into the following two groups: (1) identified action steps whose newly generated preconditions and effects look dependent on other steps' preconditions and effects; (2) identified action steps whose newly generated preconditions and effects look not quite dependent on other steps' preconditions and effects.

Below are some examples of how to do this categorization.
$few_shot_examples_step_4.3

Full action steps with preconditions and effects:
$model_output_step_3

Identified action steps with preconditions and effects:
$model_output_step_4.1

Identified action steps with newly generated preconditions and effects:
$model_output_step_4.2

Output format: one line per identified step, \"(1) <action text>\" or \"(2) <action text>\", copying the action text exactly. Write nothing else.

Categorization:
";

const STEP_5_1: &str = "You will be given full action steps with preconditions and effects.
Find preconditions that are semantically not covered in any of the effects.
Semantic coverage means there exists at least one effect item that expresses the semantically equivalent meaning as the precondition item.

Full action steps with preconditions and effects:
$model_output_step_4.3_after_post_processing

$format Copy each item exactly. If every precondition is covered, write \"none\".

Preconditions that are semantically not covered in any of the effects:
";

const STEP_5_2: &str = "You will be given full action steps with preconditions and effects.
Find effects that are semantically not covered in any of the preconditions.
Semantic coverage means there exists at least one precondition item that expresses the semantically equivalent meaning as the effect item.

Full action steps with preconditions and effects:
$model_output_step_4.3_after_post_processing

$format Copy each item exactly. If every effect is covered, write \"none\".

Effects that are semantically not covered in any of the preconditions:
";

const VALID: &str = "You will be given some precondition items.
You will also be given some world-state items.
For each precondition item, determine if it is semantically covered by the world-state items.
Semantic coverage means there exists at least one world-state item that expresses the semantically equivalent meaning as the precondition item.
If all the precondition items are semantically covered, return TRUE; otherwise, return FALSE.

Precondition items:
$inferred_action_preconditions

World-state items:
$current_world_state

Output format: one line per precondition item, \"<precondition number>: <numbers of the covering world-state items, comma-separated>\", or \"<precondition number>: none\" when nothing covers it. Then a last line with only TRUE or FALSE.
";

const CONTRADICT: &str = "You will be given some effect items.
You will also be given some world-state items.
For each effect item, find all the world-state items that semantically contradict the effect item.

Effect items:
$inferred_action_effects

World-state items:
$current_world_state

Output format: one line per effect item, \"effect <effect number>: <numbers of the contradicting world-state items, comma-separated>\", or \"effect <effect number>: none\". Write nothing else.
";

const COVER: &str = "You will be given some query items.
You will also be given some candidate items.
For each query item, find all the candidate items that express the semantically equivalent meaning as the query item.

Query items:
$query_items

Candidate items:
$candidate_items

Output format: one line per query item, \"<query number>: <numbers of the equivalent candidate items, comma-separated>\", or \"<query number>: none\". Write nothing else.
";

const FEWSHOT_PRE: &str = "You will be given an action.
Infer all of its preconditions. The precondition is the state that must be made true before action execution.
Be as accurate and precise as possible.

Below are some examples.
$few_shot_examples

$task_context
Action: $action

$format

Preconditions:
";

const FEWSHOT_EFF: &str = "You will be given an action.
Infer all of its effects. The effect is the state achieved after action execution.
Be as accurate and precise as possible.

Below are some examples.
$few_shot_examples

$task_context
Action: $action

$format

Effects:
";

fn build() -> BTreeMap<&'static str, PromptTemplate> {
    let fill = |body: &str, format: &str| body.replace("$format", format);
    let entries = [
        (GENERATE, fill(STEP_1, LIST_FORMAT)),
        (PRUNE, fill(STEP_2, LIST_FORMAT)),
        (ANNOTATE, fill(STEP_3, BLOCK_FORMAT)),
        (IDENTIFY, fill(STEP_4_1, BLOCK_FORMAT)),
        (REGENERATE, fill(STEP_4_2, BLOCK_FORMAT)),
        (CATEGORIZE, STEP_4_3.to_string()),
        (UNCOVERED_PRECONDITIONS, fill(STEP_5_1, LIST_FORMAT)),
        (UNCOVERED_EFFECTS, fill(STEP_5_2, LIST_FORMAT)),
        (VALID_ACTION, VALID.to_string()),
        (CONTRADICTION, CONTRADICT.to_string()),
        (COVERAGE, COVER.to_string()),
        (FEWSHOT_PRECONDITIONS, fill(FEWSHOT_PRE, LIST_FORMAT)),
        (FEWSHOT_EFFECTS, fill(FEWSHOT_EFF, LIST_FORMAT)),
        (FINETUNED_INPUT, "$input".to_string()),
    ];
    entries
        .into_iter()
        .map(|(name, body)| (name, PromptTemplate::new(name, body)))
        .collect()
}

/// The template registered under `name`.
///
/// # Panics
/// On an unknown name; all names are the constants of this module.
pub fn get(name: &str) -> &'static PromptTemplate {
    static ALL: OnceLock<BTreeMap<&'static str, PromptTemplate>> = OnceLock::new();
    ALL.get_or_init(build)
        .get(name)
        .unwrap_or_else(|| panic!("unknown template {name}"))
}
