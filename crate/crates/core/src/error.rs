use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("proposition is empty after normalization")]
    EmptyProposition,

    #[error("state delta adds and deletes the same item: {0:?}")]
    OverlappingDelta(String),

    #[error("duplicate step id {0:?} in plan")]
    DuplicateStepId(String),

    #[error("step has no action text")]
    EmptyAction,

    #[error("prompt template {template:?} is missing a binding for ${slot}")]
    MissingSlot { template: String, slot: String },

    #[error("prompt template {template:?} is inconsistent: {reason}")]
    InvalidTemplate { template: String, reason: String },

    #[error("no items could be parsed from the response")]
    EmptyList,

    #[error("action {0:?} is not in the reference corpus")]
    UnknownAction(String),

    #[error("inference backend returned nothing for {0:?}")]
    InferenceEmpty(String),

    #[error("step {0:?} is missing preconditions or effects")]
    AnnotationIncomplete(String),

    #[error("could not parse matcher judgment: {0}")]
    MalformedJudgment(String),

    #[error("action {action:?} is not valid in this state ({} unmatched preconditions)", unmatched.len())]
    InvalidAction {
        action: String,
        unmatched: Vec<String>,
    },

    #[error("need {needed} negative cases but only {available} exist")]
    InsufficientNegatives { needed: usize, available: usize },

    #[error("need {needed} positive cases but only {available} exist")]
    InsufficientPositives { needed: usize, available: usize },

    #[error("effect inference failed for {} step(s): {}", failed.len(), failed.join(", "))]
    PartialPool { failed: Vec<String> },

    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A remote backend (LLM, embedder) failed; the message is the backend's own error.
    #[error("backend error: {0}")]
    Backend(String),
}
