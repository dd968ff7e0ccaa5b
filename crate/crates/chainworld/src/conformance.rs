//! Checks that an inference endpoint speaks the chat-completions wire format
//! the gateway expects.

use std::time::Duration;

use chainworld_core::inference::{model_input, parse_inference_output, Direction};

use crate::gateway::wire::{first_choice_text, ChatRequest};
use crate::gateway::{agent, join_url, API_KEY_VAR};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, outcome: Result<String, String>) -> Self {
        match outcome {
            Ok(detail) => Self {
                name,
                passed: true,
                detail,
            },
            Err(detail) => Self {
                name,
                passed: false,
                detail,
            },
        }
    }
}

struct Client {
    agent: ureq::Agent,
    base_url: String,
    api_key: Option<String>,
}

impl Client {
    fn post(&self, body: &serde_json::Value) -> Result<(u16, String), String> {
        let mut request = self
            .agent
            .post(&join_url(&self.base_url, "chat/completions"));
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok((status, text))
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, String> {
        let body = serde_json::to_value(request).map_err(|e| e.to_string())?;
        let (status, text) = self.post(&body)?;
        if status != 200 {
            return Err(format!("status {status}: {text}"));
        }
        first_choice_text(&text).map_err(|e| e.to_string())
    }
}

/// The probe action used by every check.
pub const PROBE_ACTION: &str = "boil water in a pot";

/// Runs every check against `{base_url}`. Never panics on a bad endpoint;
/// each failure is reported in its result.
pub fn check_endpoint(base_url: &str, model: &str, timeout_secs: u64) -> Vec<CheckResult> {
    let client = Client {
        agent: agent(Duration::from_secs(timeout_secs.max(1))),
        base_url: base_url.into(),
        api_key: std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()),
    };
    let request = ChatRequest::user(
        model,
        &model_input(Direction::Precondition, PROBE_ACTION, None),
        0.0,
        None,
    );
    let mut results = Vec::new();

    let health = client
        .agent
        .get(&join_url(base_url, "health"))
        .call()
        .map_err(|e| e.to_string())
        .and_then(|r| match r.status().as_u16() {
            s if (200..300).contains(&s) => Ok(format!("status {s}")),
            s => Err(format!("status {s}")),
        });
    results.push(CheckResult::new("health", health));

    let first = client.complete(&request);
    let schema = first.clone().and_then(|text| {
        parse_inference_output(PROBE_ACTION, &text)
            .map(|items| format!("{} items", items.len()))
            .map_err(|e| format!("unusable output {text:?}: {e}"))
    });
    results.push(CheckResult::new("chat-schema", schema));

    let determinism = match first {
        Ok(a) => client.complete(&request).and_then(|b| {
            if a == b {
                Ok("identical replies at temperature 0".into())
            } else {
                Err(format!("replies differ: {a:?} vs {b:?}"))
            }
        }),
        Err(e) => Err(format!("no first reply: {e}")),
    };
    results.push(CheckResult::new("determinism", determinism));

    let malformed = client
        .post(&serde_json::json!({ "model": model }))
        .and_then(|(status, _)| {
            if (400..500).contains(&status) {
                Ok(format!("status {status}"))
            } else {
                Err(format!(
                    "expected a 4xx for a request without messages, got {status}"
                ))
            }
        });
    results.push(CheckResult::new("rejects-malformed", malformed));
    results
}
