//! Run configuration and resolution of its parts into live objects.

use std::path::Path;

use chainworld_core::inference::{CorpusLookup, Direction, InferenceBackend, InferenceQuery};
use chainworld_core::matcher::{
    Contradiction, CoverageTask, ExactMatcher, FixtureMatcher, FixtureTable, Matcher, MatcherKind,
};
use chainworld_core::metrics::{Embedder, HashedBowEmbedder};
use chainworld_core::{ActionPlan, ActionStep, Error as CoreError, Proposition};
use serde::{Deserialize, Serialize};

use crate::backends::{FewShotLlm, FinetunedEndpoint};
use crate::error::{Error, Result};
use crate::gateway::{BackendConfig, Gateway, RemoteEmbedder};
use crate::io::{read_json, sha256_json};
use crate::judge::LlmMatcher;
use crate::pipeline::PipelineConfig;

fn default_matcher() -> MatcherKind {
    MatcherKind::ExactNormalized
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceKind {
    #[default]
    CorpusLookup,
    FinetunedEndpoint,
    FewshotLlm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    pub kind: InferenceKind,
    pub preconditions_endpoint: Option<BackendConfig>,
    pub effects_endpoint: Option<BackendConfig>,
    /// Prefix the task description to each query.
    pub include_task: bool,
    /// Annotated corpus steps shown to the few-shot LLM.
    pub few_shot_count: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            kind: InferenceKind::CorpusLookup,
            preconditions_endpoint: None,
            effects_endpoint: None,
            include_task: false,
            few_shot_count: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    #[default]
    Hashed,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub dim: usize,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::Hashed,
            dim: HashedBowEmbedder::default().dim,
            base_url: None,
            model: None,
            timeout_secs: 60,
        }
    }
}

impl EmbedderConfig {
    pub fn build(&self) -> Result<AnyEmbedder> {
        match self.kind {
            EmbedderKind::Hashed => {
                if self.dim == 0 {
                    return Err(Error::Config("embedder dim must be positive".into()));
                }
                Ok(AnyEmbedder::Hashed(HashedBowEmbedder { dim: self.dim }))
            }
            EmbedderKind::Remote => {
                let (Some(url), Some(model)) = (&self.base_url, &self.model) else {
                    return Err(Error::Config(
                        "remote embedder requires base_url and model".into(),
                    ));
                };
                Ok(AnyEmbedder::Remote(RemoteEmbedder::new(
                    url,
                    model,
                    self.timeout_secs,
                )))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub backend: BackendConfig,
    /// Backend for the LLM judge; `backend` when unset.
    pub judge_backend: Option<BackendConfig>,
    #[serde(default = "default_matcher")]
    pub matcher: MatcherKind,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub pipeline: PipelineConfig,
    pub inference: InferenceConfig,
    pub embedder: EmbedderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendConfig::default(),
            judge_backend: None,
            matcher: default_matcher(),
            seed: None,
            jobs: 4,
            pipeline: PipelineConfig::default(),
            inference: InferenceConfig::default(),
            embedder: EmbedderConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Hash of the effective configuration, recorded in manifests.
    pub fn hash(&self) -> String {
        sha256_json(self)
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            Error::Usage("this command samples and needs --seed (or `seed` in the config)".into())
        })
    }
}

/// Parses `exact`, `llm` or `fixture:<path>`.
pub fn parse_matcher(spec: &str) -> Result<MatcherKind> {
    match spec {
        "exact" | "exact-normalized" => Ok(MatcherKind::ExactNormalized),
        "llm" | "llm-judge" => Ok(MatcherKind::LlmJudge),
        _ => match spec.strip_prefix("fixture:") {
            Some(path) if !path.is_empty() => Ok(MatcherKind::FixtureTable { path: path.into() }),
            _ => Err(Error::Usage(format!(
                "unknown matcher {spec:?}; expected exact, llm or fixture:<path>"
            ))),
        },
    }
}

/// A matcher chosen at run time.
#[derive(Debug, Clone)]
pub enum AnyMatcher<'g> {
    Exact(ExactMatcher),
    Fixture(FixtureMatcher),
    Llm(LlmMatcher<'g>),
}

impl<'g> AnyMatcher<'g> {
    /// `judge` is required for the LLM judge.
    pub fn build(kind: &MatcherKind, judge: Option<&'g Gateway>) -> Result<Self> {
        match kind {
            MatcherKind::ExactNormalized => Ok(Self::Exact(ExactMatcher)),
            MatcherKind::FixtureTable { path } => {
                let table: FixtureTable = read_json(Path::new(path))?;
                Ok(Self::Fixture(FixtureMatcher::from_table(&table)))
            }
            MatcherKind::LlmJudge => judge
                .map(|g| Self::Llm(LlmMatcher::new(g)))
                .ok_or_else(|| Error::Config("the LLM judge needs a backend".into())),
        }
    }
}

impl Matcher for AnyMatcher<'_> {
    fn matches(
        &self,
        task: CoverageTask,
        queries: &[Proposition],
        pool: &[Proposition],
    ) -> Result<Vec<Vec<usize>>, CoreError> {
        match self {
            Self::Exact(m) => m.matches(task, queries, pool),
            Self::Fixture(m) => m.matches(task, queries, pool),
            Self::Llm(m) => m.matches(task, queries, pool),
        }
    }

    fn contradictions(
        &self,
        effects: &[Proposition],
        state: &[Proposition],
    ) -> Result<Vec<Contradiction>, CoreError> {
        match self {
            Self::Exact(m) => m.contradictions(effects, state),
            Self::Fixture(m) => m.contradictions(effects, state),
            Self::Llm(m) => m.contradictions(effects, state),
        }
    }
}

/// An inference backend chosen at run time.
#[derive(Debug, Clone)]
pub enum AnyInference<'g> {
    Lookup(CorpusLookup),
    Finetuned(FinetunedEndpoint<'g>),
    FewShot(FewShotLlm<'g>),
}

impl InferenceBackend for AnyInference<'_> {
    fn infer_raw(
        &self,
        direction: Direction,
        query: &InferenceQuery<'_>,
    ) -> Result<Vec<String>, CoreError> {
        match self {
            Self::Lookup(b) => b.infer_raw(direction, query),
            Self::Finetuned(b) => b.infer_raw(direction, query),
            Self::FewShot(b) => b.infer_raw(direction, query),
        }
    }
}

/// Gateways a command may need, built once so borrowers can outlive
/// resolution.
#[derive(Debug, Default)]
pub struct Gateways {
    pub main: Option<Gateway>,
    pub judge: Option<Gateway>,
    pub preconditions: Option<Gateway>,
    pub effects: Option<Gateway>,
}

impl Gateways {
    /// Builds the gateways `config` refers to. The main backend is built only
    /// when something uses it.
    pub fn for_config(config: &RunConfig, needs_main: bool) -> Result<Self> {
        let judge_needed = config.matcher == MatcherKind::LlmJudge;
        let inference = &config.inference;
        let fewshot = inference.kind == InferenceKind::FewshotLlm;
        let main = if needs_main || fewshot || (judge_needed && config.judge_backend.is_none()) {
            Some(Gateway::from_config(config.backend.clone())?)
        } else {
            None
        };
        let judge = match (&config.judge_backend, judge_needed) {
            (Some(b), true) => Some(Gateway::from_config(b.clone())?),
            _ => None,
        };
        let (preconditions, effects) = if inference.kind == InferenceKind::FinetunedEndpoint {
            let (Some(pre), Some(eff)) = (
                &inference.preconditions_endpoint,
                &inference.effects_endpoint,
            ) else {
                return Err(Error::Config(
                    "finetuned-endpoint inference requires preconditions_endpoint and effects_endpoint".into(),
                ));
            };
            (
                Some(Gateway::from_config(pre.clone())?),
                Some(Gateway::from_config(eff.clone())?),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            main,
            judge,
            preconditions,
            effects,
        })
    }

    pub fn judge(&self) -> Option<&Gateway> {
        self.judge.as_ref().or(self.main.as_ref())
    }

    pub fn matcher(&self, config: &RunConfig) -> Result<AnyMatcher<'_>> {
        AnyMatcher::build(&config.matcher, self.judge())
    }

    /// Inference over `corpus`: the lookup indexes it, the few-shot LLM takes
    /// its first annotated steps as examples.
    pub fn inference(
        &self,
        config: &InferenceConfig,
        corpus: &[ActionPlan],
    ) -> Result<AnyInference<'_>> {
        match config.kind {
            InferenceKind::CorpusLookup => {
                let lookup = CorpusLookup::from_corpus(corpus);
                for c in lookup.collisions() {
                    log::warn!(
                        "action {c:?} has different annotations in the corpus; the first is used"
                    );
                }
                Ok(AnyInference::Lookup(lookup))
            }
            InferenceKind::FinetunedEndpoint => match (&self.preconditions, &self.effects) {
                (Some(preconditions), Some(effects)) => {
                    Ok(AnyInference::Finetuned(FinetunedEndpoint {
                        preconditions,
                        effects,
                    }))
                }
                _ => Err(Error::Config(
                    "fine-tuned endpoints were not configured".into(),
                )),
            },
            InferenceKind::FewshotLlm => {
                let gateway = self
                    .main
                    .as_ref()
                    .ok_or_else(|| Error::Config("few-shot inference needs a backend".into()))?;
                let examples: Vec<ActionStep> = corpus
                    .iter()
                    .flat_map(|p| &p.steps)
                    .filter(|s| s.is_annotated())
                    .take(config.few_shot_count)
                    .cloned()
                    .collect();
                if examples.len() < config.few_shot_count {
                    return Err(Error::Config(format!(
                        "{} few-shot examples requested, corpus has {}",
                        config.few_shot_count,
                        examples.len()
                    )));
                }
                Ok(AnyInference::FewShot(FewShotLlm::new(gateway, &examples)))
            }
        }
    }
}

pub enum AnyEmbedder {
    Hashed(HashedBowEmbedder),
    Remote(RemoteEmbedder),
}

impl Embedder for AnyEmbedder {
    fn embed(&self, sentences: &[String]) -> Result<Vec<Vec<f64>>, CoreError> {
        match self {
            Self::Hashed(e) => e.embed(sentences),
            Self::Remote(e) => e.embed(sentences),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matcher_specs() {
        assert_eq!(
            parse_matcher("exact").unwrap(),
            MatcherKind::ExactNormalized
        );
        assert_eq!(parse_matcher("llm").unwrap(), MatcherKind::LlmJudge);
        assert_eq!(
            parse_matcher("fixture:t.json").unwrap(),
            MatcherKind::FixtureTable {
                path: "t.json".into()
            }
        );
        assert!(matches!(parse_matcher("fuzzy"), Err(Error::Usage(_))));
        assert!(parse_matcher("fixture:").is_err());
    }

    #[test]
    fn config_round_trip_and_strictness() {
        let config = RunConfig::default();
        let json = serde_json::to_string(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
        assert_eq!(back.hash(), config.hash());
        let partial: RunConfig =
            serde_json::from_str(r#"{"matcher":{"kind":"llm-judge"},"seed":3}"#).unwrap();
        assert_eq!(partial.matcher, MatcherKind::LlmJudge);
        assert_eq!(partial.jobs, 4);
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede":3}"#).is_err());
        assert!(RunConfig::default().require_seed().is_err());
    }
}
