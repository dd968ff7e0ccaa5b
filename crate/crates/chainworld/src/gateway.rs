//! Text-generation backends behind one `complete` call, with a
//! content-addressed cache, bounded concurrency and retries.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use chainworld_core::metrics::Embedder;
use chainworld_core::prompt::{render_template, PromptTemplate};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const API_KEY_VAR: &str = "CHAINWORLD_API_KEY";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    #[default]
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub base_url: Option<String>,
    pub model_name: Option<String>,
    /// Used when a request does not set its own temperature.
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub cache_dir: Option<PathBuf>,
    /// JSON map fingerprint -> text, for the scripted backend.
    pub script_path: Option<PathBuf>,
    pub max_in_flight: usize,
    pub retry_base_delay_ms: u64,
    /// Forwarded to remote endpoints; not part of the fingerprint.
    pub seed: Option<u64>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Scripted,
            base_url: None,
            model_name: None,
            temperature: 0.0,
            max_retries: 3,
            timeout_secs: 120,
            cache_dir: None,
            script_path: None,
            max_in_flight: 4,
            retry_base_delay_ms: 500,
            seed: None,
        }
    }
}

impl BackendConfig {
    pub fn scripted(script_path: impl Into<PathBuf>) -> Self {
        Self {
            script_path: Some(script_path.into()),
            ..Self::default()
        }
    }

    pub fn remote(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::Remote,
            base_url: Some(base_url.into()),
            model_name: Some(model_name.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::Config(format!(
                "temperature {} must be >= 0",
                self.temperature
            )));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be at least 1".into()));
        }
        if self.kind == BackendKind::Remote {
            if self.base_url.as_deref().is_none_or(str::is_empty) {
                return Err(Error::Config("remote backend requires base_url".into()));
            }
            if self.model_name.as_deref().is_none_or(str::is_empty) {
                return Err(Error::Config("remote backend requires model_name".into()));
            }
        }
        Ok(())
    }

    fn model(&self) -> &str {
        self.model_name.as_deref().unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub request_fingerprint: String,
    pub text: String,
    pub backend_kind: BackendKind,
    pub cached: bool,
}

#[derive(Serialize)]
struct FingerprintInput<'a> {
    template: &'a str,
    bindings: &'a BTreeMap<String, String>,
    model: &'a str,
    temperature: f64,
}

/// SHA-256 over canonical JSON of (template name, bindings, model,
/// temperature). Bindings are a sorted map, so key order never matters.
pub fn fingerprint(
    template_name: &str,
    bindings: &BTreeMap<String, String>,
    model: &str,
    temperature: f64,
) -> String {
    let canonical = serde_json::to_vec(&FingerprintInput {
        template: template_name,
        bindings,
        model,
        temperature,
    })
    .expect("string maps always serialize");
    hex::encode(Sha256::digest(&canonical))
}

/// Everything a backend may need to answer one request.
#[derive(Debug, Clone, Copy)]
pub struct Call<'a> {
    pub fingerprint: &'a str,
    pub template_name: &'a str,
    pub bindings: &'a BTreeMap<String, String>,
    pub prompt: &'a str,
    pub model: &'a str,
    pub temperature: f64,
    pub seed: Option<u64>,
}

pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn call(&self, call: &Call<'_>) -> Result<String>;
}

/// Answers from a fixed fingerprint -> text map.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    script: BTreeMap<String, String>,
}

impl ScriptedBackend {
    pub fn new(script: BTreeMap<String, String>) -> Self {
        Self { script }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let script = serde_json::from_str(&raw).map_err(|source| Error::Json {
            location: path.display().to_string(),
            source,
        })?;
        Ok(Self::new(script))
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }
}

impl Backend for ScriptedBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn call(&self, call: &Call<'_>) -> Result<String> {
        self.script
            .get(call.fingerprint)
            .cloned()
            .ok_or_else(|| Error::ScriptMiss(call.fingerprint.into()))
    }
}

/// The chat-completions request and response shapes.
pub mod wire {
    use serde::{Deserialize, Serialize};

    use crate::error::{Error, Result};

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct Message {
        pub role: String,
        pub content: String,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct ChatRequest {
        pub model: String,
        pub messages: Vec<Message>,
        pub temperature: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub seed: Option<u64>,
    }

    impl ChatRequest {
        pub fn user(model: &str, content: &str, temperature: f64, seed: Option<u64>) -> Self {
            Self {
                model: model.into(),
                messages: vec![Message {
                    role: "user".into(),
                    content: content.into(),
                }],
                temperature,
                seed,
            }
        }
    }

    /// The text of the first choice.
    pub fn first_choice_text(body: &str) -> Result<String> {
        let value: serde_json::Value = serde_json::from_str(body)
            .map_err(|e| Error::MalformedResponse(format!("not JSON: {e}")))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(String::from)
            .ok_or_else(|| Error::MalformedResponse("missing choices[0].message.content".into()))
    }

    /// A minimal valid response body, as servers are expected to send.
    pub fn response_body(model: &str, content: &str) -> String {
        serde_json::json!({
            "object": "chat.completion",
            "model": model,
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": content},
                "finish_reason": "stop"
            }]
        })
        .to_string()
    }
}

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

pub(crate) fn join_url(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path)
}

enum Attempt {
    Done(String),
    Retry(String),
}

/// POSTs to `{base_url}/chat/completions`.
pub struct RemoteBackend {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
    max_retries: u32,
    base_delay: Duration,
}

impl RemoteBackend {
    pub fn new(config: &BackendConfig) -> Result<Self> {
        config.validate()?;
        let base = config.base_url.as_deref().unwrap_or_default();
        Ok(Self {
            agent: agent(Duration::from_secs(config.timeout_secs.max(1))),
            url: join_url(base, "chat/completions"),
            api_key: std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()),
            max_retries: config.max_retries,
            base_delay: Duration::from_millis(config.retry_base_delay_ms),
        })
    }

    fn attempt(&self, body: &wire::ChatRequest) -> Result<Attempt> {
        let mut request = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = match request.send_json(body) {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Retry(e.to_string())),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Ok(Attempt::Retry(format!("reading body: {e}"))),
        };
        match status {
            200..=299 => wire::first_choice_text(&text).map(Attempt::Done),
            429 | 500..=599 => Ok(Attempt::Retry(format!("status {status}"))),
            _ => Err(Error::BackendRejected { status, body: text }),
        }
    }
}

impl Backend for RemoteBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }

    fn call(&self, call: &Call<'_>) -> Result<String> {
        let body = wire::ChatRequest::user(call.model, call.prompt, call.temperature, call.seed);
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                let delay = self
                    .base_delay
                    .saturating_mul(1u32 << (attempt - 1).min(16));
                log::warn!("retrying {} in {delay:?} ({last})", &call.fingerprint[..12]);
                std::thread::sleep(delay);
            }
            match self.attempt(&body)? {
                Attempt::Done(text) => return Ok(text),
                Attempt::Retry(reason) => last = reason,
            }
        }
        Err(Error::BackendUnreachable {
            attempts: self.max_retries + 1,
            last,
        })
    }
}

/// Counting semaphore bounding in-flight backend calls.
struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    fingerprint: String,
    template: String,
    text: String,
}

/// Renders templates and answers them through a backend, caching by
/// fingerprint in memory and, when `cache_dir` is set, on disk.
pub struct Gateway {
    config: BackendConfig,
    backend: Box<dyn Backend>,
    memory: Mutex<HashMap<String, String>>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    in_flight: Semaphore,
    backend_calls: AtomicU64,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn from_config(config: BackendConfig) -> Result<Self> {
        config.validate()?;
        let backend: Box<dyn Backend> = match config.kind {
            BackendKind::Remote => Box::new(RemoteBackend::new(&config)?),
            BackendKind::Scripted => {
                let path = config
                    .script_path
                    .as_deref()
                    .ok_or_else(|| Error::Config("scripted backend requires script_path".into()))?;
                Box::new(ScriptedBackend::from_path(path)?)
            }
        };
        Self::with_backend(config, backend)
    }

    pub fn with_backend(config: BackendConfig, backend: Box<dyn Backend>) -> Result<Self> {
        config.validate()?;
        if let Some(dir) = &config.cache_dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let in_flight = Semaphore::new(config.max_in_flight);
        Ok(Self {
            config,
            backend,
            memory: Mutex::new(HashMap::new()),
            locks: Mutex::new(HashMap::new()),
            in_flight,
            backend_calls: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Number of requests that reached the backend (cache misses).
    pub fn backend_calls(&self) -> u64 {
        self.backend_calls.load(Ordering::Relaxed)
    }

    pub fn fingerprint_for(
        &self,
        template: &PromptTemplate,
        bindings: &BTreeMap<String, String>,
        temperature: Option<f64>,
    ) -> String {
        let t = temperature.unwrap_or(self.config.temperature);
        fingerprint(template.name(), bindings, self.config.model(), t)
    }

    fn cache_path(&self, fp: &str) -> Option<PathBuf> {
        self.config
            .cache_dir
            .as_ref()
            .map(|d| d.join(format!("{fp}.json")))
    }

    fn read_disk(&self, fp: &str) -> Result<Option<String>> {
        let Some(path) = self.cache_path(fp) else {
            return Ok(None);
        };
        match fs::read_to_string(&path) {
            Ok(raw) => {
                let entry: CacheEntry =
                    serde_json::from_str(&raw).map_err(|source| Error::Json {
                        location: path.display().to_string(),
                        source,
                    })?;
                Ok(Some(entry.text))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    fn write_disk(&self, fp: &str, template: &str, text: &str) -> Result<()> {
        let Some(path) = self.cache_path(fp) else {
            return Ok(());
        };
        let entry = CacheEntry {
            fingerprint: fp.into(),
            template: template.into(),
            text: text.into(),
        };
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let body = serde_json::to_vec_pretty(&entry).expect("cache entries serialize");
        fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    fn lock_for(&self, fp: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(fp.to_string()).or_default().clone()
    }

    /// Renders `template` and returns the completion, from cache when
    /// possible. `temperature` overrides the configured default.
    pub fn complete(
        &self,
        template: &PromptTemplate,
        bindings: &BTreeMap<String, String>,
        temperature: Option<f64>,
    ) -> Result<Completion> {
        let prompt = render_template(template, bindings)?;
        let temperature = temperature.unwrap_or(self.config.temperature);
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(Error::Config(format!(
                "temperature {temperature} must be >= 0"
            )));
        }
        let fp = fingerprint(template.name(), bindings, self.config.model(), temperature);
        let lock = self.lock_for(&fp);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let done = |text: String, cached: bool| Completion {
            request_fingerprint: fp.clone(),
            text,
            backend_kind: self.backend.kind(),
            cached,
        };

        if let Some(text) = self
            .memory
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(&fp)
        {
            return Ok(done(text.clone(), true));
        }
        if let Some(text) = self.read_disk(&fp)? {
            self.memory
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .insert(fp.clone(), text.clone());
            return Ok(done(text, true));
        }

        let text = {
            let _permit = self.in_flight.acquire();
            self.backend_calls.fetch_add(1, Ordering::Relaxed);
            log::debug!("{} -> backend ({})", template.name(), &fp[..12]);
            self.backend.call(&Call {
                fingerprint: &fp,
                template_name: template.name(),
                bindings,
                prompt: &prompt,
                model: self.config.model(),
                temperature,
                seed: self.config.seed,
            })?
        };
        self.write_disk(&fp, template.name(), &text)?;
        self.memory
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(fp.clone(), text.clone());
        Ok(done(text, false))
    }
}

/// Sentence embeddings from an `{base_url}/embeddings` endpoint.
pub struct RemoteEmbedder {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
}

impl RemoteEmbedder {
    pub fn new(base_url: &str, model: &str, timeout_secs: u64) -> Self {
        Self {
            agent: agent(Duration::from_secs(timeout_secs.max(1))),
            url: join_url(base_url, "embeddings"),
            model: model.into(),
            api_key: std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()),
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, sentences: &[String]) -> chainworld_core::Result<Vec<Vec<f64>>> {
        use chainworld_core::Error as CoreError;
        let unavailable = |msg: String| CoreError::EmbedderUnavailable(msg);
        let mut request = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(serde_json::json!({"model": self.model, "input": sentences}))
            .map_err(|e| unavailable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(unavailable(format!("status {}", response.status())));
        }
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| unavailable(e.to_string()))?;
        #[derive(Deserialize)]
        struct Item {
            embedding: Vec<f64>,
        }
        #[derive(Deserialize)]
        struct Reply {
            data: Vec<Item>,
        }
        let reply: Reply = serde_json::from_str(&body).map_err(|e| unavailable(e.to_string()))?;
        if reply.data.len() != sentences.len() {
            return Err(unavailable(format!(
                "{} embeddings for {} sentences",
                reply.data.len(),
                sentences.len()
            )));
        }
        Ok(reply.data.into_iter().map(|i| i.embedding).collect())
    }
}
