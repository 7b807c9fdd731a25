//! Text generators: a chat-completions HTTP client, a scripted replayer and an
//! echo stub.

use crate::feedback::{render_template, Directive};
use crate::protocol::{OutputMetadata, RawBackendOutput, TutorResponse};
use crate::scoring::Status;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub session_id: String,
    pub turn_index: usize,
    pub messages: Vec<ChatMessage>,
    /// Planned move and its material; template renderers use it, HTTP ignores it.
    pub directive: Option<Directive>,
}

#[derive(Debug, Error, PartialEq)]
pub enum BackendError {
    #[error("request invalid: {0}")]
    InvalidRequest(String),
    #[error("backend timed out after {retries} retries")]
    Timeout { retries: u32 },
    #[error("backend rejected credentials (HTTP {status})")]
    AuthFailure { status: u16 },
    #[error("backend rate limited after {retries} retries")]
    RateLimited { retries: u32 },
    #[error("backend server error HTTP {status} after {retries} retries")]
    Server { status: u16, retries: u32 },
    #[error("backend returned HTTP {status}")]
    Http { status: u16 },
    #[error("transport error after {retries} retries: {message}")]
    Transport { message: String, retries: u32 },
    #[error("backend reply malformed: {0}")]
    MalformedReply(String),
    #[error("fixture exhausted: turn {turn_index} requested, {available} available")]
    FixtureExhausted { turn_index: usize, available: usize },
    #[error("no directive supplied to the template renderer")]
    MissingDirective,
}

impl BackendError {
    pub fn retries(&self) -> u32 {
        match self {
            Self::Timeout { retries }
            | Self::RateLimited { retries }
            | Self::Server { retries, .. }
            | Self::Transport { retries, .. } => *retries,
            _ => 0,
        }
    }

    fn retryable(&self) -> bool {
        matches!(
            self,
            Self::Timeout { .. } | Self::RateLimited { .. } | Self::Server { .. } | Self::Transport { .. }
        )
    }

    fn with_retries(self, n: u32) -> Self {
        match self {
            Self::Timeout { .. } => Self::Timeout { retries: n },
            Self::RateLimited { .. } => Self::RateLimited { retries: n },
            Self::Server { status, .. } => Self::Server { status, retries: n },
            Self::Transport { message, .. } => Self::Transport { message, retries: n },
            other => other,
        }
    }
}

pub trait Generator: Send + Sync {
    fn id(&self) -> &str;
    fn generate(&self, request: &GenerationRequest) -> Result<RawBackendOutput, BackendError>;
}

/// The message list must open with exactly one system message.
pub fn check_request(request: &GenerationRequest) -> Result<(), BackendError> {
    let systems = request.messages.iter().filter(|m| m.role == Role::System).count();
    if request.messages.first().map(|m| m.role) != Some(Role::System) || systems != 1 {
        return Err(BackendError::InvalidRequest(
            "messages must start with exactly one system message".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub temperature: f64,
    pub backoff_base_ms: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model_name: "gpt-4o".into(),
            api_key_env: "TUTOR_LLM_API_KEY".into(),
            timeout_secs: 30.0,
            max_retries: 3,
            temperature: 0.2,
            backoff_base_ms: 500,
        }
    }
}

/// Backoff before retry `attempt` (0-based): base * 2^attempt plus up to half
/// of that again as jitter.
pub fn backoff_delay(base_ms: u64, attempt: u32) -> Duration {
    let delay = base_ms.saturating_mul(1u64 << attempt.min(16));
    let jitter = if delay > 1 { rand::rng().random_range(0..=delay / 2) } else { 0 };
    Duration::from_millis(delay + jitter)
}

/// OpenAI-compatible chat-completions client.
///
/// The blocking reqwest client owns a private runtime and panics if dropped
/// inside an async context, so one is built per `generate` call. That keeps
/// the generator safe to hold in async servers.
pub struct HttpGenerator {
    config: GeneratorConfig,
    id: String,
}

impl HttpGenerator {
    pub fn new(config: GeneratorConfig) -> Result<Self, BackendError> {
        if !(config.timeout_secs.is_finite() && config.timeout_secs > 0.0) {
            return Err(BackendError::InvalidRequest(format!("timeout_secs must be positive, got {}", config.timeout_secs)));
        }
        let id = format!("http:{}", config.model_name);
        Ok(Self { config, id })
    }

    fn client(&self) -> Result<reqwest::blocking::Client, BackendError> {
        reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(self.config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport { message: e.to_string(), retries: 0 })
    }

    fn attempt(&self, client: &reqwest::blocking::Client, body: &Value) -> Result<String, BackendError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = client.post(url).json(body);
        // read at call time so rotated keys take effect; never logged
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout { retries: 0 }
            } else {
                BackendError::Transport { message: e.to_string(), retries: 0 }
            }
        })?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => return Err(BackendError::AuthFailure { status }),
            429 => return Err(BackendError::RateLimited { retries: 0 }),
            500..=599 => return Err(BackendError::Server { status, retries: 0 }),
            _ => return Err(BackendError::Http { status }),
        }
        let reply: Value = resp.json().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout { retries: 0 }
            } else {
                BackendError::MalformedReply(e.to_string())
            }
        })?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| BackendError::MalformedReply("missing choices[0].message.content".into()))
    }
}

impl Generator for HttpGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, request: &GenerationRequest) -> Result<RawBackendOutput, BackendError> {
        check_request(request)?;
        let body = json!({
            "model": self.config.model_name,
            "messages": request.messages,
            "temperature": self.config.temperature,
        });
        let client = self.client()?;
        let started = Instant::now();
        let mut attempt = 0;
        loop {
            match self.attempt(&client, &body) {
                Ok(text) => {
                    return Ok(RawBackendOutput {
                        text,
                        metadata: OutputMetadata {
                            backend_id: self.id.clone(),
                            latency_ms: started.elapsed().as_millis() as u64,
                            retries: attempt,
                        },
                    })
                }
                Err(e) if e.retryable() && attempt < self.config.max_retries => {
                    tracing::warn!(session = %request.session_id, turn = request.turn_index, attempt, error = %e, "retrying backend call");
                    std::thread::sleep(backoff_delay(self.config.backoff_base_ms, attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e.with_retries(attempt)),
            }
        }
    }
}

/// Fixture file contents: one list shared by every session, or a list per
/// session id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fixtures {
    Shared(Vec<String>),
    PerSession(BTreeMap<String, Vec<String>>),
}

impl Fixtures {
    pub fn from_json_str(input: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(input)
    }

    fn lookup(&self, session_id: &str, turn_index: usize) -> Result<&str, BackendError> {
        let list: &[String] = match self {
            Self::Shared(list) => list,
            Self::PerSession(map) => map.get(session_id).map_or(&[], Vec::as_slice),
        };
        list.get(turn_index).map(String::as_str).ok_or(BackendError::FixtureExhausted {
            turn_index,
            available: list.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptSource {
    Fixtures(Fixtures),
    /// Render the canned template for the request's directive.
    Templates,
}

/// Deterministic generator for tests, demos and replay.
pub struct ScriptedGenerator {
    source: ScriptSource,
}

impl ScriptedGenerator {
    pub fn from_fixtures(fixtures: Fixtures) -> Self {
        Self { source: ScriptSource::Fixtures(fixtures) }
    }

    pub fn templates() -> Self {
        Self { source: ScriptSource::Templates }
    }
}

impl Generator for ScriptedGenerator {
    fn id(&self) -> &str {
        match self.source {
            ScriptSource::Fixtures(_) => "scripted:fixtures",
            ScriptSource::Templates => "scripted:templates",
        }
    }

    fn generate(&self, request: &GenerationRequest) -> Result<RawBackendOutput, BackendError> {
        check_request(request)?;
        let text = match &self.source {
            ScriptSource::Fixtures(f) => f.lookup(&request.session_id, request.turn_index)?.to_owned(),
            ScriptSource::Templates => {
                let d = request.directive.as_ref().ok_or(BackendError::MissingDirective)?;
                render_template(d).to_json()
            }
        };
        Ok(RawBackendOutput {
            text,
            metadata: OutputMetadata { backend_id: self.id().to_owned(), latency_ms: 0, retries: 0 },
        })
    }
}

/// Always answers with the same minimal valid reply.
#[derive(Debug, Default, Clone, Copy)]
pub struct EchoGenerator;

impl EchoGenerator {
    pub fn canned() -> TutorResponse {
        TutorResponse {
            feedback_brief: "Thanks for your answer.".into(),
            feedback_detailed: "I read what you wrote.".into(),
            follow_up: "What else can you tell me?".into(),
            justification: "Echo backend reply.".into(),
            scores: None,
            status: Status::Active,
            expectation_matches: BTreeMap::new(),
            misconception_matches: BTreeMap::new(),
        }
    }
}

impl Generator for EchoGenerator {
    fn id(&self) -> &str {
        "echo"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<RawBackendOutput, BackendError> {
        check_request(request)?;
        Ok(RawBackendOutput {
            text: Self::canned().to_json(),
            metadata: OutputMetadata { backend_id: "echo".into(), latency_ms: 0, retries: 0 },
        })
    }
}
