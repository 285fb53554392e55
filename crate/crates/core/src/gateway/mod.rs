//! Chat-completion interface over live, replay and scripted backends.
//!
//! Nothing here interprets reply content; that is the parser's job.

mod live;
mod replay;

use std::collections::VecDeque;
use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use live::{ChatRequest, LiveBackend, API_KEY_VAR};
pub use replay::{read_transcript, ReplayBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self { role, content: content.into() }
    }
}

/// Ordered chat history: an optional leading system message, then turns
/// alternating user, assistant, user, ...
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Conversation {
    messages: Vec<Message>,
}

impl Conversation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps and validates a message list.
    pub fn from_messages(messages: Vec<Message>) -> Result<Self, GatewayError> {
        let conv = Self { messages };
        conv.validate()?;
        Ok(conv)
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Appends without validating; use [`Conversation::validate`] before
    /// sending.
    pub fn push(&mut self, message: Message) {
        self.messages.push(message);
    }

    pub fn count(&self, role: Role) -> usize {
        self.messages.iter().filter(|m| m.role == role).count()
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let invalid = |reason: String| Err(GatewayError::InvalidConversation(reason));
        let Some(first) = self.messages.first() else {
            return invalid("conversation is empty".into());
        };
        let skip = usize::from(first.role == Role::System);
        for (i, m) in self.messages.iter().enumerate().skip(skip) {
            let expected = if (i - skip) % 2 == 0 { Role::User } else { Role::Assistant };
            if m.role != expected {
                return invalid(format!("message {i} has role {}, expected {expected}", m.role));
            }
        }
        Ok(())
    }

    /// Ready to send: valid and ending on a user turn.
    pub fn validate_request(&self) -> Result<(), GatewayError> {
        self.validate()?;
        match self.messages.last() {
            Some(m) if m.role == Role::User => Ok(()),
            _ => Err(GatewayError::InvalidConversation("request must end with a user message".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelReply {
    pub content: String,
    pub backend_id: String,
    pub latency_ms: u64,
    #[serde(default)]
    pub usage: Option<Usage>,
    /// Set when the backend reported an explicit refusal; only then may
    /// `content` be empty.
    #[serde(default)]
    pub refusal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    #[default]
    Replay,
    Scripted,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

fn default_backoff() -> u64 {
    1000
}

/// Backend settings. The credential never lives here: live backends read it
/// from `DELF_API_KEY`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(default)]
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Also part of the replay request hash; `None` in replay means "as
    /// recorded".
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// First retry delay; doubles on every further retry.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default)]
    pub transcript: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::default(),
            endpoint: None,
            model: None,
            temperature: 0.0,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            transcript: None,
        }
    }
}

impl BackendConfig {
    pub fn replay(transcript: impl Into<PathBuf>) -> Self {
        Self { kind: BackendKind::Replay, transcript: Some(transcript.into()), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidConfig(m.to_string()));
        if !(self.temperature >= 0.0) {
            return bad("temperature must be >= 0");
        }
        if !(self.timeout_secs > 0.0) {
            return bad("timeout must be positive");
        }
        match self.kind {
            BackendKind::Live if self.endpoint.is_none() => bad("live backend needs an endpoint"),
            BackendKind::Live if self.model.is_none() => bad("live backend needs a model name"),
            BackendKind::Replay => match &self.transcript {
                Some(path) if path.is_file() => Ok(()),
                Some(path) => bad(&format!("transcript {} does not exist", path.display())),
                None => bad("replay backend needs a transcript path"),
            },
            _ => Ok(()),
        }
    }

    /// Opens the configured backend. `resume_at` skips that many recorded
    /// exchanges (replay only), so a reloaded session continues where it
    /// stopped.
    pub fn open(&self, resume_at: usize) -> Result<Box<dyn ChatBackend>, GatewayError> {
        self.validate()?;
        match self.kind {
            BackendKind::Live => Ok(Box::new(LiveBackend::from_env(self.clone())?)),
            BackendKind::Replay => {
                let path = self.transcript.as_ref().expect("validated");
                Ok(Box::new(ReplayBackend::open(path, self.model.clone())?.with_cursor(resume_at)))
            }
            BackendKind::Scripted => Err(GatewayError::InvalidConfig(
                "scripted backends are built in code, not from configuration".into(),
            )),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport failure: {0}")]
    TransportFailure(String),
    #[error("conversation diverges from transcript at exchange {index}")]
    ReplayMismatch { index: usize, expected: String, actual: String },
    #[error("transcript exhausted after {0} exchange(s)")]
    ReplayExhausted(usize),
    #[error("missing credential: set {API_KEY_VAR}")]
    MissingCredential,
    #[error("invalid conversation: {0}")]
    InvalidConversation(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
    #[error("transcript storage: {0}")]
    Storage(String),
}

pub trait ChatBackend: Send {
    fn id(&self) -> &str;

    /// One blocking completion for a conversation ending on a user turn.
    fn complete(&mut self, conv: &Conversation) -> Result<ModelReply, GatewayError>;

    /// Model name recorded alongside requests.
    fn model(&self) -> Option<&str> {
        None
    }
}

/// Replay key: SHA-256 over the model name and the ordered roles and
/// contents, each length-prefixed.
pub fn request_hash(conv: &Conversation, model: &str) -> String {
    let mut h = Sha256::new();
    let mut field = |bytes: &[u8]| {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    };
    field(model.as_bytes());
    for m in conv.messages() {
        field(m.role.to_string().as_bytes());
        field(m.content.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Replies queued in code, handed out in order.
pub struct ScriptedBackend {
    replies: VecDeque<String>,
    served: usize,
    model: String,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self { replies: replies.into_iter().map(Into::into).collect(), served: 0, model: "scripted".into() }
    }

    /// Name reported to recorders.
    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }
}

impl ChatBackend for ScriptedBackend {
    fn id(&self) -> &str {
        "scripted"
    }

    fn complete(&mut self, conv: &Conversation) -> Result<ModelReply, GatewayError> {
        conv.validate_request()?;
        let content = self.replies.pop_front().ok_or(GatewayError::ReplayExhausted(self.served))?;
        self.served += 1;
        Ok(ModelReply { content, backend_id: "scripted".into(), latency_ms: 0, usage: None, refusal: false })
    }

    fn model(&self) -> Option<&str> {
        Some(&self.model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request_hash: String,
    pub request: ChatRequest,
    pub reply: ModelReply,
}

/// Appends one exchange to a JSON Lines transcript.
pub fn record(conv: &Conversation, model: &str, reply: &ModelReply, transcript: &Path) -> Result<(), GatewayError> {
    let entry = TranscriptEntry {
        request_hash: request_hash(conv, model),
        request: ChatRequest::new(model, conv, None),
        reply: reply.clone(),
    };
    let line = serde_json::to_string(&entry).expect("transcript entries always serialize");
    let storage = |e: std::io::Error| GatewayError::Storage(format!("{}: {e}", transcript.display()));
    let mut file = OpenOptions::new().create(true).append(true).open(transcript).map_err(storage)?;
    writeln!(file, "{line}").map_err(storage)
}

/// Passes requests through and appends every successful exchange.
pub struct Recorder<B> {
    inner: B,
    transcript: PathBuf,
}

impl<B: ChatBackend> Recorder<B> {
    pub fn new(inner: B, transcript: impl Into<PathBuf>) -> Self {
        Self { inner, transcript: transcript.into() }
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: ChatBackend> ChatBackend for Recorder<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&mut self, conv: &Conversation) -> Result<ModelReply, GatewayError> {
        let reply = self.inner.complete(conv)?;
        let model = self.inner.model().unwrap_or("unknown").to_string();
        record(conv, &model, &reply, &self.transcript)?;
        Ok(reply)
    }

    fn model(&self) -> Option<&str> {
        self.inner.model()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ask(text: &str) -> Conversation {
        Conversation::from_messages(vec![Message::new(Role::System, "sys"), Message::new(Role::User, text)]).unwrap()
    }

    #[test]
    fn alternation_is_enforced() {
        let bad = vec![Message::new(Role::User, "a"), Message::new(Role::User, "b")];
        assert!(matches!(Conversation::from_messages(bad), Err(GatewayError::InvalidConversation(_))));
        assert!(Conversation::from_messages(vec![]).is_err());
        let starts_assistant = vec![Message::new(Role::Assistant, "a")];
        assert!(Conversation::from_messages(starts_assistant).is_err());
        let ok = vec![
            Message::new(Role::System, "s"),
            Message::new(Role::User, "u"),
            Message::new(Role::Assistant, "a"),
        ];
        let conv = Conversation::from_messages(ok).unwrap();
        assert!(conv.validate_request().is_err());
    }

    #[test]
    fn scripted_hands_out_in_order() {
        let mut b = ScriptedBackend::new(["A"]);
        assert_eq!(b.complete(&ask("q")).unwrap().content, "A");
        assert_eq!(b.complete(&ask("q")), Err(GatewayError::ReplayExhausted(1)));
    }

    #[test]
    fn hash_depends_on_content_roles_and_model() {
        let base = request_hash(&ask("q"), "m");
        assert_eq!(base.len(), 64);
        assert_eq!(base, request_hash(&ask("q"), "m"));
        assert_ne!(base, request_hash(&ask("q2"), "m"));
        assert_ne!(base, request_hash(&ask("q"), "m2"));
        let shifted = Conversation::from_messages(vec![Message::new(Role::User, "sysq")]).unwrap();
        assert_ne!(base, request_hash(&shifted, "m"));
    }

    #[test]
    fn config_requirements() {
        let live = BackendConfig { kind: BackendKind::Live, ..BackendConfig::default() };
        assert!(live.validate().is_err());
        assert!(BackendConfig::replay("/nonexistent/transcript.jsonl").validate().is_err());
        let negative = BackendConfig { temperature: -0.5, kind: BackendKind::Scripted, ..BackendConfig::default() };
        assert!(negative.validate().is_err());
    }
}
