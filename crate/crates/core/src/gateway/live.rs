//! OpenAI-compatible chat-completion client over blocking HTTP.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{BackendConfig, ChatBackend, Conversation, GatewayError, Message, ModelReply, Usage};

pub const API_KEY_VAR: &str = "DELF_API_KEY";

/// Wire body of a completion request; also the `request` field of transcript
/// entries (without temperature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

impl ChatRequest {
    pub fn new(model: &str, conv: &Conversation, temperature: Option<f64>) -> Self {
        Self { model: model.to_string(), messages: conv.messages().to_vec(), temperature }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    refusal: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

enum Attempt {
    Done(ModelReply),
    Transient(Failure),
    Fatal(GatewayError),
}

enum Failure {
    Timeout,
    Status(u16),
}

pub struct LiveBackend {
    cfg: BackendConfig,
    endpoint: String,
    model: String,
    key: String,
    agent: ureq::Agent,
}

impl LiveBackend {
    /// Reads the key from `DELF_API_KEY`.
    pub fn from_env(cfg: BackendConfig) -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()).ok_or(GatewayError::MissingCredential)?;
        Self::with_key(cfg, key)
    }

    pub fn with_key(cfg: BackendConfig, key: String) -> Result<Self, GatewayError> {
        let missing = |what: &str| GatewayError::InvalidConfig(format!("live backend needs {what}"));
        let endpoint = cfg.endpoint.clone().ok_or_else(|| missing("an endpoint"))?;
        let model = cfg.model.clone().ok_or_else(|| missing("a model name"))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { cfg, endpoint, model, key, agent })
    }

    fn attempt(&self, conv: &Conversation) -> Attempt {
        let body = ChatRequest::new(&self.model, conv, Some(self.cfg.temperature));
        let started = Instant::now();
        let sent = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.key))
            .send_json(&body);
        let mut response = match sent {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Transient(Failure::Timeout),
            Err(e) => return Attempt::Fatal(GatewayError::TransportFailure(e.to_string())),
        };
        let status = response.status().as_u16();
        if status >= 500 {
            return Attempt::Transient(Failure::Status(status));
        }
        if status >= 300 {
            let detail = response.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Fatal(GatewayError::TransportFailure(format!("status {status}: {detail}")));
        }
        let parsed: ChatResponse = match response.body_mut().read_json() {
            Ok(p) => p,
            Err(ureq::Error::Timeout(_)) => return Attempt::Transient(Failure::Timeout),
            Err(e) => return Attempt::Fatal(GatewayError::TransportFailure(format!("unreadable response: {e}"))),
        };
        let Some(choice) = parsed.choices.into_iter().next() else {
            return Attempt::Fatal(GatewayError::TransportFailure("response has no choices".into()));
        };
        let (content, refusal) = match (choice.message.content, choice.message.refusal) {
            (_, Some(r)) => (r, true),
            (Some(c), None) if !c.is_empty() => (c, false),
            _ => return Attempt::Fatal(GatewayError::TransportFailure("empty completion".into())),
        };
        Attempt::Done(ModelReply {
            content,
            backend_id: format!("live:{}", self.model),
            latency_ms: started.elapsed().as_millis() as u64,
            usage: parsed.usage.map(|u| Usage { prompt_tokens: u.prompt_tokens, completion_tokens: u.completion_tokens }),
            refusal,
        })
    }
}

impl ChatBackend for LiveBackend {
    fn id(&self) -> &str {
        "live"
    }

    fn complete(&mut self, conv: &Conversation) -> Result<ModelReply, GatewayError> {
        conv.validate_request()?;
        let mut delay = Duration::from_millis(self.cfg.backoff_ms);
        let mut attempts = 0;
        loop {
            attempts += 1;
            let failure = match self.attempt(conv) {
                Attempt::Done(reply) => return Ok(reply),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(f) => f,
            };
            if attempts > self.cfg.max_retries {
                return Err(match failure {
                    Failure::Timeout => GatewayError::Timeout { attempts },
                    Failure::Status(s) => {
                        GatewayError::TransportFailure(format!("status {s} after {attempts} attempt(s)"))
                    }
                });
            }
            std::thread::sleep(delay);
            delay *= 2;
        }
    }

    fn model(&self) -> Option<&str> {
        Some(&self.model)
    }
}
