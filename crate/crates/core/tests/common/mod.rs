#![allow(dead_code)]
pub mod designs;
pub mod machine;
pub mod corpus;

use std::collections::VecDeque;
use std::sync::Mutex;

use delf_core::executor::{CandidateExecutor, ExecutorError, ExecutorSpec, FailureClass, ValidationReport, Verdict};
use delf_core::gateway::{BackendConfig, ChatBackend, Conversation, GatewayError, ModelReply};
use delf_core::schema::DesignPair;
use delf_core::session::SessionRuntime;

pub const DESIGN_REPLY: &str = "OBSERVATION:\n\
x | column of the agent | discrete{0,1,2}\n\
y | row of the agent | discrete{0,1,2}\n\
has_key | whether the key was picked up | discrete{0,1}\n\
ACTION:\n\
move | N, E, S, W | discrete{0,1,2,3}\n";

pub const REVISED_REPLY: &str = "OBSERVATION:\n\
x | column | discrete{0,1,2}\n\
y | row | discrete{0,1,2}\n\
has_key | key held | discrete{0,1}\n\
door_open | lock opened | discrete{0,1}\n\
ACTION:\n\
move | N, E, S, W | discrete{0,1,2,3}\n";

pub const CODE_REPLY: &str = "Here is the environment.\n\n```python\nimport gymnasium as gym\n\nclass CustomEnv(gym.Env):\n    pass\n```\n";

pub const REFUSAL_REPLY: &str = "I'm sorry, but I cannot help with that request.";

pub const PROSE_REPLY: &str = "Sure, let me think about what the agent should see.";

pub fn report(verdict: Verdict, class: FailureClass) -> ValidationReport {
    ValidationReport {
        verdict,
        failure_class: class,
        stdout: String::new(),
        stderr: if verdict == Verdict::Fail { "Traceback: boom".into() } else { String::new() },
        harness_findings: Vec::new(),
        wall_time: 0.25,
        stage_reached: None,
        error: None,
    }
}

pub fn pass() -> ValidationReport {
    report(Verdict::Pass, FailureClass::None)
}

pub fn fail() -> ValidationReport {
    report(Verdict::Fail, FailureClass::RuntimeError)
}

pub fn runtime() -> SessionRuntime {
    SessionRuntime {
        backend: BackendConfig::replay("unused.jsonl"),
        executor: ExecutorSpec::Recorded { reports: "unused.jsonl".into() },
    }
}

/// Backend that yields queued outcomes and records how often it was asked.
pub struct QueueBackend {
    pub queue: VecDeque<Result<String, GatewayError>>,
    pub calls: usize,
}

impl QueueBackend {
    pub fn new(items: impl IntoIterator<Item = Result<String, GatewayError>>) -> Self {
        Self { queue: items.into_iter().collect(), calls: 0 }
    }

    pub fn replies<S: Into<String>>(items: impl IntoIterator<Item = S>) -> Self {
        Self::new(items.into_iter().map(|s| Ok(s.into())))
    }
}

impl ChatBackend for QueueBackend {
    fn id(&self) -> &str {
        "queue"
    }

    fn complete(&mut self, conv: &Conversation) -> Result<ModelReply, GatewayError> {
        conv.validate_request()?;
        self.calls += 1;
        let content = self.queue.pop_front().unwrap_or(Err(GatewayError::ReplayExhausted(self.calls - 1)))?;
        Ok(ModelReply {
            content,
            backend_id: "queue".into(),
            latency_ms: 0,
            usage: None,
            refusal: false,
        })
    }
}

/// Executor that yields queued outcomes.
pub struct QueueExecutor {
    pub queue: Mutex<VecDeque<Result<ValidationReport, ExecutorError>>>,
}

impl QueueExecutor {
    pub fn new(items: impl IntoIterator<Item = Result<ValidationReport, ExecutorError>>) -> Self {
        Self { queue: Mutex::new(items.into_iter().collect()) }
    }

    pub fn reports(items: impl IntoIterator<Item = ValidationReport>) -> Self {
        Self::new(items.into_iter().map(Ok))
    }
}

impl CandidateExecutor for QueueExecutor {
    fn execute(&self, _source: &str, _design: &DesignPair) -> Result<ValidationReport, ExecutorError> {
        self.queue.lock().unwrap().pop_front().unwrap_or(Err(ExecutorError::RecordingExhausted(0)))
    }
}
