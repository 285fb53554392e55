//! The design, codify, validate workflow as a persisted state machine.
//!
//! Phases and the operations that move between them:
//!
//! ```text
//! Drafting --propose--> DesignProposed --approve--> DesignApproved --codify--> CodeGenerated
//!    ^  |                 |  ^                                                   |
//!    +--+ (no design)     +--+ feedback / propose                             validate
//!                                                                                |
//!            Failed(n) <--codify (no code)-- DesignApproved          Validating -+-> Executable
//!            Failed(n) --codify--> CodeGenerated                                 +-> Failed(n+1)
//! ```
//!
//! Any phase except Executable and Abandoned can be abandoned.
//!
//! Trial counting: the first design query and the first codify query are
//! free; every later model query (revision, re-proposal, debug, re-codify)
//! adds one. Direct user edits are not model queries and never count.

mod metrics;
mod store;

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{CandidateExecutor, ExecutorError, ExecutorSpec, ValidationReport};
use crate::gateway::{BackendConfig, ChatBackend, Conversation, GatewayError, Message, Role};
use crate::parser::{classify, extract_code_blocks, parse_design_reply, select_candidate, CodeCandidate, RefusalLexicon, ReplyKind};
use crate::prompt::{count_description_tokens, PromptError, QueryKind, RenderedPrompt, TemplateSet, DEFAULT_API_TEMPLATE, DEFAULT_CODING_RULES};
use crate::schema::{DesignPair, SchemaError};

pub use metrics::{write_metrics_csv, Outcome, SessionMetrics};
pub use store::{IndexEntry, SessionStore};

pub const SESSION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Drafting,
    DesignProposed,
    DesignApproved,
    CodeGenerated,
    Validating,
    /// Number of failed codify or validation attempts so far.
    Failed(u32),
    Executable,
    Abandoned,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Executable | Phase::Abandoned)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Drafting => f.write_str("Drafting"),
            Phase::DesignProposed => f.write_str("DesignProposed"),
            Phase::DesignApproved => f.write_str("DesignApproved"),
            Phase::CodeGenerated => f.write_str("CodeGenerated"),
            Phase::Validating => f.write_str("Validating"),
            Phase::Failed(n) => write!(f, "Failed({n})"),
            Phase::Executable => f.write_str("Executable"),
            Phase::Abandoned => f.write_str("Abandoned"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Model,
    UserRevised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub design: DesignPair,
    pub provenance: Provenance,
    /// Query that produced it; `None` for user edits.
    pub query: Option<QueryKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeVersion {
    pub candidate: CodeCandidate,
    pub query: QueryKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PendingFeedback {
    /// Embedded in the next revision query.
    Revision(String),
    /// Embedded as a hint in the next debug query.
    Debug(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Created,
    QueryIssued,
    DesignProposed,
    ReplyRejected,
    Refusal,
    FeedbackRecorded,
    DesignApproved,
    CodeGenerated,
    NoCodeInReply,
    ValidationStarted,
    ValidationPassed,
    ValidationFailed,
    OperationalAlert,
    Abandoned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    /// Position in the log; also the cursor for polling.
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub kind: EventKind,
    pub detail: String,
}

/// How the session reaches its model and executor; stored so later
/// commands can rebuild them. Holds no credentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRuntime {
    pub backend: BackendConfig,
    pub executor: ExecutorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub schema_version: u32,
    pub session_id: String,
    /// Environment name used in metrics rows.
    pub name: String,
    pub description: String,
    pub phase: Phase,
    pub design_history: Vec<DesignRecord>,
    pub code_versions: Vec<CodeVersion>,
    pub reports: Vec<ValidationReport>,
    pub transcript: Conversation,
    pub trial_counter: u32,
    pub design_queries: u32,
    pub code_queries: u32,
    /// Failed codify or validation attempts; mirrored in `Phase::Failed`.
    pub failures: u32,
    pub auto_debugs: u32,
    pub pending_feedback: Option<PendingFeedback>,
    pub events: Vec<Event>,
    pub runtime: SessionRuntime,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

fn default_max_auto_debug() -> u32 {
    10
}

fn default_rules() -> Vec<String> {
    DEFAULT_CODING_RULES.iter().map(|r| r.to_string()).collect()
}

fn default_api_template() -> String {
    DEFAULT_API_TEMPLATE.to_string()
}

/// Knobs shared by every session of a deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSettings {
    #[serde(default = "default_api_template")]
    pub api_template: String,
    #[serde(default = "default_rules")]
    pub rules: Vec<String>,
    #[serde(default)]
    pub refusal: RefusalLexicon,
    /// Issue debug queries automatically after a failed validation.
    #[serde(default)]
    pub auto_debug: bool,
    #[serde(default = "default_max_auto_debug")]
    pub max_auto_debug: u32,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            api_template: default_api_template(),
            rules: default_rules(),
            refusal: RefusalLexicon::default(),
            auto_debug: false,
            max_auto_debug: default_max_auto_debug(),
        }
    }
}

/// What an operation needs beyond the session itself.
pub struct Services<'a> {
    pub templates: &'a TemplateSet,
    pub settings: &'a SessionSettings,
    pub backend: &'a mut dyn ChatBackend,
    pub executor: &'a dyn CandidateExecutor,
}

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("cannot {operation} in phase {phase}")]
    WrongPhase { operation: &'static str, phase: Phase },
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("model backend: {0}")]
    Gateway(#[from] GatewayError),
    #[error("executor: {0}")]
    Executor(#[from] ExecutorError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Design(#[from] SchemaError),
    #[error("session storage: {0}")]
    Storage(String),
}

pub type Result<T, E = SessionError> = std::result::Result<T, E>;

fn wrong(operation: &'static str, phase: Phase) -> SessionError {
    SessionError::WrongPhase { operation, phase }
}

impl SessionState {
    pub fn create(name: &str, description: &str, runtime: SessionRuntime) -> Result<Self> {
        if description.trim().is_empty() {
            return Err(SessionError::Empty("description"));
        }
        let now = Utc::now();
        let mut s = Self {
            schema_version: SESSION_SCHEMA_VERSION,
            session_id: uuid::Uuid::new_v4().to_string(),
            name: name.to_string(),
            description: description.to_string(),
            phase: Phase::Drafting,
            design_history: Vec::new(),
            code_versions: Vec::new(),
            reports: Vec::new(),
            transcript: Conversation::new(),
            trial_counter: 0,
            design_queries: 0,
            code_queries: 0,
            failures: 0,
            auto_debugs: 0,
            pending_feedback: None,
            events: Vec::new(),
            runtime,
            created_at: now,
            updated_at: now,
        };
        s.log(EventKind::Created, format!("{} words", s.description_tokens()));
        Ok(s)
    }

    pub fn description_tokens(&self) -> usize {
        count_description_tokens(&self.description)
    }

    pub fn current_design(&self) -> Option<&DesignPair> {
        self.design_history.last().map(|r| &r.design)
    }

    /// Model replies received so far; replay backends resume here.
    pub fn replies_received(&self) -> usize {
        self.transcript.count(Role::Assistant)
    }

    pub fn events_since(&self, cursor: u64) -> &[Event] {
        let start = usize::try_from(cursor).unwrap_or(usize::MAX).min(self.events.len());
        &self.events[start..]
    }

    pub fn next_cursor(&self) -> u64 {
        self.events.len() as u64
    }

    fn log(&mut self, kind: EventKind, detail: impl Into<String>) {
        let at = Utc::now();
        self.events.push(Event { seq: self.events.len() as u64, at, kind, detail: detail.into() });
        self.updated_at = at;
    }

    /// Runs `op` on a copy and keeps the result only on success.
    fn transact<T>(&mut self, op: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let mut next = self.clone();
        let out = op(&mut next)?;
        *self = next;
        Ok(out)
    }

    /// Sends one query and records the exchange; counts the trial.
    fn query(&mut self, kind: QueryKind, prompt: RenderedPrompt, backend: &mut dyn ChatBackend) -> Result<String> {
        if self.transcript.is_empty() {
            if let Some(system) = prompt.system() {
                self.transcript.push(Message::new(Role::System, system));
            }
        }
        self.transcript.push(Message::new(Role::User, prompt.user()));
        let reply = backend.complete(&self.transcript)?;
        self.transcript.push(Message::new(Role::Assistant, reply.content.clone()));
        let counter = if kind.produces_code() { &mut self.code_queries } else { &mut self.design_queries };
        let free = *counter == 0;
        *counter += 1;
        if !free {
            self.trial_counter += 1;
        }
        self.log(EventKind::QueryIssued, format!("{kind} query (trial counter {})", self.trial_counter));
        Ok(reply.content)
    }

    /// Design query, or revision query when feedback is pending.
    pub fn propose_design(&mut self, svc: &mut Services<'_>) -> Result<ReplyKind> {
        if !matches!(self.phase, Phase::Drafting | Phase::DesignProposed) {
            return Err(wrong("propose a design", self.phase));
        }
        self.transact(|s| {
            let (kind, prompt) = match (&s.pending_feedback, s.current_design()) {
                (Some(PendingFeedback::Revision(fb)), Some(design)) => {
                    (QueryKind::Revision, svc.templates.render_revision_query(design, fb)?)
                }
                _ => (QueryKind::Design, svc.templates.render_design_query(&s.description)?),
            };
            let reply = s.query(kind, prompt, svc.backend)?;
            let reply_kind = classify(&reply, &svc.settings.refusal);
            match parse_design_reply(&reply) {
                Ok(design) => {
                    let names: Vec<&str> = design.observation.attributes.iter().map(|a| a.name.as_str()).collect();
                    let detail = format!("observation [{}]", names.join(", "));
                    s.design_history.push(DesignRecord { design, provenance: Provenance::Model, query: Some(kind) });
                    s.pending_feedback = None;
                    s.phase = Phase::DesignProposed;
                    s.log(EventKind::DesignProposed, detail);
                }
                Err(e) if reply_kind == ReplyKind::Refusal => s.log(EventKind::Refusal, e.to_string()),
                Err(e) => s.log(EventKind::ReplyRejected, format!("{reply_kind:?} reply: {e}")),
            }
            Ok(reply_kind)
        })
    }

    pub fn submit_feedback(&mut self, feedback: &str) -> Result<()> {
        let pending = match self.phase {
            Phase::DesignProposed => PendingFeedback::Revision(feedback.to_string()),
            Phase::Failed(_) => PendingFeedback::Debug(feedback.to_string()),
            phase => return Err(wrong("submit feedback", phase)),
        };
        if feedback.trim().is_empty() {
            return Err(SessionError::Empty("feedback"));
        }
        self.pending_feedback = Some(pending);
        self.log(EventKind::FeedbackRecorded, feedback.to_string());
        Ok(())
    }

    /// Accepts the latest proposal, or a user-edited replacement.
    pub fn approve_design(&mut self, edited: Option<DesignPair>) -> Result<()> {
        if self.phase != Phase::DesignProposed {
            return Err(wrong("approve a design", self.phase));
        }
        if let Some(design) = edited {
            design.check()?;
            self.design_history.push(DesignRecord { design, provenance: Provenance::UserRevised, query: None });
        }
        self.pending_feedback = None;
        self.phase = Phase::DesignApproved;
        self.log(EventKind::DesignApproved, format!("design version {}", self.design_history.len()));
        Ok(())
    }

    fn record_failure(&mut self) {
        self.failures += 1;
        self.phase = Phase::Failed(self.failures);
    }

    /// Codify query the first time; afterwards a debug query on the latest
    /// failed candidate, or a fresh codify query if no candidate exists.
    pub fn codify(&mut self, svc: &mut Services<'_>) -> Result<bool> {
        if !matches!(self.phase, Phase::DesignApproved | Phase::Failed(_)) {
            return Err(wrong("codify", self.phase));
        }
        self.transact(|s| s.codify_inner(svc))
    }

    fn codify_inner(&mut self, svc: &mut Services<'_>) -> Result<bool> {
        let design = self.current_design().expect("design exists once approved").clone();
        let failed_candidate = match (self.code_versions.last(), self.reports.last()) {
            (Some(code), Some(report)) if !report.passed() => Some((code.candidate.source.clone(), report.clone())),
            _ => None,
        };
        let (kind, prompt) = match failed_candidate {
            Some((source, report)) => {
                let hint = match &self.pending_feedback {
                    Some(PendingFeedback::Debug(h)) => Some(h.as_str()),
                    _ => None,
                };
                (QueryKind::Debug, svc.templates.render_debug_query(&source, &report, hint)?)
            }
            None => (QueryKind::Codify, svc.templates.render_codify_query(&design, &svc.settings.api_template, &svc.settings.rules)?),
        };
        let reply = self.query(kind, prompt, svc.backend)?;
        self.pending_feedback = None;
        let blocks = extract_code_blocks(&reply);
        match select_candidate(&blocks) {
            Some(candidate) => {
                let detail = format!("version {} from {kind} query", self.code_versions.len() + 1);
                self.code_versions.push(CodeVersion { candidate: candidate.clone(), query: kind });
                self.phase = Phase::CodeGenerated;
                self.log(EventKind::CodeGenerated, detail);
                Ok(true)
            }
            None => {
                self.record_failure();
                self.log(EventKind::NoCodeInReply, format!("{kind} reply had no code block"));
                Ok(false)
            }
        }
    }

    /// Marks the latest candidate as under validation.
    pub fn begin_validation(&mut self) -> Result<()> {
        if self.phase != Phase::CodeGenerated {
            return Err(wrong("validate", self.phase));
        }
        self.phase = Phase::Validating;
        self.log(EventKind::ValidationStarted, format!("version {}", self.code_versions.len()));
        Ok(())
    }

    /// Runs the executor on a session in Validating; with auto-debug on,
    /// keeps issuing debug queries and re-validating until a pass or the
    /// limit.
    ///
    /// An executor failure is operational: the session returns to
    /// CodeGenerated with an alert event, and the error is returned.
    pub fn finish_validation(&mut self, svc: &mut Services<'_>) -> Result<()> {
        if self.phase != Phase::Validating {
            return Err(wrong("finish validation", self.phase));
        }
        loop {
            let source = &self.code_versions.last().expect("candidate exists").candidate.source;
            let design = self.current_design().expect("design exists").clone();
            let report = match svc.executor.execute(source, &design) {
                Ok(r) => r,
                Err(e) => {
                    self.phase = Phase::CodeGenerated;
                    self.log(EventKind::OperationalAlert, e.to_string());
                    return Err(e.into());
                }
            };
            let passed = report.passed();
            let class = report.failure_class;
            self.reports.push(report);
            if passed {
                self.phase = Phase::Executable;
                self.log(EventKind::ValidationPassed, format!("trials to execution {}", self.trial_counter));
                return Ok(());
            }
            self.record_failure();
            self.log(EventKind::ValidationFailed, class.to_string());
            if !(svc.settings.auto_debug && self.auto_debugs < svc.settings.max_auto_debug) {
                return Ok(());
            }
            self.auto_debugs += 1;
            let attempt = self.transact(|s| s.codify_inner(svc));
            match attempt {
                Ok(true) => self.begin_validation()?,
                Ok(false) => return Ok(()),
                Err(e) => {
                    self.log(EventKind::OperationalAlert, format!("auto-debug stopped: {e}"));
                    return Ok(());
                }
            }
        }
    }

    /// [`begin_validation`](Self::begin_validation) then
    /// [`finish_validation`](Self::finish_validation).
    pub fn validate(&mut self, svc: &mut Services<'_>) -> Result<()> {
        self.begin_validation()?;
        self.finish_validation(svc)
    }

    pub fn abandon(&mut self) -> Result<()> {
        if self.phase.is_terminal() {
            return Err(wrong("abandon", self.phase));
        }
        self.phase = Phase::Abandoned;
        self.log(EventKind::Abandoned, String::new());
        Ok(())
    }

    pub fn finalize_metrics(&self) -> Result<SessionMetrics> {
        let outcome = match self.phase {
            Phase::Executable => Outcome::Executable,
            Phase::Abandoned => Outcome::Abandoned,
            phase => return Err(wrong("finalize metrics", phase)),
        };
        let space_kind = self.current_design().map(DesignPair::space_kind).transpose()?;
        Ok(SessionMetrics {
            environment: self.name.clone(),
            description_tokens: self.description_tokens(),
            trials_to_execution: (outcome == Outcome::Executable).then_some(self.trial_counter),
            space_kind,
            outcome,
        })
    }
}
