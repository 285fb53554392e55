//! Non-interactive sessions driven by a fixture directory.
//!
//! A fixture holds `manifest.json`, the task description, the recorded
//! transcript and the recorded validation reports. The manifest lists the
//! user-side steps; the model side comes from the transcript.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{CandidateExecutor, ExecutorSpec, RecordedExecutor};
use crate::gateway::{read_transcript, BackendConfig, ChatBackend, Recorder, ScriptedBackend};
use crate::prompt::TemplateSet;
use crate::schema::DesignPair;
use crate::session::{Services, SessionError, SessionMetrics, SessionRuntime, SessionSettings, SessionState};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptStep {
    Propose,
    Feedback { text: String },
    Approve {
        #[serde(default)]
        edited: Option<DesignPair>,
    },
    Codify,
    Validate,
    Abandon,
}

fn default_transcript() -> PathBuf {
    "transcript.jsonl".into()
}

fn default_reports() -> PathBuf {
    "reports.jsonl".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayManifest {
    pub environment: String,
    /// Paths are relative to the fixture directory.
    pub description: PathBuf,
    /// Model name recorded in the transcript.
    pub model: String,
    #[serde(default)]
    pub auto_debug: bool,
    #[serde(default)]
    pub max_auto_debug: Option<u32>,
    pub steps: Vec<ScriptStep>,
    /// Reply files in order; only needed to record the transcript.
    #[serde(default)]
    pub replies: Vec<PathBuf>,
    #[serde(default = "default_transcript")]
    pub transcript: PathBuf,
    #[serde(default = "default_reports")]
    pub reports: PathBuf,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("fixture {path}: {message}")]
    Fixture { path: PathBuf, message: String },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("transcript has {0} unused exchange(s) after the last step")]
    Unconsumed(usize),
}

fn fixture_err(path: &Path, message: impl ToString) -> ReplayError {
    ReplayError::Fixture { path: path.to_path_buf(), message: message.to_string() }
}

/// A loaded fixture with paths resolved against its directory.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub dir: PathBuf,
    pub manifest: ReplayManifest,
    pub description: String,
}

impl Fixture {
    /// Accepts the fixture directory or any file inside it.
    pub fn load(path: &Path) -> Result<Self, ReplayError> {
        let dir = if path.is_dir() { path.to_path_buf() } else { path.parent().unwrap_or(Path::new(".")).to_path_buf() };
        let manifest_path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&manifest_path).map_err(|e| fixture_err(&manifest_path, e))?;
        let manifest: ReplayManifest = serde_json::from_str(&text).map_err(|e| fixture_err(&manifest_path, e))?;
        let desc_path = dir.join(&manifest.description);
        let description = fs::read_to_string(&desc_path).map_err(|e| fixture_err(&desc_path, e))?;
        Ok(Self { dir, manifest, description })
    }

    pub fn transcript_path(&self) -> PathBuf {
        self.dir.join(&self.manifest.transcript)
    }

    pub fn reports_path(&self) -> PathBuf {
        self.dir.join(&self.manifest.reports)
    }

    pub fn settings(&self, base: &SessionSettings) -> SessionSettings {
        SessionSettings {
            auto_debug: self.manifest.auto_debug,
            max_auto_debug: self.manifest.max_auto_debug.unwrap_or(base.max_auto_debug),
            ..base.clone()
        }
    }

    pub fn runtime(&self) -> SessionRuntime {
        SessionRuntime {
            backend: BackendConfig { model: Some(self.manifest.model.clone()), ..BackendConfig::replay(self.transcript_path()) },
            executor: ExecutorSpec::Recorded { reports: self.reports_path() },
        }
    }

    pub fn new_session(&self) -> Result<SessionState, ReplayError> {
        Ok(SessionState::create(&self.manifest.environment, &self.description, self.runtime())?)
    }
}

/// Applies one scripted step; the same mapping the CLI and HTTP layers use.
pub fn apply_step(state: &mut SessionState, step: &ScriptStep, svc: &mut Services<'_>) -> Result<(), SessionError> {
    match step {
        ScriptStep::Propose => state.propose_design(svc).map(drop),
        ScriptStep::Feedback { text } => state.submit_feedback(text),
        ScriptStep::Approve { edited } => state.approve_design(edited.clone()),
        ScriptStep::Codify => state.codify(svc).map(drop),
        ScriptStep::Validate => state.validate(svc),
        ScriptStep::Abandon => state.abandon(),
    }
}

fn drive(
    fixture: &Fixture,
    templates: &TemplateSet,
    settings: &SessionSettings,
    backend: &mut dyn ChatBackend,
    executor: &dyn CandidateExecutor,
) -> Result<SessionState, ReplayError> {
    let mut state = fixture.new_session()?;
    let settings = fixture.settings(settings);
    let mut svc = Services { templates, settings: &settings, backend, executor };
    for step in &fixture.manifest.steps {
        apply_step(&mut state, step, &mut svc)?;
    }
    Ok(state)
}

pub struct ReplayOutcome {
    pub state: SessionState,
    pub metrics: SessionMetrics,
}

/// Replays a fixture against its transcript and recorded reports.
pub fn replay_fixture(
    path: &Path,
    templates: &TemplateSet,
    settings: &SessionSettings,
) -> Result<ReplayOutcome, ReplayError> {
    let fixture = Fixture::load(path)?;
    let runtime = fixture.runtime();
    let mut backend = runtime.backend.open(0).map_err(SessionError::from)?;
    let executor = runtime.executor.open(0).map_err(SessionError::from)?;
    let state = drive(&fixture, templates, settings, backend.as_mut(), executor.as_ref())?;
    let recorded = read_transcript(&fixture.transcript_path()).map_err(SessionError::from)?.len();
    if recorded > state.replies_received() {
        return Err(ReplayError::Unconsumed(recorded - state.replies_received()));
    }
    let metrics = state.finalize_metrics()?;
    Ok(ReplayOutcome { state, metrics })
}

/// Re-records a fixture's transcript from its reply files. Needed whenever
/// the prompt templates change, since requests are matched by hash.
pub fn record_fixture(
    path: &Path,
    templates: &TemplateSet,
    settings: &SessionSettings,
) -> Result<SessionState, ReplayError> {
    let fixture = Fixture::load(path)?;
    let replies = fixture
        .manifest
        .replies
        .iter()
        .map(|p| {
            let full = fixture.dir.join(p);
            fs::read_to_string(&full).map_err(|e| fixture_err(&full, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let transcript = fixture.transcript_path();
    if transcript.exists() {
        fs::remove_file(&transcript).map_err(|e| fixture_err(&transcript, e))?;
    }
    let mut backend = Recorder::new(ScriptedBackend::new(replies).with_model(&fixture.manifest.model), &transcript);
    let executor = RecordedExecutor::from_jsonl(&fixture.reports_path(), 0).map_err(SessionError::from)?;
    drive(&fixture, templates, settings, &mut backend, &executor)
}
