//! Session operations shared by the command line and the HTTP API. Both
//! front ends translate their input into a [`ScriptStep`] and call
//! [`App::perform`]; neither adds behaviour of its own.

use std::path::Path;

use delf_core::executor::{CandidateExecutor, ExecutorError, ValidationReport};
use delf_core::gateway::{ChatBackend, Conversation, GatewayError, ModelReply};
use delf_core::prompt::TemplateSet;
use delf_core::replay::{apply_step, ScriptStep};
use delf_core::schema::DesignPair;
use delf_core::session::{Services, SessionError, SessionRuntime, SessionState, SessionStore};

use crate::config::Config;

pub struct App {
    pub config: Config,
    pub store: SessionStore,
    pub templates: TemplateSet,
}

/// Stands in for a backend or executor the step does not use, so that e.g.
/// approving a design never needs credentials.
struct Unused;

impl ChatBackend for Unused {
    fn id(&self) -> &str {
        "unused"
    }

    fn complete(&mut self, _conv: &Conversation) -> Result<ModelReply, GatewayError> {
        Err(GatewayError::InvalidConfig("this operation does not query the model".into()))
    }
}

impl CandidateExecutor for Unused {
    fn execute(&self, _source: &str, _design: &DesignPair) -> Result<ValidationReport, ExecutorError> {
        Err(ExecutorError::Config("this operation does not run candidates".into()))
    }
}

impl App {
    /// `templates` overrides the configured template directory.
    pub fn new(config: Config, templates: Option<&Path>) -> Result<Self, String> {
        let templates =
            TemplateSet::resolve(templates.or(config.templates.as_deref())).map_err(|e| e.to_string())?;
        let store = SessionStore::open(&config.store).map_err(|e| e.to_string())?;
        Ok(Self { config, store, templates })
    }

    pub fn configured_runtime(&self) -> Result<SessionRuntime, SessionError> {
        let executor = self
            .config
            .executor
            .clone()
            .ok_or_else(|| ExecutorError::Config("no executor configured".into()))?;
        Ok(SessionRuntime { backend: self.config.backend.clone(), executor })
    }

    /// Creates and stores a session; `runtime` defaults to the configured one.
    pub fn create(
        &self,
        name: &str,
        description: &str,
        runtime: Option<SessionRuntime>,
    ) -> Result<SessionState, SessionError> {
        let runtime = match runtime {
            Some(r) => r,
            None => self.configured_runtime()?,
        };
        let state = SessionState::create(name, description, runtime)?;
        self.store.insert(&state)?;
        Ok(state)
    }

    /// Applies one step under the session lock and returns the new snapshot.
    pub fn perform(&self, id: &str, step: &ScriptStep) -> Result<SessionState, SessionError> {
        let settings = &self.config.session;
        self.store.update(id, |state| {
            let needs_model = matches!(step, ScriptStep::Propose | ScriptStep::Codify)
                || (matches!(step, ScriptStep::Validate) && settings.auto_debug);
            let needs_executor = matches!(step, ScriptStep::Validate);
            let mut backend: Box<dyn ChatBackend> = if needs_model {
                state.runtime.backend.open(state.replies_received())?
            } else {
                Box::new(Unused)
            };
            let executor: Box<dyn CandidateExecutor> = if needs_executor {
                state.runtime.executor.open(state.reports.len())?
            } else {
                Box::new(Unused)
            };
            let mut svc = Services {
                templates: &self.templates,
                settings,
                backend: backend.as_mut(),
                executor: executor.as_ref(),
            };
            apply_step(state, step, &mut svc)?;
            Ok(state.clone())
        })
    }
}
