//! Workflow for turning a prose task description into a validated
//! reinforcement-learning environment with a language model in the loop.

pub mod executor;
pub mod gateway;
pub mod parser;
pub mod prompt;
pub mod replay;
pub mod schema;
pub mod session;

pub use executor::{CandidateExecutor, ExecutorSpec, ValidationReport};
pub use gateway::{BackendConfig, ChatBackend, Conversation};
pub use schema::{DesignChoice, DesignPair, SpaceKind};
pub use session::{Phase, SessionError, SessionState, SessionStore};
