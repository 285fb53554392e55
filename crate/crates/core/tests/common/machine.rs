//! Random operation sequences against the session state machine.

use delf_core::executor::{ExecutorError, FailureClass, Verdict};
use delf_core::gateway::GatewayError;
use delf_core::prompt::TemplateSet;
use delf_core::session::{Phase, Services, SessionError, SessionSettings, SessionState};
use proptest::prelude::*;

use super::*;

#[derive(Debug, Clone, Copy)]
pub enum Reply {
    Design,
    Revised,
    Code,
    Refusal,
    Prose,
    Down,
}

#[derive(Debug, Clone, Copy)]
pub enum Run {
    Pass,
    Fail,
    Broken,
}

#[derive(Debug, Clone, Copy)]
pub enum Edit {
    None,
    Rename,
    Duplicate,
}

#[derive(Debug, Clone, Copy)]
pub enum Op {
    Propose,
    Feedback(bool),
    Approve(Edit),
    Codify,
    Validate,
    Abandon,
    Finalize,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub auto_debug: bool,
    pub replies: Vec<Reply>,
    pub runs: Vec<Run>,
    pub ops: Vec<Op>,
}

fn reply() -> impl Strategy<Value = Reply> {
    prop_oneof![
        3 => Just(Reply::Design),
        1 => Just(Reply::Revised),
        4 => Just(Reply::Code),
        1 => Just(Reply::Refusal),
        1 => Just(Reply::Prose),
        1 => Just(Reply::Down),
    ]
}

fn run() -> impl Strategy<Value = Run> {
    prop_oneof![2 => Just(Run::Pass), 3 => Just(Run::Fail), 1 => Just(Run::Broken)]
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => Just(Op::Propose),
        2 => any::<bool>().prop_map(Op::Feedback),
        2 => Just(Op::Approve(Edit::None)),
        1 => Just(Op::Approve(Edit::Rename)),
        1 => Just(Op::Approve(Edit::Duplicate)),
        4 => Just(Op::Codify),
        4 => Just(Op::Validate),
        1 => Just(Op::Abandon),
        1 => Just(Op::Finalize),
    ]
}

pub fn scenario() -> impl Strategy<Value = Scenario> {
    (
        any::<bool>(),
        prop::collection::vec(reply(), 0..24),
        prop::collection::vec(run(), 0..12),
        prop::collection::vec(op(), 1..24),
    )
        .prop_map(|(auto_debug, replies, runs, ops)| Scenario { auto_debug, replies, runs, ops })
}

fn pre(op: Op, phase: Phase) -> bool {
    use Phase::*;
    match op {
        Op::Propose => matches!(phase, Drafting | DesignProposed),
        Op::Feedback(_) => matches!(phase, DesignProposed | Failed(_)),
        Op::Approve(_) => phase == DesignProposed,
        Op::Codify => matches!(phase, DesignApproved | Failed(_)),
        Op::Validate => phase == CodeGenerated,
        Op::Abandon => !phase.is_terminal(),
        Op::Finalize => phase.is_terminal(),
    }
}

/// The declared graph, for operations that succeeded.
fn declared(op: Op, from: Phase, to: Phase) -> bool {
    use Phase::*;
    match (op, from, to) {
        (Op::Propose, Drafting, Drafting | DesignProposed) => true,
        (Op::Propose, DesignProposed, DesignProposed) => true,
        (Op::Feedback(_), a, b) => a == b,
        (Op::Approve(_), DesignProposed, DesignApproved) => true,
        (Op::Codify, DesignApproved, CodeGenerated | Failed(1)) => true,
        (Op::Codify, Failed(_), CodeGenerated) => true,
        (Op::Codify, Failed(n), Failed(m)) => m == n + 1,
        (Op::Validate, CodeGenerated, Executable | Failed(_)) => true,
        (Op::Abandon, _, Abandoned) => true,
        (Op::Finalize, a, b) => a == b,
        _ => false,
    }
}

fn reply_text(r: Reply) -> Result<String, GatewayError> {
    match r {
        Reply::Design => Ok(DESIGN_REPLY.into()),
        Reply::Revised => Ok(REVISED_REPLY.into()),
        Reply::Code => Ok(CODE_REPLY.into()),
        Reply::Refusal => Ok(REFUSAL_REPLY.into()),
        Reply::Prose => Ok(PROSE_REPLY.into()),
        Reply::Down => Err(GatewayError::TransportFailure("connection refused".into())),
    }
}

fn run_outcome(r: Run) -> Result<delf_core::ValidationReport, ExecutorError> {
    match r {
        Run::Pass => Ok(pass()),
        Run::Fail => Ok(report(Verdict::Fail, FailureClass::SyntaxError)),
        Run::Broken => Err(ExecutorError::Harness("harness exited with status 2".into())),
    }
}

fn reload(state: &SessionState) -> SessionState {
    serde_json::from_slice(&serde_json::to_vec_pretty(state).unwrap()).unwrap()
}

fn free_adjusted(queries: u32) -> u32 {
    queries.saturating_sub(1)
}

/// Runs a scenario, checking every step; `persist` is called after each
/// operation with the state a crash would leave behind.
pub fn check(sc: &Scenario, mut persist: impl FnMut(&SessionState) -> SessionState) -> Result<(), String> {
    let templates = TemplateSet::bundled();
    let settings = SessionSettings { auto_debug: sc.auto_debug, ..SessionSettings::default() };
    let mut backend = QueueBackend::new(sc.replies.iter().map(|r| reply_text(*r)));
    let executor = QueueExecutor::new(sc.runs.iter().map(|r| run_outcome(*r)));
    let mut s = SessionState::create("Key-Lock", "a key and a lock", runtime()).unwrap();
    for (i, &op) in sc.ops.iter().enumerate() {
        let before = s.clone();
        let mut svc = Services { templates: &templates, settings: &settings, backend: &mut backend, executor: &executor };
        let result: Result<(), SessionError> = match op {
            Op::Propose => s.propose_design(&mut svc).map(drop),
            Op::Feedback(empty) => s.submit_feedback(if empty { "" } else { "add the door state" }),
            Op::Approve(edit) => {
                let edited = s.current_design().cloned().and_then(|mut d| match edit {
                    Edit::None => None,
                    Edit::Rename => {
                        d.observation.attributes[0].name = "column".into();
                        Some(d)
                    }
                    Edit::Duplicate => {
                        d.observation.attributes[1].name = d.observation.attributes[0].name.clone();
                        Some(d)
                    }
                });
                s.approve_design(edited)
            }
            Op::Codify => s.codify(&mut svc).map(drop),
            Op::Validate => s.validate(&mut svc),
            Op::Abandon => s.abandon(),
            Op::Finalize => s.finalize_metrics().map(drop),
        };
        let ctx = format!("step {i} {op:?} from {}", before.phase);
        if !pre(op, before.phase) && !matches!(result, Err(SessionError::WrongPhase { .. })) {
            return Err(format!("{ctx}: expected a wrong-phase rejection, got {result:?}"));
        }
        match &result {
            Ok(()) if !declared(op, before.phase, s.phase) => {
                return Err(format!("{ctx}: undeclared transition to {}", s.phase));
            }
            Err(SessionError::Executor(_)) if matches!(op, Op::Validate) => {
                if s.phase != Phase::CodeGenerated {
                    return Err(format!("{ctx}: harness error moved the session to {}", s.phase));
                }
            }
            Err(e) if s != before => return Err(format!("{ctx}: rejected ({e}) but state changed")),
            _ => {}
        }
        if s.trial_counter < before.trial_counter {
            return Err(format!("{ctx}: trial counter decreased"));
        }
        if s.trial_counter != free_adjusted(s.design_queries) + free_adjusted(s.code_queries) {
            return Err(format!("{ctx}: trial counter {} disagrees with query counts", s.trial_counter));
        }
        if let Phase::Failed(n) = s.phase {
            if n != s.failures || n == 0 {
                return Err(format!("{ctx}: Failed({n}) with {} failures", s.failures));
            }
        }
        let reloaded = persist(&s);
        if reloaded != s {
            return Err(format!("{ctx}: reloaded state differs"));
        }
    }
    Ok(())
}

/// In-memory persistence: the exact bytes the store writes, read back.
pub fn roundtrip(state: &SessionState) -> SessionState {
    reload(state)
}
