//! Runs candidate environment code through the conformance harness in a
//! child process, with a wall-clock limit and failure classification.
//!
//! Invocation contract, run inside a fresh scratch directory:
//!
//! ```text
//! <harness...> <source_path> <expected_design_path> --seed <int> --episodes <int>
//! ```
//!
//! The harness prints one JSON report on stdout and exits 0 (pass),
//! 1 (candidate failure) or 2 (harness error).

use std::collections::VecDeque;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{DesignPair, SchemaError, SpaceDecl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    None,
    SyntaxError,
    RuntimeError,
    ApiContractViolation,
    Timeout,
    HarnessError,
}

impl std::fmt::Display for FailureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailureClass::None => "none",
            FailureClass::SyntaxError => "syntax_error",
            FailureClass::RuntimeError => "runtime_error",
            FailureClass::ApiContractViolation => "api_contract_violation",
            FailureClass::Timeout => "timeout",
            FailureClass::HarnessError => "harness_error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub check_id: String,
    pub passed: bool,
    #[serde(default)]
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Load,
    Instantiate,
    Spaces,
    Episodes,
    Done,
}

/// The harness's stdout document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub stage_reached: Stage,
    #[serde(default)]
    pub findings: Vec<Finding>,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub episodes_run: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub verdict: Verdict,
    pub failure_class: FailureClass,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub stderr: String,
    #[serde(default)]
    pub harness_findings: Vec<Finding>,
    /// Seconds.
    pub wall_time: f64,
    #[serde(default)]
    pub stage_reached: Option<Stage>,
    #[serde(default)]
    pub error: Option<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Text handed back to the model when debugging: harness error, failed
    /// findings, then stderr.
    pub fn failure_text(&self) -> String {
        let mut parts = Vec::new();
        parts.push(format!("failure class: {}", self.failure_class));
        if let Some(e) = &self.error {
            parts.push(format!("error: {e}"));
        }
        for f in self.harness_findings.iter().filter(|f| !f.passed) {
            parts.push(format!("check {} failed: {}", f.check_id, f.detail));
        }
        if !self.stderr.trim().is_empty() {
            parts.push(format!("stderr:\n{}", self.stderr.trim_end()));
        }
        parts.join("\n")
    }
}

/// Checks whose failure means the candidate broke the API contract rather
/// than crashing.
pub const CONTRACT_CHECKS: &[&str] = &[
    "class_found",
    "obs_space_matches",
    "act_space_matches",
    "reset_contract",
    "step_arity",
    "obs_in_bounds",
    "reward_finite",
    "flags_boolean",
    "no_step_after_terminal",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcessOutcome {
    pub timed_out: bool,
    pub exit_code: Option<i32>,
}

/// Timeout > SyntaxError > ApiContractViolation > RuntimeError, or None
/// for a clean pass.
pub fn classify_failure(outcome: ProcessOutcome, report: Option<&HarnessReport>) -> FailureClass {
    if outcome.timed_out {
        return FailureClass::Timeout;
    }
    let Some(report) = report else {
        return FailureClass::RuntimeError;
    };
    let failed = |id: &str| report.findings.iter().any(|f| !f.passed && f.check_id == id);
    let all_passed = report.findings.iter().all(|f| f.passed);
    if outcome.exit_code == Some(0) && report.stage_reached == Stage::Done && all_passed {
        return FailureClass::None;
    }
    if failed("load_ok") || (report.stage_reached == Stage::Load && (report.error.is_some() || !all_passed)) {
        return FailureClass::SyntaxError;
    }
    if CONTRACT_CHECKS.iter().any(|id| failed(id)) {
        return FailureClass::ApiContractViolation;
    }
    FailureClass::RuntimeError
}

fn default_time_limit() -> f64 {
    60.0
}

fn default_episodes() -> u32 {
    3
}

fn default_source_name() -> String {
    "candidate.py".into()
}

fn default_design_name() -> String {
    "expected_design.json".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionConfig {
    /// Program and leading arguments.
    pub harness: Vec<String>,
    #[serde(default = "default_time_limit")]
    pub time_limit_secs: f64,
    /// Root under which scratch directories are created.
    pub workdir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_episodes")]
    pub episodes: u32,
    #[serde(default = "default_source_name")]
    pub source_name: String,
    #[serde(default = "default_design_name")]
    pub design_name: String,
    /// Keep scratch directories after the run, for inspection.
    #[serde(default)]
    pub keep_scratch: bool,
}

impl ExecutionConfig {
    pub fn new(harness: Vec<String>, workdir: impl Into<PathBuf>) -> Self {
        Self {
            harness,
            time_limit_secs: default_time_limit(),
            workdir: workdir.into(),
            seed: 0,
            episodes: default_episodes(),
            source_name: default_source_name(),
            design_name: default_design_name(),
            keep_scratch: false,
        }
    }

    pub fn validate(&self) -> Result<(), ExecutorError> {
        if self.harness.is_empty() || self.harness[0].is_empty() {
            return Err(ExecutorError::Config("harness command is empty".into()));
        }
        if !(self.time_limit_secs > 0.0) {
            return Err(ExecutorError::Config("time limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ExecutorError {
    #[error("harness error: {0}")]
    Harness(String),
    #[error("invalid execution config: {0}")]
    Config(String),
    #[error(transparent)]
    Design(#[from] SchemaError),
    #[error("scratch directory: {0}")]
    Io(String),
    #[error("no recorded report left (used {0})")]
    RecordingExhausted(usize),
}

/// Design document handed to the harness: both designs plus the space
/// declarations derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedDesign {
    pub schema_version: u32,
    pub observation: crate::schema::DesignChoice,
    pub action: crate::schema::DesignChoice,
    pub observation_space: SpaceDecl,
    pub action_space: SpaceDecl,
}

impl ExpectedDesign {
    pub fn from_pair(pair: &DesignPair) -> Result<Self, SchemaError> {
        pair.check()?;
        Ok(Self {
            schema_version: crate::schema::SCHEMA_VERSION,
            observation: pair.observation.clone(),
            action: pair.action.clone(),
            observation_space: pair.observation.to_space_decl()?,
            action_space: pair.action.to_space_decl()?,
        })
    }
}

pub trait CandidateExecutor: Send + Sync {
    /// `Err` only for operational failures (harness broken); a failing
    /// candidate is an `Ok` report with verdict Fail.
    fn execute(&self, source: &str, design: &DesignPair) -> Result<ValidationReport, ExecutorError>;
}

pub struct SandboxExecutor {
    cfg: ExecutionConfig,
}

impl SandboxExecutor {
    pub fn new(cfg: ExecutionConfig) -> Result<Self, ExecutorError> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &ExecutionConfig {
        &self.cfg
    }
}

fn drain(mut pipe: impl Read + Send + 'static) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = pipe.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Last JSON object line on stdout, or the whole stream.
fn parse_report(stdout: &str) -> Option<HarnessReport> {
    serde_json::from_str(stdout.trim())
        .ok()
        .or_else(|| stdout.lines().rev().find_map(|l| serde_json::from_str(l.trim()).ok()))
}

impl SandboxExecutor {
    fn run_in(&self, scratch: &Path, source: &str, design: &DesignPair) -> Result<ValidationReport, ExecutorError> {
        let expected = ExpectedDesign::from_pair(design)?;
        let io = |e: std::io::Error| ExecutorError::Io(e.to_string());
        fs::write(scratch.join(&self.cfg.source_name), source).map_err(io)?;
        fs::write(
            scratch.join(&self.cfg.design_name),
            serde_json::to_string_pretty(&expected).expect("designs serialize"),
        )
        .map_err(io)?;

        let limit = Duration::from_secs_f64(self.cfg.time_limit_secs);
        let started = Instant::now();
        let mut child = Command::new(&self.cfg.harness[0])
            .args(&self.cfg.harness[1..])
            .arg(&self.cfg.source_name)
            .arg(&self.cfg.design_name)
            .args(["--seed", &self.cfg.seed.to_string(), "--episodes", &self.cfg.episodes.to_string()])
            .current_dir(scratch)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ExecutorError::Harness(format!("cannot start `{}`: {e}", self.cfg.harness[0])))?;
        let out = drain(child.stdout.take().expect("piped"));
        let err = drain(child.stderr.take().expect("piped"));

        let mut timed_out = false;
        let status = loop {
            if let Some(status) = child.try_wait().map_err(io)? {
                break status;
            }
            if started.elapsed() >= limit {
                let _ = child.kill();
                timed_out = true;
                break child.wait().map_err(io)?;
            }
            thread::sleep(Duration::from_millis(5));
        };
        let wall_time = started.elapsed().as_secs_f64();
        let stdout = out.join().unwrap_or_default();
        let stderr = err.join().unwrap_or_default();
        let outcome = ProcessOutcome { timed_out, exit_code: status.code() };
        let report = parse_report(&stdout);

        if !timed_out {
            match (outcome.exit_code, &report) {
                (Some(2), _) => {
                    let why = report.as_ref().and_then(|r| r.error.clone()).unwrap_or_else(|| stderr.clone());
                    return Err(ExecutorError::Harness(format!("harness exited 2: {}", why.trim())));
                }
                (_, None) => {
                    return Err(ExecutorError::Harness(format!(
                        "unparseable harness output (exit {:?}): {}",
                        outcome.exit_code,
                        stderr.trim()
                    )))
                }
                (Some(0 | 1), Some(_)) => {}
                (code, Some(_)) => {
                    return Err(ExecutorError::Harness(format!("unexpected harness exit status {code:?}")))
                }
            }
        }

        let failure_class = classify_failure(outcome, report.as_ref());
        let mut findings = report.as_ref().map(|r| r.findings.clone()).unwrap_or_default();
        if timed_out {
            findings.push(Finding {
                check_id: "time_limit".into(),
                passed: false,
                detail: format!("killed after {:.1} s", self.cfg.time_limit_secs),
            });
        }
        let verdict = if failure_class == FailureClass::None { Verdict::Pass } else { Verdict::Fail };
        if verdict == Verdict::Fail && stderr.trim().is_empty() && findings.iter().all(|f| f.passed) {
            return Err(ExecutorError::Harness("candidate failed without any evidence".into()));
        }
        Ok(ValidationReport {
            verdict,
            failure_class,
            stdout,
            stderr,
            harness_findings: findings,
            wall_time,
            stage_reached: report.as_ref().map(|r| r.stage_reached),
            error: report.and_then(|r| r.error),
        })
    }
}

impl CandidateExecutor for SandboxExecutor {
    fn execute(&self, source: &str, design: &DesignPair) -> Result<ValidationReport, ExecutorError> {
        fs::create_dir_all(&self.cfg.workdir).map_err(|e| ExecutorError::Io(e.to_string()))?;
        let scratch = tempfile::Builder::new()
            .prefix("candidate-")
            .tempdir_in(&self.cfg.workdir)
            .map_err(|e| ExecutorError::Io(e.to_string()))?;
        let result = self.run_in(scratch.path(), source, design);
        if self.cfg.keep_scratch {
            let _ = scratch.keep();
        }
        result
    }
}

/// Hands out previously captured reports in order; used to replay sessions
/// without running any code.
pub struct RecordedExecutor {
    reports: Mutex<VecDeque<ValidationReport>>,
    used: Mutex<usize>,
}

impl RecordedExecutor {
    pub fn new(reports: impl IntoIterator<Item = ValidationReport>) -> Self {
        Self { reports: Mutex::new(reports.into_iter().collect()), used: Mutex::new(0) }
    }

    /// Reads a JSON Lines file of reports, skipping the first `skip`.
    pub fn from_jsonl(path: &Path, skip: usize) -> Result<Self, ExecutorError> {
        let text = fs::read_to_string(path).map_err(|e| ExecutorError::Io(format!("{}: {e}", path.display())))?;
        let reports = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| ExecutorError::Io(format!("{}: {e}", path.display()))))
            .collect::<Result<Vec<ValidationReport>, _>>()?;
        let recorded = Self::new(reports.into_iter().skip(skip));
        *recorded.used.lock().expect("fresh mutex") = skip;
        Ok(recorded)
    }
}

impl CandidateExecutor for RecordedExecutor {
    fn execute(&self, _source: &str, design: &DesignPair) -> Result<ValidationReport, ExecutorError> {
        design.check()?;
        let mut used = self.used.lock().expect("report cursor lock");
        let report = self.reports.lock().expect("report queue lock").pop_front();
        let report = report.ok_or(ExecutorError::RecordingExhausted(*used))?;
        *used += 1;
        Ok(report)
    }
}

/// How a session validates candidates; stored with the session so that
/// later commands rebuild the same executor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExecutorSpec {
    Sandbox(ExecutionConfig),
    /// Reports captured earlier, one JSON object per line.
    Recorded { reports: PathBuf },
}

impl ExecutorSpec {
    /// `consumed` reports have already been used by the session.
    pub fn open(&self, consumed: usize) -> Result<Box<dyn CandidateExecutor>, ExecutorError> {
        match self {
            ExecutorSpec::Sandbox(cfg) => Ok(Box::new(SandboxExecutor::new(cfg.clone())?)),
            ExecutorSpec::Recorded { reports } => Ok(Box::new(RecordedExecutor::from_jsonl(reports, consumed)?)),
        }
    }
}
