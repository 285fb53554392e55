//! Command-line front end. Exit status 0 on success, 1 on a domain failure,
//! 2 on a usage error.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use delf_analyzer::{
    action_indices, is_necessary_action, is_necessary_observation, is_sufficient, is_sufficient_action, Criterion,
    KeyLockLayout, MdpDocument, ObservationProjection, TabularMdp,
};
use delf_core::replay::{replay_fixture, Fixture, ScriptStep};
use delf_core::schema::DesignPair;
use delf_core::session::{write_metrics_csv, Phase, SessionMetrics, SessionState};
use serde_json::json;

use crate::app::App;
use crate::config::{Config, CONFIG_VAR};
use crate::http;

#[derive(Debug, Parser)]
#[command(name = "delf", version, about = "Turn a task description into a validated RL environment with a language model")]
pub struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true, env = CONFIG_VAR)]
    pub config: Option<PathBuf>,
    /// Session directory; overrides the configuration.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Prompt template directory; overrides the configuration.
    #[arg(long, global = true)]
    pub templates: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a session from a description file.
    Init(InitArgs),
    /// Ask the model for an observation and action design (a revision if feedback is pending).
    Design { id: String },
    /// Record feedback for the next revision or debug query.
    Feedback(FeedbackArgs),
    /// Approve the proposed design, optionally replacing it with an edited one.
    Approve(ApproveArgs),
    /// Ask the model for environment code (a debug query after a failure).
    Codify { id: String },
    /// Run the latest candidate through the executor.
    Validate { id: String },
    /// Stop working on a session.
    Abandon { id: String },
    /// Print a session as JSON.
    Show { id: String },
    /// Write the metrics table of finished sessions as CSV.
    Report(ReportArgs),
    /// Check whether a representation of a tabular MDP is sufficient or necessary.
    Analyze(AnalyzeArgs),
    /// Write a key-lock grid world as an MDP document.
    GenKeylock(GenKeylockArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Drive complete sessions from recorded fixtures and write their metrics.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Environment name used in reports.
    #[arg(long)]
    pub name: String,
    /// File holding the task description.
    #[arg(long)]
    pub description: PathBuf,
    /// Answer model queries from this fixture's transcript and reports instead of the configured runtime.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeedbackArgs {
    pub id: String,
    #[arg(long, conflicts_with = "file", required_unless_present = "file")]
    pub text: Option<String>,
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ApproveArgs {
    pub id: String,
    /// Edited design pair (JSON with `observation` and `action`).
    #[arg(long)]
    pub edited: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Sessions to include; all finished sessions when omitted.
    pub ids: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// MDP document (JSON).
    #[arg(long)]
    pub mdp: PathBuf,
    /// Observed attributes; all attributes when omitted.
    #[arg(long, value_delimiter = ',')]
    pub keep: Vec<String>,
    /// Attributes removed from the observed set.
    #[arg(long, value_delimiter = ',')]
    pub drop: Vec<String>,
    /// Available actions; when given, the action set is analysed instead.
    #[arg(long, value_delimiter = ',')]
    pub actions: Vec<String>,
    /// Also check that every single removal is insufficient.
    #[arg(long)]
    pub necessity: bool,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
}

fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    Ok((x.trim().parse().map_err(|e| format!("{e}"))?, y.trim().parse().map_err(|e| format!("{e}"))?))
}

#[derive(Debug, Args)]
pub struct GenKeylockArgs {
    #[arg(long, default_value_t = 3)]
    pub size: usize,
    #[arg(long, value_parser = parse_cell)]
    pub key: (usize, usize),
    #[arg(long, value_parser = parse_cell)]
    pub lock: (usize, usize),
    #[arg(long, value_parser = parse_cell, default_value = "0,0")]
    pub start: (usize, usize),
    #[arg(long, default_value_t = 0.95)]
    pub gamma: f64,
    #[arg(long, default_value_t = 20)]
    pub horizon: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Address to listen on; keep it local unless something in front authenticates.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Fixture directory, or a transcript file inside one. Repeatable.
    #[arg(long, required = true)]
    pub transcript: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also store the replayed sessions.
    #[arg(long)]
    pub keep: bool,
}

/// Domain failure with a message for stderr.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> Outcome {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| Failure(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(bytes).map_err(Failure::from),
    }
}

fn app(cli: &Cli) -> Result<App, Failure> {
    let mut config = Config::load(cli.config.as_deref()).map_err(Failure)?;
    if let Some(store) = &cli.store {
        config.store = store.clone();
    }
    App::new(config, cli.templates.as_deref()).map_err(Failure)
}

fn step(cli: &Cli, id: &str, step: ScriptStep) -> Outcome {
    let state = app(cli)?.perform(id, &step)?;
    print_json(&summary(&state));
    Ok(())
}

/// Short status printed after each mutation.
pub fn summary(state: &SessionState) -> serde_json::Value {
    json!({
        "session_id": state.session_id,
        "phase": state.phase,
        "trial_counter": state.trial_counter,
        "designs": state.design_history.len(),
        "code_versions": state.code_versions.len(),
        "last_event": state.events.last().map(|e| format!("{:?}: {}", e.kind, e.detail)),
    })
}

fn analyze(args: &AnalyzeArgs) -> Outcome {
    let text = fs::read_to_string(&args.mdp).map_err(|e| Failure(format!("{}: {e}", args.mdp.display())))?;
    let mdp: TabularMdp = MdpDocument::from_json(&text)?.to_mdp()?;
    let criterion = Criterion::with_delta(args.delta);
    if !args.actions.is_empty() {
        let actions = action_indices(&mdp, &args.actions)?;
        let (sufficient, body) = if args.necessity {
            let n = is_necessary_action(&mdp, &actions, &criterion)?;
            (n.verdict.sufficient, serde_json::to_value(&n)?)
        } else {
            let v = is_sufficient_action(&mdp, &actions, &criterion)?;
            (v.sufficient, serde_json::to_value(&v)?)
        };
        print_json(&body);
        println!("{}", if sufficient { "sufficient" } else { "insufficient" });
        return Ok(());
    }
    let mut keep: Vec<String> = if args.keep.is_empty() { mdp.attributes().to_vec() } else { args.keep.clone() };
    for d in &args.drop {
        mdp.attribute_index(d)?;
        keep.retain(|k| k != d);
    }
    let proj = ObservationProjection::from_attributes(&mdp, &keep)?;
    if args.necessity {
        let n = is_necessary_observation(&mdp, &proj, &criterion)?;
        print_json(&n);
        println!("{}", if n.verdict.sufficient { "sufficient" } else { "insufficient" });
        println!("{}", if n.necessary { "necessary" } else { "not necessary" });
    } else {
        let v = is_sufficient(&mdp, &proj, &criterion)?;
        print_json(&v);
        println!("{}", if v.sufficient { "sufficient" } else { "insufficient" });
    }
    Ok(())
}

fn gen_keylock(args: &GenKeylockArgs) -> Outcome {
    let layout = KeyLockLayout { size: args.size, key: args.key, lock: args.lock, start: args.start };
    let mdp: TabularMdp = layout.build(args.gamma, args.horizon)?;
    let doc = MdpDocument::from_mdp(&mdp).to_json();
    write_out(args.out.as_deref(), format!("{doc}\n").as_bytes())
}

fn report(cli: &Cli, args: &ReportArgs) -> Outcome {
    let app = app(cli)?;
    let ids: Vec<String> = if args.ids.is_empty() {
        app.store
            .list()?
            .into_iter()
            .filter(|e| matches!(e.phase, Phase::Executable | Phase::Abandoned))
            .map(|e| e.session_id)
            .collect()
    } else {
        args.ids.clone()
    };
    let rows = ids
        .iter()
        .map(|id| app.store.load(id)?.finalize_metrics())
        .collect::<Result<Vec<SessionMetrics>, _>>()?;
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, &rows)?;
    write_out(args.out.as_deref(), &buf)
}

fn replay(cli: &Cli, args: &ReplayArgs) -> Outcome {
    let app = app(cli)?;
    let mut rows = Vec::new();
    for path in &args.transcript {
        let outcome = replay_fixture(path, &app.templates, &app.config.session)
            .map_err(|e| Failure(format!("{}: {e}", path.display())))?;
        if args.keep {
            app.store.insert(&outcome.state)?;
        }
        rows.push(outcome.metrics);
    }
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, &rows)?;
    write_out(args.out.as_deref(), &buf)
}

fn init(cli: &Cli, args: &InitArgs) -> Outcome {
    let description = fs::read_to_string(&args.description)
        .map_err(|e| Failure(format!("{}: {e}", args.description.display())))?;
    let app = app(cli)?;
    let runtime = match &args.fixture {
        Some(dir) => Some(Fixture::load(dir)?.runtime()),
        None => None,
    };
    let state = app.create(&args.name, &description, runtime)?;
    print_json(&summary(&state));
    Ok(())
}

fn serve(cli: &Cli, args: &ServeArgs) -> Outcome {
    let app = Arc::new(app(cli)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(http::serve(app, args.bind))?;
    Ok(())
}

pub fn execute(cli: &Cli) -> ExitCode {
    let result = match &cli.command {
        Command::Init(a) => init(cli, a),
        Command::Design { id } => step(cli, id, ScriptStep::Propose),
        Command::Feedback(a) => {
            let text = match (&a.text, &a.file) {
                (Some(t), _) => Ok(t.clone()),
                (None, Some(f)) => fs::read_to_string(f).map_err(|e| Failure(format!("{}: {e}", f.display()))),
                (None, None) => Err(Failure("feedback needs --text or --file".into())),
            };
            text.and_then(|text| step(cli, &a.id, ScriptStep::Feedback { text }))
        }
        Command::Approve(a) => {
            let edited = a
                .edited
                .as_ref()
                .map(|p| -> Result<DesignPair, Failure> {
                    let text = fs::read_to_string(p).map_err(|e| Failure(format!("{}: {e}", p.display())))?;
                    serde_json::from_str(&text).map_err(|e| Failure(format!("{}: {e}", p.display())))
                })
                .transpose();
            edited.and_then(|edited| step(cli, &a.id, ScriptStep::Approve { edited }))
        }
        Command::Codify { id } => step(cli, id, ScriptStep::Codify),
        Command::Validate { id } => step(cli, id, ScriptStep::Validate),
        Command::Abandon { id } => step(cli, id, ScriptStep::Abandon),
        Command::Show { id } => app(cli).and_then(|a| {
            print_json(&a.store.load(id)?);
            Ok(())
        }),
        Command::Report(a) => report(cli, a),
        Command::Analyze(a) => analyze(a),
        Command::GenKeylock(a) => gen_keylock(a),
        Command::Serve(a) => serve(cli, a),
        Command::Replay(a) => replay(cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
