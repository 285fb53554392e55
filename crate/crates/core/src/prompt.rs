//! Renders the design, codify, revision and debug queries from editable
//! templates, and counts description words.
//!
//! Template syntax:
//! - `{{name}}` is replaced by the bound value;
//! - `{{#name}}...{{/name}}` is kept only when `name` is bound to non-blank
//!   text;
//! - a line `[system]` or `[user]` starts the message for that role; a
//!   template without markers is a single user message.
//!
//! Bound values are inserted once and never rescanned. Any `{{` or `}}`
//! inside a value is written as `{ {` or `} }` so rendered prompts never
//! contain anything that looks like a placeholder.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::ValidationReport;
use crate::gateway::{Message, Role};
use crate::parser::render_design_layout;
use crate::schema::{DesignPair, SchemaError};

pub const TEMPLATES_VAR: &str = "DELF_TEMPLATES";
/// Failure text handed back to the model keeps this many trailing chars.
pub const FAILURE_TEXT_LIMIT: usize = 4000;
const TRUNCATION_MARK: &str = "[...truncated...]\n";

pub const DEFAULT_API_TEMPLATE: &str = include_str!("../templates/gym_skeleton.py");

pub const DEFAULT_CODING_RULES: &[&str] = &[
    "Use only the standard library, numpy and gymnasium.",
    "Declare observation_space and action_space in __init__ so they match the design exactly.",
    "Observations must always lie inside observation_space.",
    "step returns (observation, reward, terminated, truncated, info) with a finite float reward.",
    "Define exactly one environment class.",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Design,
    Codify,
    Revision,
    Debug,
}

impl QueryKind {
    pub const ALL: [QueryKind; 4] = [QueryKind::Design, QueryKind::Codify, QueryKind::Revision, QueryKind::Debug];

    pub fn file_name(self) -> &'static str {
        match self {
            QueryKind::Design => "design.tmpl",
            QueryKind::Codify => "codify.tmpl",
            QueryKind::Revision => "revision.tmpl",
            QueryKind::Debug => "debug.tmpl",
        }
    }

    pub fn required_placeholders(self) -> &'static [&'static str] {
        match self {
            QueryKind::Design => &["description"],
            QueryKind::Codify => &["design", "api_template"],
            QueryKind::Revision => &["design", "feedback"],
            QueryKind::Debug => &["source", "failure"],
        }
    }

    fn bundled(self) -> &'static str {
        match self {
            QueryKind::Design => include_str!("../templates/design.tmpl"),
            QueryKind::Codify => include_str!("../templates/codify.tmpl"),
            QueryKind::Revision => include_str!("../templates/revision.tmpl"),
            QueryKind::Debug => include_str!("../templates/debug.tmpl"),
        }
    }

    /// Design and revision queries propose designs; codify and debug
    /// queries produce code.
    pub fn produces_code(self) -> bool {
        matches!(self, QueryKind::Codify | QueryKind::Debug)
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryKind::Design => "design",
            QueryKind::Codify => "codify",
            QueryKind::Revision => "revision",
            QueryKind::Debug => "debug",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("template {template} lacks placeholder {{{{{name}}}}}")]
    MissingPlaceholder { template: QueryKind, name: String },
    #[error("template {template} uses unbound placeholder {{{{{name}}}}}")]
    Unbound { template: QueryKind, name: String },
    #[error("template {template}: unterminated section {{{{#{name}}}}}")]
    UnterminatedSection { template: QueryKind, name: String },
    #[error("cannot read template {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("the validation report is a pass; nothing to debug")]
    NothingToDebug,
    #[error(transparent)]
    Design(#[from] SchemaError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: QueryKind,
    pub body: String,
    pub required_placeholders: BTreeSet<String>,
}

impl PromptTemplate {
    pub fn new(name: QueryKind, body: impl Into<String>) -> Result<Self, PromptError> {
        let body = body.into();
        for p in name.required_placeholders() {
            if !body.contains(&format!("{{{{{p}}}}}")) {
                return Err(PromptError::MissingPlaceholder { template: name, name: p.to_string() });
            }
        }
        Ok(Self {
            name,
            required_placeholders: name.required_placeholders().iter().map(|s| s.to_string()).collect(),
            body,
        })
    }

    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<RenderedPrompt, PromptError> {
        let expanded = self.expand_sections(&self.body, bindings)?;
        let text = self.substitute(&expanded, bindings)?;
        let mut messages: Vec<Message> = Vec::new();
        let mut role = Role::User;
        let mut current = String::new();
        let mut seen_marker = false;
        let flush = |role: Role, text: &mut String, messages: &mut Vec<Message>| {
            let content = text.trim().to_string();
            if !content.is_empty() {
                messages.push(Message::new(role, content));
            }
            text.clear();
        };
        for line in text.split_inclusive('\n') {
            let marker = match line.trim_end() {
                "[system]" => Some(Role::System),
                "[user]" => Some(Role::User),
                _ => None,
            };
            match marker {
                Some(r) => {
                    if seen_marker || !current.trim().is_empty() {
                        flush(role, &mut current, &mut messages);
                    }
                    current.clear();
                    role = r;
                    seen_marker = true;
                }
                None => current.push_str(line),
            }
        }
        flush(role, &mut current, &mut messages);
        Ok(RenderedPrompt { messages, template_name: self.name, bindings: bindings.clone() })
    }

    fn expand_sections(&self, body: &str, bindings: &BTreeMap<String, String>) -> Result<String, PromptError> {
        let mut out = String::with_capacity(body.len());
        let mut rest = body;
        while let Some(start) = rest.find("{{#") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 3..];
            let Some(close) = after.find("}}") else {
                out.push_str(&rest[start..]);
                return Ok(out);
            };
            let name = after[..close].trim().to_string();
            let inner_start = skip_newline(&after[close + 2..]);
            let end_tag = format!("{{{{/{name}}}}}");
            let Some(end) = inner_start.find(&end_tag) else {
                return Err(PromptError::UnterminatedSection { template: self.name, name });
            };
            if bindings.get(&name).is_some_and(|v| !v.trim().is_empty()) {
                out.push_str(&inner_start[..end]);
            }
            rest = skip_newline(&inner_start[end + end_tag.len()..]);
        }
        out.push_str(rest);
        Ok(out)
    }

    fn substitute(&self, text: &str, bindings: &BTreeMap<String, String>) -> Result<String, PromptError> {
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            match after.find("}}") {
                Some(close) if is_placeholder_name(after[..close].trim()) => {
                    let name = after[..close].trim();
                    let value = bindings
                        .get(name)
                        .ok_or_else(|| PromptError::Unbound { template: self.name, name: name.to_string() })?;
                    out.push_str(&escape_braces(value));
                    rest = &after[close + 2..];
                }
                _ => {
                    out.push_str("{ {");
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        Ok(escape_braces(&out))
    }
}

fn skip_newline(s: &str) -> &str {
    s.strip_prefix("\r\n").or_else(|| s.strip_prefix('\n')).unwrap_or(s)
}

fn is_placeholder_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn escape_braces(value: &str) -> String {
    let mut v = value.to_string();
    while v.contains("{{") || v.contains("}}") {
        v = v.replace("{{", "{ {").replace("}}", "} }");
    }
    v
}

/// True if the text still contains a `{{name}}`-shaped marker.
pub fn has_unresolved_placeholder(text: &str) -> bool {
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        if let Some(close) = after.find("}}") {
            let inner = after[..close].trim().trim_start_matches(['#', '/']);
            if is_placeholder_name(inner) {
                return true;
            }
        }
        rest = after;
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub messages: Vec<Message>,
    pub template_name: QueryKind,
    pub bindings: BTreeMap<String, String>,
}

impl RenderedPrompt {
    pub fn system(&self) -> Option<&str> {
        self.messages.iter().find(|m| m.role == Role::System).map(|m| m.content.as_str())
    }

    /// All user-role text, joined.
    pub fn user(&self) -> String {
        self.messages.iter().filter(|m| m.role == Role::User).map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<QueryKind, PromptTemplate>,
}

impl TemplateSet {
    pub fn bundled() -> Self {
        let templates = QueryKind::ALL
            .iter()
            .map(|&k| (k, PromptTemplate::new(k, k.bundled()).expect("bundled templates are valid")))
            .collect();
        Self { templates }
    }

    /// Templates from `dir`; files that are absent fall back to the bundled
    /// ones.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::bundled();
        for kind in QueryKind::ALL {
            let path = dir.join(kind.file_name());
            match std::fs::read_to_string(&path) {
                Ok(body) => {
                    set.templates.insert(kind, PromptTemplate::new(kind, body)?);
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(PromptError::Io { path, message: e.to_string() }),
            }
        }
        Ok(set)
    }

    /// `flag`, else `DELF_TEMPLATES`, else bundled.
    pub fn resolve(flag: Option<&Path>) -> Result<Self, PromptError> {
        match flag.map(Path::to_path_buf).or_else(|| std::env::var_os(TEMPLATES_VAR).map(PathBuf::from)) {
            Some(dir) => Self::load_dir(&dir),
            None => Ok(Self::bundled()),
        }
    }

    pub fn get(&self, kind: QueryKind) -> &PromptTemplate {
        &self.templates[&kind]
    }

    fn render(&self, kind: QueryKind, pairs: &[(&str, String)]) -> Result<RenderedPrompt, PromptError> {
        let bindings = pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        self.get(kind).render(&bindings)
    }

    pub fn render_design_query(&self, description: &str) -> Result<RenderedPrompt, PromptError> {
        if description.trim().is_empty() {
            return Err(PromptError::Empty("description"));
        }
        self.render(QueryKind::Design, &[("description", description.to_string())])
    }

    pub fn render_codify_query(
        &self,
        design: &DesignPair,
        api_template: &str,
        rules: &[String],
    ) -> Result<RenderedPrompt, PromptError> {
        design.check()?;
        if api_template.trim().is_empty() {
            return Err(PromptError::Empty("api template"));
        }
        let rules_text: Vec<String> = rules.iter().filter(|r| !r.trim().is_empty()).map(|r| format!("- {r}")).collect();
        self.render(
            QueryKind::Codify,
            &[
                ("design", render_design_layout(design)),
                ("api_template", api_template.trim_end().to_string()),
                ("rules", rules_text.join("\n")),
            ],
        )
    }

    pub fn render_revision_query(&self, current: &DesignPair, feedback: &str) -> Result<RenderedPrompt, PromptError> {
        if feedback.trim().is_empty() {
            return Err(PromptError::Empty("feedback"));
        }
        self.render(
            QueryKind::Revision,
            &[("design", render_design_layout(current)), ("feedback", feedback.to_string())],
        )
    }

    pub fn render_debug_query(
        &self,
        source: &str,
        report: &ValidationReport,
        hint: Option<&str>,
    ) -> Result<RenderedPrompt, PromptError> {
        if report.passed() {
            return Err(PromptError::NothingToDebug);
        }
        self.render(
            QueryKind::Debug,
            &[
                ("source", source.to_string()),
                ("failure", truncate_failure(&report.failure_text())),
                ("hint", hint.unwrap_or_default().to_string()),
            ],
        )
    }
}

/// Keeps the last [`FAILURE_TEXT_LIMIT`] characters (tracebacks end with
/// the proximate cause), marker included.
pub fn truncate_failure(text: &str) -> String {
    let n = text.chars().count();
    if n <= FAILURE_TEXT_LIMIT {
        return text.to_string();
    }
    let keep = FAILURE_TEXT_LIMIT - TRUNCATION_MARK.chars().count();
    let tail: String = text.chars().skip(n - keep).collect();
    format!("{TRUNCATION_MARK}{tail}")
}

/// Word count: maximal runs of non-whitespace characters.
pub fn count_description_tokens(description: &str) -> usize {
    description.split_whitespace().count()
}
