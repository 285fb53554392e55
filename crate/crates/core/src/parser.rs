//! Turns raw model replies into design choices or code candidates.
//!
//! Design replies use a line layout:
//!
//! ```text
//! OBSERVATION:
//! agent_x | column of the agent | discrete{0,1,2}
//! speed | forward velocity in m/s | continuous[0,30]
//! ACTION:
//! move | N, E, S, W | discrete{0,1,2,3}
//! ```
//!
//! Grammar (whitespace between tokens is ignored):
//!
//! ```text
//! reply         = { prose-line } section section { prose-line }
//! section       = header { attribute-line | blank-line }
//! header        = ("OBSERVATION" | "ACTION") ":"
//! attribute     = [ "-" | "*" ] name "|" description "|" quantification
//! quantification = "continuous[" real "," real "]" [ "^" integer ]
//!                | "discrete{" integer { "," integer } "}"
//! ```
//!
//! Header and keyword matching is case-insensitive. A description may itself
//! contain `|`: everything between the first and the last bar is kept. A
//! section ends at the next header or at the first line without a bar.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{Attribute, ComponentKind, DesignChoice, DesignPair, Quantification};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplyKind {
    Design,
    Code,
    Refusal,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeCandidate {
    pub language_tag: String,
    /// Block interior, LF line endings, no trailing newline.
    pub source: String,
    pub block_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {reason}")]
    MalformedDesign { line: usize, reason: String },
    #[error("missing {0} section")]
    MissingSection(ComponentKind),
}

fn fence_info(line: &str) -> Option<&str> {
    line.trim_start().strip_prefix("```").map(|rest| rest.trim_start_matches('`').trim())
}

/// Every complete triple-backtick block, in order. An unterminated final
/// fence yields nothing; fences do not nest.
pub fn extract_code_blocks(text: &str) -> Vec<CodeCandidate> {
    let normalized = text.replace("\r\n", "\n").replace('\r', "\n");
    let mut blocks = Vec::new();
    let mut open: Option<(String, Vec<&str>)> = None;
    for line in normalized.split('\n') {
        match (&mut open, fence_info(line)) {
            (None, Some(tag)) => open = Some((tag.to_string(), Vec::new())),
            (None, None) => {}
            (Some(_), Some("")) => {
                let (language_tag, lines) = open.take().expect("block is open");
                blocks.push(CodeCandidate { language_tag, source: lines.join("\n"), block_index: blocks.len() });
            }
            (Some((_, lines)), _) => lines.push(line),
        }
    }
    blocks
}

/// Longest candidate by characters; ties go to the earliest.
pub fn select_candidate(blocks: &[CodeCandidate]) -> Option<&CodeCandidate> {
    blocks.iter().fold(None, |best: Option<&CodeCandidate>, b| match best {
        Some(cur) if cur.source.chars().count() >= b.source.chars().count() => Some(cur),
        _ => Some(b),
    })
}

fn header(line: &str) -> Option<ComponentKind> {
    let t = line.trim().trim_matches(|c| c == '*' || c == '#' || c == ' ');
    let word = t.strip_suffix(':')?.trim();
    if word.eq_ignore_ascii_case("observation") {
        Some(ComponentKind::Observation)
    } else if word.eq_ignore_ascii_case("action") {
        Some(ComponentKind::Action)
    } else {
        None
    }
}

fn strip_keyword<'a>(text: &'a str, keyword: &str) -> Option<&'a str> {
    let head = text.get(..keyword.len())?;
    head.eq_ignore_ascii_case(keyword).then(|| text[keyword.len()..].trim_start())
}

/// Parses one quantification in reply grammar.
pub fn parse_quantification(text: &str) -> Result<Quantification, String> {
    let t = text.trim();
    if let Some(rest) = strip_keyword(t, "continuous") {
        let inner = rest.strip_prefix('[').ok_or("expected `[` after continuous")?;
        let close = inner.find(']').ok_or("missing `]`")?;
        let (bounds, tail) = (&inner[..close], inner[close + 1..].trim());
        let (l, u) = bounds.split_once(',').ok_or("expected `lower,upper`")?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("`{}` is not a number", s.trim()));
        let (lower, upper) = (num(l)?, num(u)?);
        let dims = match tail {
            "" => 1,
            _ => {
                let n = tail.strip_prefix('^').ok_or_else(|| format!("unexpected `{tail}`"))?.trim();
                n.parse::<u32>().map_err(|_| format!("`{n}` is not a dimension count"))?
            }
        };
        return Ok(Quantification::Continuous { lower, upper, dims });
    }
    if let Some(rest) = strip_keyword(t, "discrete") {
        let inner = rest.strip_prefix('{').ok_or("expected `{` after discrete")?;
        let inner = inner.strip_suffix('}').ok_or("missing `}` at end")?;
        let values = inner
            .split(',')
            .map(|v| v.trim().parse::<i64>().map_err(|_| format!("`{}` is not an integer", v.trim())))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Quantification::Discrete { values });
    }
    Err(format!("unknown quantification `{t}`"))
}

fn parse_attribute(line: &str) -> Result<Attribute, String> {
    let body = line.trim();
    let body = body.strip_prefix("- ").or_else(|| body.strip_prefix("* ")).unwrap_or(body);
    let parts: Vec<&str> = body.split('|').collect();
    if parts.len() < 3 {
        return Err("expected `name | description | quantification`".into());
    }
    let name = parts[0].trim();
    let quant = parts[parts.len() - 1];
    let description = parts[1..parts.len() - 1].join("|").trim().to_string();
    Ok(Attribute::new(name, description, parse_quantification(quant)?))
}

/// Parses the observation and action sections of a design reply.
pub fn parse_design_reply(text: &str) -> Result<DesignPair, ParseError> {
    let normalized = text.replace("\r\n", "\n").replace('\r', "\n");
    // (kind, header line, attributes with their lines)
    let mut sections: Vec<(ComponentKind, usize, Vec<(usize, Attribute)>)> = Vec::new();
    let mut in_section = false;
    for (i, line) in normalized.split('\n').enumerate() {
        let n = i + 1;
        if let Some(kind) = header(line) {
            if sections.iter().any(|(k, _, _)| *k == kind) {
                return Err(ParseError::MalformedDesign { line: n, reason: format!("duplicate {kind} section") });
            }
            sections.push((kind, n, Vec::new()));
            in_section = true;
            continue;
        }
        if !in_section || line.trim().is_empty() {
            continue;
        }
        if !line.contains('|') {
            in_section = false;
            continue;
        }
        let attr = parse_attribute(line).map_err(|reason| ParseError::MalformedDesign { line: n, reason })?;
        sections.last_mut().expect("inside a section").2.push((n, attr));
    }

    let mut build = |kind: ComponentKind| -> Result<DesignChoice, ParseError> {
        let idx = sections.iter().position(|(k, _, _)| *k == kind).ok_or(ParseError::MissingSection(kind))?;
        let (_, header_line, attrs) = sections.swap_remove(idx);
        let lines: Vec<usize> = attrs.iter().map(|(n, _)| *n).collect();
        let choice = DesignChoice::new(kind, attrs.into_iter().map(|(_, a)| a).collect());
        if let Some(v) = choice.validate().into_iter().next() {
            let line = v
                .attribute
                .as_ref()
                .and_then(|name| {
                    choice.attributes.iter().enumerate().rev().find(|(_, a)| a.name == *name).map(|(j, _)| lines[j])
                })
                .unwrap_or(header_line);
            return Err(ParseError::MalformedDesign { line, reason: v.to_string() });
        }
        Ok(choice)
    };
    let observation = build(ComponentKind::Observation)?;
    let action = build(ComponentKind::Action)?;
    Ok(DesignPair::new(observation, action))
}

/// Renders a design pair in the reply layout; inverse of
/// [`parse_design_reply`] for valid designs with single-line descriptions.
pub fn render_design_layout(pair: &DesignPair) -> String {
    let mut out = String::new();
    for (label, choice) in [("OBSERVATION:", &pair.observation), ("ACTION:", &pair.action)] {
        out.push_str(label);
        out.push('\n');
        for a in &choice.attributes {
            out.push_str(&format!("{} | {} | {}\n", a.name, a.description, a.quantification));
        }
    }
    out
}

pub const DEFAULT_REFUSAL_PHRASES: &[&str] = &[
    "i cannot",
    "i can't",
    "i can not",
    "i won't",
    "i will not",
    "i'm unable",
    "i am unable",
    "i'm sorry",
    "i am sorry",
    "as an ai",
    "cannot assist",
    "cannot help",
    "can't help",
    "not able to help",
];

/// Case-insensitive refusal phrases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefusalLexicon {
    phrases: Vec<String>,
}

impl Default for RefusalLexicon {
    fn default() -> Self {
        Self::new(DEFAULT_REFUSAL_PHRASES.iter().copied())
    }
}

impl RefusalLexicon {
    pub fn new<S: AsRef<str>>(phrases: impl IntoIterator<Item = S>) -> Self {
        Self { phrases: phrases.into_iter().map(|p| p.as_ref().to_lowercase()).filter(|p| !p.is_empty()).collect() }
    }

    pub fn matches(&self, text: &str) -> bool {
        let lower = text.to_lowercase();
        self.phrases.iter().any(|p| lower.contains(p.as_str()))
    }
}

/// Design, else Code, else Refusal, else Malformed.
pub fn classify(text: &str, lexicon: &RefusalLexicon) -> ReplyKind {
    if parse_design_reply(text).is_ok() {
        ReplyKind::Design
    } else if !extract_code_blocks(text).is_empty() {
        ReplyKind::Code
    } else if lexicon.matches(text) {
        ReplyKind::Refusal
    } else {
        ReplyKind::Malformed
    }
}
