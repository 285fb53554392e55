//! Design choices: the attributes that describe an observation or action
//! component, each bound to a numeric quantification.
//!
//! Documents are JSON:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "component_kind": "observation",
//!   "attributes": [
//!     {"name": "speed", "description": "forward velocity",
//!      "quantification": {"kind": "continuous", "lower": 0.0, "upper": 30.0, "dims": 1}},
//!     {"name": "has_key", "description": "key collected",
//!      "quantification": {"kind": "discrete", "values": [0, 1]}}
//!   ]
//! }
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Quantification {
    /// The box `[lower, upper]^dims`, same bounds on every dimension.
    Continuous { lower: f64, upper: f64, dims: u32 },
    /// A finite, strictly increasing set of integers.
    Discrete { values: Vec<i64> },
}

impl Quantification {
    pub fn is_continuous(&self) -> bool {
        matches!(self, Quantification::Continuous { .. })
    }

    /// Slots this attribute occupies in a flat layout.
    pub fn dims(&self) -> u32 {
        match self {
            Quantification::Continuous { dims, .. } => *dims,
            Quantification::Discrete { .. } => 1,
        }
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            Quantification::Continuous { lower, upper, dims } => {
                if !lower.is_finite() || !upper.is_finite() {
                    out.push("bounds must be finite".to_string());
                } else if lower >= upper {
                    out.push("lower must be strictly below upper".to_string());
                }
                if *dims == 0 {
                    out.push("dims must be at least 1".to_string());
                }
            }
            Quantification::Discrete { values } => {
                if values.is_empty() {
                    out.push("discrete values must be nonempty".to_string());
                } else if values.windows(2).any(|w| w[0] >= w[1]) {
                    out.push("discrete values must be strictly increasing".to_string());
                }
            }
        }
        out
    }
}

/// Reply-layout form: `continuous[l,u]`, `continuous[l,u]^n`, `discrete{a,b}`.
impl fmt::Display for Quantification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantification::Continuous { lower, upper, dims: 1 } => write!(f, "continuous[{lower:?},{upper:?}]"),
            Quantification::Continuous { lower, upper, dims } => {
                write!(f, "continuous[{lower:?},{upper:?}]^{dims}")
            }
            Quantification::Discrete { values } => {
                let joined: Vec<String> = values.iter().map(i64::to_string).collect();
                write!(f, "discrete{{{}}}", joined.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attribute {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub quantification: Quantification,
}

impl Attribute {
    pub fn new(name: impl Into<String>, description: impl Into<String>, quantification: Quantification) -> Self {
        Self { name: name.into(), description: description.into(), quantification }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Observation,
    Action,
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentKind::Observation => "observation",
            ComponentKind::Action => "action",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignChoice {
    pub component_kind: ComponentKind,
    pub attributes: Vec<Attribute>,
}

/// A pair of observation and action designs, as proposed or approved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPair {
    pub observation: DesignChoice,
    pub action: DesignChoice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// `None` for choice-level problems.
    pub attribute: Option<String>,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.attribute {
            Some(name) => write!(f, "{name}: {}", self.reason),
            None => f.write_str(&self.reason),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("invalid {kind} design: {}", join_violations(.violations))]
    Invalid { kind: ComponentKind, violations: Vec<Violation> },
    #[error("component kinds differ: {0} vs {1}")]
    KindMismatch(ComponentKind, ComponentKind),
    #[error("expected an {expected} design, found {found}")]
    WrongKind { expected: ComponentKind, found: ComponentKind },
    #[error("line {line}, column {column}: {message}")]
    Decode { line: usize, column: usize, message: String },
    #[error("unsupported schema_version {0}")]
    UnsupportedVersion(u32),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl DesignChoice {
    pub fn new(component_kind: ComponentKind, attributes: Vec<Attribute>) -> Self {
        Self { component_kind, attributes }
    }

    /// Every violated invariant; empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.attributes.is_empty() {
            out.push(Violation { attribute: None, reason: "at least one attribute is required".into() });
        }
        for (i, attr) in self.attributes.iter().enumerate() {
            let at = || Some(attr.name.clone());
            if !is_identifier(&attr.name) {
                out.push(Violation { attribute: at(), reason: "name must match [A-Za-z][A-Za-z0-9_]*".into() });
            }
            if self.attributes[..i].iter().any(|a| a.name == attr.name) {
                out.push(Violation { attribute: at(), reason: "duplicate attribute name".into() });
            }
            for reason in attr.quantification.violations() {
                out.push(Violation { attribute: at(), reason });
            }
        }
        out
    }

    pub fn check(&self) -> Result<(), SchemaError> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(SchemaError::Invalid { kind: self.component_kind, violations })
        }
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn encode(&self) -> Result<String, SchemaError> {
        self.check()?;
        let doc = DocumentRef {
            schema_version: SCHEMA_VERSION,
            component_kind: self.component_kind,
            attributes: &self.attributes,
        };
        Ok(serde_json::to_string_pretty(&doc).expect("design documents always serialize"))
    }

    /// Parses a design document. Structural validity is checked separately
    /// with [`DesignChoice::validate`].
    pub fn decode(text: &str) -> Result<Self, SchemaError> {
        let doc: Document = serde_json::from_str(text).map_err(|e| SchemaError::Decode {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(SchemaError::UnsupportedVersion(doc.schema_version));
        }
        Ok(Self { component_kind: doc.component_kind, attributes: doc.attributes })
    }

    pub fn to_space_decl(&self) -> Result<SpaceDecl, SchemaError> {
        self.check()?;
        let all_continuous = self.attributes.iter().all(|a| a.quantification.is_continuous());
        if all_continuous {
            let (mut lower, mut upper) = (Vec::new(), Vec::new());
            for attr in &self.attributes {
                if let Quantification::Continuous { lower: l, upper: u, dims } = attr.quantification {
                    lower.extend(std::iter::repeat_n(l, dims as usize));
                    upper.extend(std::iter::repeat_n(u, dims as usize));
                }
            }
            let dims = lower.len() as u32;
            return Ok(SpaceDecl::Box { lower, upper, dims });
        }
        if let [only] = self.attributes.as_slice() {
            return Ok(attribute_space(only));
        }
        Ok(SpaceDecl::Composite {
            entries: self.attributes.iter().map(|a| (a.name.clone(), attribute_space(a))).collect(),
        })
    }
}

fn attribute_space(attr: &Attribute) -> SpaceDecl {
    match &attr.quantification {
        Quantification::Continuous { lower, upper, dims } => SpaceDecl::Box {
            lower: vec![*lower; *dims as usize],
            upper: vec![*upper; *dims as usize],
            dims: *dims,
        },
        Quantification::Discrete { values } => SpaceDecl::Discrete { n: values.len() as u32, values: values.clone() },
    }
}

#[derive(Serialize)]
struct DocumentRef<'a> {
    schema_version: u32,
    component_kind: ComponentKind,
    attributes: &'a [Attribute],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    schema_version: u32,
    component_kind: ComponentKind,
    attributes: Vec<Attribute>,
}

impl DesignPair {
    pub fn new(observation: DesignChoice, action: DesignChoice) -> Self {
        Self { observation, action }
    }

    /// Both choices valid and of the right component kinds.
    pub fn check(&self) -> Result<(), SchemaError> {
        for (choice, expected) in [(&self.observation, ComponentKind::Observation), (&self.action, ComponentKind::Action)] {
            if choice.component_kind != expected {
                return Err(SchemaError::WrongKind { expected, found: choice.component_kind });
            }
            choice.check()?;
        }
        Ok(())
    }

    pub fn space_kind(&self) -> Result<SpaceKind, SchemaError> {
        classify_spaces(&self.observation, &self.action)
    }
}

/// Abstract space declaration a generated environment must expose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpaceDecl {
    Box { lower: Vec<f64>, upper: Vec<f64>, dims: u32 },
    /// `n` choices; `values` keeps the integers they stand for.
    Discrete { n: u32, values: Vec<i64> },
    /// Entries in attribute order.
    Composite { entries: Vec<(String, SpaceDecl)> },
}

impl SpaceDecl {
    /// Discrete entries count as one slot.
    pub fn total_dims(&self) -> u32 {
        match self {
            SpaceDecl::Box { dims, .. } => *dims,
            SpaceDecl::Discrete { .. } => 1,
            SpaceDecl::Composite { entries } => entries.iter().map(|(_, s)| s.total_dims()).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    Continuous,
    Discrete,
    Hybrid,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceKind::Continuous => "Continuous",
            SpaceKind::Discrete => "Discrete",
            SpaceKind::Hybrid => "Hybrid",
        })
    }
}

pub fn classify_spaces(obs: &DesignChoice, act: &DesignChoice) -> Result<SpaceKind, SchemaError> {
    obs.check()?;
    act.check()?;
    let mut kinds = obs.attributes.iter().chain(&act.attributes).map(|a| a.quantification.is_continuous());
    let first = kinds.next().expect("valid choices have attributes");
    Ok(match (first, kinds.all(|k| k == first)) {
        (_, false) => SpaceKind::Hybrid,
        (true, true) => SpaceKind::Continuous,
        (false, true) => SpaceKind::Discrete,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DesignDiff {
    /// New attributes, in their target order.
    pub added: Vec<Attribute>,
    pub removed: Vec<String>,
    /// Same name, new quantification (and description).
    pub requantified: Vec<Attribute>,
    /// Same name and quantification, new description.
    pub redescribed: Vec<Attribute>,
    /// Target name order, present only when removal and appending alone do
    /// not produce it.
    pub order: Option<Vec<String>>,
}

impl DesignDiff {
    pub fn is_empty(&self) -> bool {
        *self == DesignDiff::default()
    }

    pub fn apply(&self, base: &DesignChoice) -> DesignChoice {
        let mut attributes: Vec<Attribute> =
            base.attributes.iter().filter(|a| !self.removed.contains(&a.name)).cloned().collect();
        for changed in self.requantified.iter().chain(&self.redescribed) {
            if let Some(slot) = attributes.iter_mut().find(|a| a.name == changed.name) {
                *slot = changed.clone();
            }
        }
        attributes.extend(self.added.iter().cloned());
        if let Some(order) = &self.order {
            attributes.sort_by_key(|a| order.iter().position(|n| *n == a.name).unwrap_or(usize::MAX));
        }
        DesignChoice { component_kind: base.component_kind, attributes }
    }
}

pub fn diff(a: &DesignChoice, b: &DesignChoice) -> Result<DesignDiff, SchemaError> {
    if a.component_kind != b.component_kind {
        return Err(SchemaError::KindMismatch(a.component_kind, b.component_kind));
    }
    let mut d = DesignDiff::default();
    for old in &a.attributes {
        match b.attribute(&old.name) {
            None => d.removed.push(old.name.clone()),
            Some(new) if new.quantification != old.quantification => d.requantified.push(new.clone()),
            Some(new) if new.description != old.description => d.redescribed.push(new.clone()),
            Some(_) => {}
        }
    }
    d.added = b.attributes.iter().filter(|n| a.attribute(&n.name).is_none()).cloned().collect();
    let natural: Vec<&str> = a
        .attributes
        .iter()
        .filter(|x| !d.removed.contains(&x.name))
        .chain(&d.added)
        .map(|x| x.name.as_str())
        .collect();
    let target: Vec<&str> = b.attributes.iter().map(|x| x.name.as_str()).collect();
    if natural != target {
        d.order = Some(target.into_iter().map(String::from).collect());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cont(lower: f64, upper: f64, dims: u32) -> Quantification {
        Quantification::Continuous { lower, upper, dims }
    }

    fn disc(values: &[i64]) -> Quantification {
        Quantification::Discrete { values: values.to_vec() }
    }

    fn obs(attrs: Vec<Attribute>) -> DesignChoice {
        DesignChoice::new(ComponentKind::Observation, attrs)
    }

    #[test]
    fn accepts_box_and_binary_flag() {
        assert!(obs(vec![Attribute::new("joint_torque", "", cont(-1.0, 1.0, 3))]).validate().is_empty());
        assert!(obs(vec![Attribute::new("has_key", "", disc(&[0, 1]))]).validate().is_empty());
    }

    #[test]
    fn degenerate_interval_is_reported() {
        let v = obs(vec![Attribute::new("x", "", cont(2.0, 2.0, 1))]).validate();
        assert_eq!(v, vec![Violation { attribute: Some("x".into()), reason: "lower must be strictly below upper".into() }]);
    }

    #[test]
    fn all_violations_are_listed() {
        let v = obs(vec![
            Attribute::new("1bad", "", cont(f64::NEG_INFINITY, 0.0, 0)),
            Attribute::new("a", "", disc(&[])),
            Attribute::new("a", "", disc(&[1, 1])),
        ])
        .validate();
        assert_eq!(v.len(), 6, "{v:?}");
        assert!(obs(vec![]).validate()[0].attribute.is_none());
    }

    #[test]
    fn space_classification() {
        let act = DesignChoice::new(ComponentKind::Action, vec![Attribute::new("move", "", disc(&[0, 1, 2, 3]))]);
        let grid = obs(vec![Attribute::new("x", "", disc(&[0, 1, 2]))]);
        let arm = obs(vec![Attribute::new("q", "", cont(-1.0, 1.0, 2))]);
        let torque = DesignChoice::new(ComponentKind::Action, vec![Attribute::new("t", "", cont(-1.0, 1.0, 2))]);
        assert_eq!(classify_spaces(&grid, &act), Ok(SpaceKind::Discrete));
        assert_eq!(classify_spaces(&arm, &torque), Ok(SpaceKind::Continuous));
        assert_eq!(classify_spaces(&arm, &act), Ok(SpaceKind::Hybrid));
        assert!(classify_spaces(&obs(vec![]), &act).is_err());
    }

    #[test]
    fn space_declarations() {
        let box2 = obs(vec![Attribute::new("p", "", cont(-1.0, 1.0, 2))]).to_space_decl().unwrap();
        assert_eq!(box2, SpaceDecl::Box { lower: vec![-1.0, -1.0], upper: vec![1.0, 1.0], dims: 2 });
        let four = obs(vec![Attribute::new("d", "", disc(&[0, 1, 2, 3]))]).to_space_decl().unwrap();
        assert_eq!(four, SpaceDecl::Discrete { n: 4, values: vec![0, 1, 2, 3] });
        let mixed = obs(vec![Attribute::new("p", "", cont(0.0, 1.0, 1)), Attribute::new("d", "", disc(&[5, 9]))])
            .to_space_decl()
            .unwrap();
        match &mixed {
            SpaceDecl::Composite { entries } => {
                assert_eq!(entries.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(), ["p", "d"]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(mixed.total_dims(), 2);
    }

    #[test]
    fn boxes_concatenate_in_attribute_order() {
        let c = obs(vec![Attribute::new("a", "", cont(0.0, 1.0, 2)), Attribute::new("b", "", cont(-5.0, 5.0, 1))]);
        assert_eq!(
            c.to_space_decl().unwrap(),
            SpaceDecl::Box { lower: vec![0.0, 0.0, -5.0], upper: vec![1.0, 1.0, 5.0], dims: 3 }
        );
    }

    #[test]
    fn decode_errors_carry_location() {
        let err = DesignChoice::decode("{\n  \"schema_version\": 1,\n  \"component_kind\": \"action\"\n}").unwrap_err();
        match err {
            SchemaError::Decode { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("attributes"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let unknown = r#"{"schema_version":1,"component_kind":"action","attributes":[
            {"name":"a","quantification":{"kind":"categorical","values":[1]}}]}"#;
        assert!(matches!(DesignChoice::decode(unknown), Err(SchemaError::Decode { line: 2, .. })));
        let future = r#"{"schema_version":2,"component_kind":"action","attributes":[]}"#;
        assert_eq!(DesignChoice::decode(future), Err(SchemaError::UnsupportedVersion(2)));
    }

    #[test]
    fn diff_examples() {
        let speed = |u: f64| Attribute::new("speed", "forward speed", cont(0.0, u, 1));
        let lane = Attribute::new("lane", "lane index", disc(&[0, 1, 2]));
        let a = obs(vec![lane.clone()]);
        assert!(diff(&a, &a).unwrap().is_empty());
        let b = obs(vec![lane.clone(), speed(30.0)]);
        let d = diff(&a, &b).unwrap();
        assert_eq!(d.added.iter().map(|x| x.name.as_str()).collect::<Vec<_>>(), ["speed"]);
        assert_eq!(d.apply(&a), b);
        let c = obs(vec![lane, speed(50.0)]);
        let d = diff(&b, &c).unwrap();
        assert_eq!(d.requantified.len(), 1);
        assert!(d.added.is_empty() && d.removed.is_empty());
        let act = DesignChoice::new(ComponentKind::Action, b.attributes.clone());
        assert!(matches!(diff(&b, &act), Err(SchemaError::KindMismatch(..))));
    }

    #[test]
    fn display_matches_reply_grammar() {
        assert_eq!(cont(0.0, 30.0, 1).to_string(), "continuous[0.0,30.0]");
        assert_eq!(cont(-1.0, 1.0, 3).to_string(), "continuous[-1.0,1.0]^3");
        assert_eq!(disc(&[0, 1, 2, 3]).to_string(), "discrete{0,1,2,3}");
    }
}
