//! JSON interchange format for MDP fixtures.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "attributes": ["x", "y", "has_key"],
//!   "states": [{"name": "x0y0k0", "values": [0, 0, 0]}],
//!   "actions": ["N", "E", "S", "W"],
//!   "transitions": [["x0y0k0", "E", "x1y0k0", 1.0]],
//!   "rewards": [["x1y2k1", "E", 1.0]],
//!   "start": [["x0y0k0", 1.0]],
//!   "gamma": 0.95,
//!   "horizon": 20,
//!   "terminals": ["x2y2k1"]
//! }
//! ```
//!
//! Transitions and rewards are sparse: missing rewards are zero, and
//! terminal states get their absorbing self-loops filled in when absent.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{AnalyzerError, Result};
use crate::mdp::{MdpParts, TabularMdp};
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEntry {
    pub name: String,
    #[serde(default)]
    pub values: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub schema_version: u32,
    #[serde(default)]
    pub attributes: Vec<String>,
    pub states: Vec<StateEntry>,
    pub actions: Vec<String>,
    pub transitions: Vec<(String, String, String, f64)>,
    #[serde(default)]
    pub rewards: Vec<(String, String, f64)>,
    pub start: Vec<(String, f64)>,
    pub gamma: f64,
    pub horizon: usize,
    #[serde(default)]
    pub terminals: Vec<String>,
}

fn doc_err(msg: impl Into<String>) -> AnalyzerError {
    AnalyzerError::Document(msg.into())
}

impl MdpDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MdpDocument = serde_json::from_str(text)
            .map_err(|e| doc_err(format!("line {} column {}: {e}", e.line(), e.column())))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(doc_err(format!("unsupported schema_version {}", doc.schema_version)));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mdp documents always serialize")
    }

    pub fn from_mdp<T: Scalar>(mdp: &TabularMdp<T>) -> Self {
        let f = |v: T| v.to_f64().expect("scalar converts to f64");
        let name = |s: usize| mdp.states()[s].clone();
        let mut transitions = Vec::new();
        let mut rewards = Vec::new();
        for s in 0..mdp.n_states() {
            for (a, action) in mdp.actions().iter().enumerate() {
                for &(t, p) in mdp.row(s, a) {
                    transitions.push((name(s), action.clone(), name(t), f(p)));
                }
                let r = mdp.reward(s, a);
                if r != T::zero() {
                    rewards.push((name(s), action.clone(), f(r)));
                }
            }
        }
        Self {
            schema_version: SCHEMA_VERSION,
            attributes: mdp.attributes().to_vec(),
            states: (0..mdp.n_states())
                .map(|s| StateEntry { name: name(s), values: mdp.values(s).to_vec() })
                .collect(),
            actions: mdp.actions().to_vec(),
            transitions,
            rewards,
            start: (0..mdp.n_states())
                .filter(|&s| mdp.start()[s] != T::zero())
                .map(|s| (name(s), f(mdp.start()[s])))
                .collect(),
            gamma: f(mdp.gamma()),
            horizon: mdp.horizon(),
            terminals: (0..mdp.n_states()).filter(|&s| mdp.is_terminal(s)).map(name).collect(),
        }
    }

    pub fn to_mdp<T: Scalar>(&self) -> Result<TabularMdp<T>> {
        let state_ids: HashMap<&str, usize> =
            self.states.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect();
        let action_ids: HashMap<&str, usize> =
            self.actions.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
        let state = |n: &str| state_ids.get(n).copied().ok_or_else(|| doc_err(format!("unknown state `{n}`")));
        let action = |n: &str| {
            action_ids
                .get(n)
                .copied()
                .ok_or_else(|| AnalyzerError::UnknownAction(n.to_string()))
        };
        let n_states = self.states.len();
        let n_actions = self.actions.len();

        let mut terminal = vec![false; n_states];
        for t in &self.terminals {
            terminal[state(t)?] = true;
        }
        let mut transitions = vec![Vec::new(); n_states * n_actions];
        for (s, a, t, p) in &self.transitions {
            transitions[state(s)? * n_actions + action(a)?].push((state(t)?, T::lit(*p)));
        }
        for s in (0..n_states).filter(|&s| terminal[s]) {
            for a in 0..n_actions {
                if transitions[s * n_actions + a].is_empty() {
                    transitions[s * n_actions + a].push((s, T::one()));
                }
            }
        }
        let mut rewards = vec![T::zero(); n_states * n_actions];
        for (s, a, r) in &self.rewards {
            rewards[state(s)? * n_actions + action(a)?] = T::lit(*r);
        }
        let mut start = vec![T::zero(); n_states];
        for (s, p) in &self.start {
            start[state(s)?] += T::lit(*p);
        }

        TabularMdp::new(MdpParts {
            states: self.states.iter().map(|s| s.name.clone()).collect(),
            actions: self.actions.clone(),
            attributes: self.attributes.clone(),
            attribute_values: self.states.iter().map(|s| s.values.clone()).collect(),
            transitions,
            rewards,
            start,
            terminal,
            gamma: T::lit(self.gamma),
            horizon: self.horizon,
        })
    }
}
