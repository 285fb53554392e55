//! Explicit finite MDPs with a discount factor and a finite horizon.

use std::collections::{BTreeMap, HashSet};

use crate::error::{AnalyzerError, Result};
use crate::scalar::Scalar;

/// Raw ingredients of a [`TabularMdp`], validated by [`TabularMdp::new`].
///
/// Transition and reward tables are indexed by `state * n_actions + action`.
/// Each state carries one integer value per named attribute; observation
/// projections are built from those attribute values.
#[derive(Debug, Clone)]
pub struct MdpParts<T> {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub attributes: Vec<String>,
    pub attribute_values: Vec<Vec<i64>>,
    pub transitions: Vec<Vec<(usize, T)>>,
    pub rewards: Vec<T>,
    pub start: Vec<T>,
    pub terminal: Vec<bool>,
    pub gamma: T,
    pub horizon: usize,
}

/// A finite MDP `<S, A, P, R>` with start distribution, discount and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp<T> {
    states: Vec<String>,
    actions: Vec<String>,
    attributes: Vec<String>,
    attribute_values: Vec<Vec<i64>>,
    transitions: Vec<Vec<(usize, T)>>,
    rewards: Vec<T>,
    start: Vec<T>,
    terminal: Vec<bool>,
    gamma: T,
    horizon: usize,
}

fn invalid(msg: impl Into<String>) -> AnalyzerError {
    AnalyzerError::InvalidMdp(msg.into())
}

fn check_unique(kind: &str, names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for name in names {
        if !seen.insert(name.as_str()) {
            return Err(invalid(format!("duplicate {kind} `{name}`")));
        }
    }
    Ok(())
}

impl<T: Scalar> TabularMdp<T> {
    pub fn new(parts: MdpParts<T>) -> Result<Self> {
        let MdpParts {
            states,
            actions,
            attributes,
            attribute_values,
            transitions,
            rewards,
            start,
            terminal,
            gamma,
            horizon,
        } = parts;

        let n_states = states.len();
        let n_actions = actions.len();
        if n_states == 0 {
            return Err(invalid("no states"));
        }
        if n_actions == 0 {
            return Err(invalid("no actions"));
        }
        check_unique("state", &states)?;
        check_unique("action", &actions)?;
        check_unique("attribute", &attributes)?;
        if !(gamma >= T::zero() && gamma < T::one()) {
            return Err(invalid(format!("discount {gamma} outside [0, 1)")));
        }
        if horizon == 0 {
            return Err(invalid("horizon must be positive"));
        }
        if attribute_values.len() != n_states
            || attribute_values.iter().any(|v| v.len() != attributes.len())
        {
            return Err(invalid("attribute table does not match states x attributes"));
        }
        if transitions.len() != n_states * n_actions || rewards.len() != n_states * n_actions {
            return Err(invalid("transition/reward tables must have states x actions rows"));
        }
        if start.len() != n_states || terminal.len() != n_states {
            return Err(invalid("start and terminal vectors must have one entry per state"));
        }

        let tol = T::row_sum_tolerance();
        let mut merged_rows = Vec::with_capacity(transitions.len());
        for (idx, row) in transitions.into_iter().enumerate() {
            let (s, a) = (idx / n_actions, idx % n_actions);
            let mut merged: BTreeMap<usize, T> = BTreeMap::new();
            for (next, p) in row {
                if next >= n_states {
                    return Err(invalid(format!("transition ({s}, {a}) targets unknown state {next}")));
                }
                if !p.is_finite() || p < T::zero() {
                    return Err(invalid(format!("transition ({s}, {a}) has invalid probability {p}")));
                }
                *merged.entry(next).or_insert_with(T::zero) += p;
            }
            let total: T = merged.values().copied().sum();
            if (total - T::one()).abs() > tol {
                return Err(invalid(format!(
                    "row ({}, {}) sums to {total}",
                    states[s], actions[a]
                )));
            }
            merged_rows.push(
                merged
                    .into_iter()
                    .filter(|(_, p)| *p > T::zero())
                    .collect::<Vec<_>>(),
            );
        }

        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(invalid("rewards must be finite"));
        }

        for s in (0..n_states).filter(|&s| terminal[s]) {
            for a in 0..n_actions {
                let row = &merged_rows[s * n_actions + a];
                let self_loop = row.len() == 1 && row[0].0 == s;
                if !self_loop || rewards[s * n_actions + a] != T::zero() {
                    return Err(invalid(format!(
                        "terminal state `{}` must self-loop with zero reward",
                        states[s]
                    )));
                }
            }
        }

        if start.iter().any(|p| !p.is_finite() || *p < T::zero()) {
            return Err(invalid("start distribution has invalid entries"));
        }
        let start_total: T = start.iter().copied().sum();
        if (start_total - T::one()).abs() > tol {
            return Err(invalid(format!("start distribution sums to {start_total}")));
        }

        Ok(Self {
            states,
            actions,
            attributes,
            attribute_values,
            transitions: merged_rows,
            rewards,
            start,
            terminal,
            gamma,
            horizon,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn attribute_index(&self, name: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| AnalyzerError::UnknownAttribute(name.to_string()))
    }

    pub fn action_index(&self, name: &str) -> Result<usize> {
        self.actions
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| AnalyzerError::UnknownAction(name.to_string()))
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    /// Attribute values of state `s`, in attribute order.
    pub fn values(&self, s: usize) -> &[i64] {
        &self.attribute_values[s]
    }

    pub fn row(&self, s: usize, a: usize) -> &[(usize, T)] {
        &self.transitions[s * self.actions.len() + a]
    }

    pub fn reward(&self, s: usize, a: usize) -> T {
        self.rewards[s * self.actions.len() + a]
    }

    pub fn start(&self) -> &[T] {
        &self.start
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// States reachable from the start distribution within the horizon under
    /// some policy.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n_states()];
        let mut frontier: Vec<usize> = (0..self.n_states())
            .filter(|&s| self.start[s] > T::zero())
            .collect();
        for &s in &frontier {
            seen[s] = true;
        }
        // The last decision happens at step horizon - 1, so states first
        // reached at step `horizon` never act.
        for _ in 1..self.horizon {
            let mut next = Vec::new();
            for &s in &frontier {
                for a in 0..self.n_actions() {
                    for &(t, _) in self.row(s, a) {
                        if !seen[t] {
                            seen[t] = true;
                            next.push(t);
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        seen
    }

    /// The same MDP with only the listed actions available, in the given order.
    pub fn restrict_actions(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(AnalyzerError::EmptyActionSubset);
        }
        let mut seen = HashSet::new();
        for &a in keep {
            if a >= self.n_actions() {
                return Err(AnalyzerError::UnknownAction(a.to_string()));
            }
            if !seen.insert(a) {
                return Err(invalid(format!("action `{}` listed twice", self.actions[a])));
            }
        }
        let mut transitions = Vec::with_capacity(self.n_states() * keep.len());
        let mut rewards = Vec::with_capacity(self.n_states() * keep.len());
        for s in 0..self.n_states() {
            for &a in keep {
                transitions.push(self.row(s, a).to_vec());
                rewards.push(self.reward(s, a));
            }
        }
        Ok(Self {
            states: self.states.clone(),
            actions: keep.iter().map(|&a| self.actions[a].clone()).collect(),
            attributes: self.attributes.clone(),
            attribute_values: self.attribute_values.clone(),
            transitions,
            rewards,
            start: self.start.clone(),
            terminal: self.terminal.clone(),
            gamma: self.gamma,
            horizon: self.horizon,
        })
    }

    /// Decomposes the MDP back into its parts.
    pub fn into_parts(self) -> MdpParts<T> {
        MdpParts {
            states: self.states,
            actions: self.actions,
            attributes: self.attributes,
            attribute_values: self.attribute_values,
            transitions: self.transitions,
            rewards: self.rewards,
            start: self.start,
            terminal: self.terminal,
            gamma: self.gamma,
            horizon: self.horizon,
        }
    }
}
