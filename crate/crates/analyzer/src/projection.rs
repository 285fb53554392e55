//! Deterministic observation functions built from state attributes.

use std::collections::HashMap;

use crate::error::{AnalyzerError, Result};
use crate::mdp::{MdpParts, TabularMdp};
use crate::scalar::Scalar;

/// Maps every state to an observation symbol: the tuple of values of the
/// retained attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationProjection {
    attributes: Vec<String>,
    observation_of: Vec<usize>,
    symbols: Vec<Vec<i64>>,
}

impl ObservationProjection {
    /// Projection keeping the named attributes, in the given order. An empty
    /// list is allowed and maps every state to the same observation.
    pub fn from_attributes<T: Scalar, S: AsRef<str>>(
        mdp: &TabularMdp<T>,
        attributes: &[S],
    ) -> Result<Self> {
        let indices = attributes
            .iter()
            .map(|a| mdp.attribute_index(a.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let mut symbol_ids: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut symbols = Vec::new();
        let mut observation_of = Vec::with_capacity(mdp.n_states());
        for s in 0..mdp.n_states() {
            let symbol: Vec<i64> = indices.iter().map(|&i| mdp.values(s)[i]).collect();
            let id = *symbol_ids.entry(symbol.clone()).or_insert_with(|| {
                symbols.push(symbol);
                symbols.len() - 1
            });
            observation_of.push(id);
        }
        Ok(Self {
            attributes: attributes.iter().map(|a| a.as_ref().to_string()).collect(),
            observation_of,
            symbols,
        })
    }

    /// Projection keeping every attribute of the MDP.
    pub fn all_attributes<T: Scalar>(mdp: &TabularMdp<T>) -> Self {
        Self::from_attributes(mdp, mdp.attributes()).expect("own attributes are known")
    }

    /// Full state observation: each state is its own symbol, regardless of
    /// attributes. Symbols are the singleton state index.
    pub fn identity<T: Scalar>(mdp: &TabularMdp<T>) -> Self {
        Self {
            attributes: Vec::new(),
            observation_of: (0..mdp.n_states()).collect(),
            symbols: (0..mdp.n_states() as i64).map(|s| vec![s]).collect(),
        }
    }

    /// This projection with one attribute removed.
    pub fn without<T: Scalar>(&self, mdp: &TabularMdp<T>, attribute: &str) -> Result<Self> {
        if !self.attributes.iter().any(|a| a == attribute) {
            return Err(AnalyzerError::UnknownAttribute(attribute.to_string()));
        }
        let kept: Vec<&str> = self
            .attributes
            .iter()
            .map(String::as_str)
            .filter(|a| *a != attribute)
            .collect();
        Self::from_attributes(mdp, &kept)
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn n_observations(&self) -> usize {
        self.symbols.len()
    }

    pub fn observation_of(&self, state: usize) -> usize {
        self.observation_of[state]
    }

    pub fn symbol(&self, observation: usize) -> &[i64] {
        &self.symbols[observation]
    }

    /// True when `self` never separates two states that `other` merges,
    /// i.e. `self` is at least as coarse as `other`.
    pub fn is_coarsening_of(&self, other: &ObservationProjection) -> bool {
        let mut image: HashMap<usize, usize> = HashMap::new();
        other
            .observation_of
            .iter()
            .zip(&self.observation_of)
            .all(|(&fine, &coarse)| *image.entry(fine).or_insert(coarse) == coarse)
    }

    /// Builds the observation-level MDP when the projection is
    /// Markov-consistent: all states sharing an observation have identical
    /// reward rows and identical transition rows once next states are mapped
    /// to observations. Returns `None` otherwise.
    ///
    /// Comparisons are exact; fixtures built from literal probabilities
    /// aggregate identically.
    pub fn aggregate<T: Scalar>(&self, mdp: &TabularMdp<T>) -> Option<TabularMdp<T>> {
        let n_obs = self.n_observations();
        let n_actions = mdp.n_actions();
        let mut representative: Vec<Option<usize>> = vec![None; n_obs];
        let mut terminal = vec![true; n_obs];
        let mut start = vec![T::zero(); n_obs];
        for s in 0..mdp.n_states() {
            let o = self.observation_of[s];
            start[o] += mdp.start()[s];
            terminal[o] &= mdp.is_terminal(s);
            match representative[o] {
                None => representative[o] = Some(s),
                Some(r) => {
                    for a in 0..n_actions {
                        if mdp.reward(r, a) != mdp.reward(s, a)
                            || !rows_match(&self.lumped_row(mdp, r, a), &self.lumped_row(mdp, s, a))
                        {
                            return None;
                        }
                    }
                }
            }
        }

        let mut transitions = Vec::with_capacity(n_obs * n_actions);
        let mut rewards = Vec::with_capacity(n_obs * n_actions);
        for rep in &representative {
            let r = rep.expect("every observation has at least one state");
            for a in 0..n_actions {
                transitions.push(self.lumped_row(mdp, r, a));
                rewards.push(mdp.reward(r, a));
            }
        }
        // A merged observation of terminal and non-terminal states may loop on
        // itself without being terminal; only all-terminal classes are marked.
        let parts = MdpParts {
            states: (0..n_obs).map(|o| format!("{:?}", self.symbols[o])).collect(),
            actions: mdp.actions().to_vec(),
            attributes: Vec::new(),
            attribute_values: vec![Vec::new(); n_obs],
            transitions,
            rewards,
            start,
            terminal,
            gamma: mdp.gamma(),
            horizon: mdp.horizon(),
        };
        TabularMdp::new(parts).ok()
    }

    fn lumped_row<T: Scalar>(&self, mdp: &TabularMdp<T>, s: usize, a: usize) -> Vec<(usize, T)> {
        let mut row: Vec<(usize, T)> = Vec::new();
        for &(t, p) in mdp.row(s, a) {
            let o = self.observation_of[t];
            match row.iter_mut().find(|(q, _)| *q == o) {
                Some((_, acc)) => *acc += p,
                None => row.push((o, p)),
            }
        }
        row.sort_by_key(|&(o, _)| o);
        row
    }
}

/// Same support and probabilities equal up to summation rounding.
fn rows_match<T: Scalar>(a: &[(usize, T)], b: &[(usize, T)]) -> bool {
    let tol = T::row_sum_tolerance();
    a.len() == b.len() && a.iter().zip(b).all(|(&(o, p), &(q, r))| o == q && (p - r).abs() <= tol)
}
