//! Sufficiency and necessity of observation and action representations.
//!
//! A representation is sufficient when the best policy restricted to it gets
//! within a relative gap `delta` of the full-information optimum:
//! `best >= optimal - delta * |optimal|`, which is `(1 - delta) * optimal` for
//! the usual nonnegative returns. It is necessary when it is sufficient and
//! dropping any single element (attribute or action) makes it insufficient.
//!
//! Reward and dynamics are fixed by the MDP under analysis; the verdicts are
//! relative to them.

use serde::Serialize;

use crate::error::{AnalyzerError, Result};
use crate::mdp::TabularMdp;
use crate::projection::ObservationProjection;
use crate::reactive::{best_reactive_return, ReactivePolicy, SearchMethod, DEFAULT_ENUMERATION_BUDGET};
use crate::scalar::Scalar;
use crate::solve::optimal_return;

/// Success threshold and search budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Criterion<T> {
    pub delta: T,
    pub budget: u128,
}

impl<T: Scalar> Default for Criterion<T> {
    fn default() -> Self {
        Self { delta: T::lit(0.05), budget: DEFAULT_ENUMERATION_BUDGET }
    }
}

impl<T: Scalar> Criterion<T> {
    pub fn with_delta(delta: T) -> Self {
        Self { delta, ..Self::default() }
    }

    /// `achieved >= optimal - delta * |optimal|`, up to floating point slack.
    pub fn meets(&self, achieved: T, optimal: T) -> bool {
        let threshold = optimal - self.delta * optimal.abs();
        achieved >= threshold - T::return_slack(optimal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficiencyVerdict<T> {
    pub sufficient: bool,
    pub optimal_return: T,
    pub best_reactive_return: T,
    /// Present iff `sufficient`.
    pub witness_policy: Option<ReactivePolicy>,
    pub method: SearchMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeRemoval<T> {
    pub attribute: String,
    pub verdict: SufficiencyVerdict<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationNecessity<T> {
    pub necessary: bool,
    pub verdict: SufficiencyVerdict<T>,
    pub removals: Vec<AttributeRemoval<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionVerdict<T> {
    pub sufficient: bool,
    pub actions: Vec<String>,
    /// Optimum with every action available.
    pub optimal_return: T,
    /// Optimum with only `actions` available; `None` for the empty set.
    pub restricted_return: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionRemoval<T> {
    pub action: String,
    pub verdict: ActionVerdict<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionNecessity<T> {
    pub necessary: bool,
    pub verdict: ActionVerdict<T>,
    pub removals: Vec<ActionRemoval<T>>,
}

fn sufficiency_against<T: Scalar>(
    mdp: &TabularMdp<T>,
    proj: &ObservationProjection,
    optimal: T,
    criterion: &Criterion<T>,
) -> Result<SufficiencyVerdict<T>> {
    let outcome = best_reactive_return(mdp, proj, criterion.budget)?;
    let sufficient = criterion.meets(outcome.value, optimal);
    Ok(SufficiencyVerdict {
        sufficient,
        optimal_return: optimal,
        best_reactive_return: outcome.value,
        witness_policy: sufficient.then_some(outcome.policy),
        method: outcome.method,
    })
}

/// Whether a reactive policy on `proj` can act near-optimally.
pub fn is_sufficient<T: Scalar>(
    mdp: &TabularMdp<T>,
    proj: &ObservationProjection,
    criterion: &Criterion<T>,
) -> Result<SufficiencyVerdict<T>> {
    sufficiency_against(mdp, proj, optimal_return(mdp), criterion)
}

/// Sufficient, and every single-attribute removal is insufficient.
pub fn is_necessary_observation<T: Scalar>(
    mdp: &TabularMdp<T>,
    proj: &ObservationProjection,
    criterion: &Criterion<T>,
) -> Result<ObservationNecessity<T>> {
    if proj.attributes().is_empty() {
        return Err(AnalyzerError::EmptyProjection);
    }
    let optimal = optimal_return(mdp);
    let verdict = sufficiency_against(mdp, proj, optimal, criterion)?;
    let removals = proj
        .attributes()
        .iter()
        .map(|attribute| {
            let coarser = proj.without(mdp, attribute)?;
            Ok(AttributeRemoval {
                attribute: attribute.clone(),
                verdict: sufficiency_against(mdp, &coarser, optimal, criterion)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let necessary = verdict.sufficient && removals.iter().all(|r| !r.verdict.sufficient);
    Ok(ObservationNecessity { necessary, verdict, removals })
}

fn action_verdict_against<T: Scalar>(
    mdp: &TabularMdp<T>,
    subset: &[usize],
    optimal: T,
    criterion: &Criterion<T>,
) -> Result<ActionVerdict<T>> {
    let actions = subset.iter().map(|&a| mdp.actions()[a].clone()).collect();
    if subset.is_empty() {
        // No action, no behaviour: treated as insufficient by definition.
        return Ok(ActionVerdict { sufficient: false, actions, optimal_return: optimal, restricted_return: None });
    }
    let restricted = optimal_return(&mdp.restrict_actions(subset)?);
    Ok(ActionVerdict {
        sufficient: criterion.meets(restricted, optimal),
        actions,
        optimal_return: optimal,
        restricted_return: Some(restricted),
    })
}

/// Resolves action labels to indices.
pub fn action_indices<T: Scalar, S: AsRef<str>>(mdp: &TabularMdp<T>, names: &[S]) -> Result<Vec<usize>> {
    names.iter().map(|n| mdp.action_index(n.as_ref())).collect()
}

/// Whether the full-state optimum with only `subset` available is near the
/// unrestricted optimum.
pub fn is_sufficient_action<T: Scalar>(
    mdp: &TabularMdp<T>,
    subset: &[usize],
    criterion: &Criterion<T>,
) -> Result<ActionVerdict<T>> {
    if subset.is_empty() {
        return Err(AnalyzerError::EmptyActionSubset);
    }
    action_verdict_against(mdp, subset, optimal_return(mdp), criterion)
}

/// Sufficient, and removing any single action makes the subset insufficient.
pub fn is_necessary_action<T: Scalar>(
    mdp: &TabularMdp<T>,
    subset: &[usize],
    criterion: &Criterion<T>,
) -> Result<ActionNecessity<T>> {
    if subset.is_empty() {
        return Err(AnalyzerError::EmptyActionSubset);
    }
    let optimal = optimal_return(mdp);
    let verdict = action_verdict_against(mdp, subset, optimal, criterion)?;
    let removals = subset
        .iter()
        .map(|&removed| {
            let rest: Vec<usize> = subset.iter().copied().filter(|&a| a != removed).collect();
            Ok(ActionRemoval {
                action: mdp.actions()[removed].clone(),
                verdict: action_verdict_against(mdp, &rest, optimal, criterion)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let necessary = verdict.sufficient && removals.iter().all(|r| !r.verdict.sufficient);
    Ok(ActionNecessity { necessary, verdict, removals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keylock::KeyLockLayout;

    #[test]
    fn threshold_is_relative_to_optimum() {
        let c = Criterion::<f64>::with_delta(0.05);
        assert!(c.meets(0.95, 1.0));
        assert!(!c.meets(0.94, 1.0));
        assert!(c.meets(0.0, 0.0));
        // Negative optima: the gap is still measured downward.
        assert!(c.meets(-1.0, -1.0));
        assert!(c.meets(-1.05, -1.0));
        assert!(!c.meets(-1.06, -1.0));
    }

    #[test]
    fn identity_projection_is_sufficient_at_zero_gap() {
        let mdp = KeyLockLayout::layout_a().build::<f64>(0.95, 20).unwrap();
        let v = is_sufficient(&mdp, &ObservationProjection::identity(&mdp), &Criterion::with_delta(0.0)).unwrap();
        assert!(v.sufficient);
        assert!(v.witness_policy.is_some());
    }

    #[test]
    fn empty_projection_is_rejected_for_necessity() {
        let mdp = KeyLockLayout::layout_b().build::<f64>(0.95, 20).unwrap();
        let proj = ObservationProjection::identity(&mdp);
        assert_eq!(
            is_necessary_observation(&mdp, &proj, &Criterion::default()),
            Err(AnalyzerError::EmptyProjection)
        );
    }

    #[test]
    fn single_action_on_layout_b_is_insufficient() {
        let mdp = KeyLockLayout::layout_b().build::<f64>(0.95, 20).unwrap();
        let east = action_indices(&mdp, &["E"]).unwrap();
        let v = is_sufficient_action(&mdp, &east, &Criterion::default()).unwrap();
        assert!(!v.sufficient);
        assert_eq!(v.restricted_return, Some(0.0));
    }
}
