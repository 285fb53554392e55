//! Best return achievable by deterministic memoryless (reactive) policies
//! that see only an observation projection of the state.
//!
//! Two exact routes:
//!
//! * aggregated value iteration, when the projection is Markov-consistent and
//!   some stationary policy is optimal at every stage of the lumped MDP;
//! * exhaustive enumeration of every observation-to-action map over the
//!   observations that can occur within the horizon, each evaluated by
//!   forward propagation of the state distribution.
//!
//! Anything else is reported as [`AnalyzerError::BudgetExceeded`] rather than
//! approximated.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{AnalyzerError, Result};
use crate::mdp::TabularMdp;
use crate::projection::ObservationProjection;
use crate::scalar::Scalar;
use crate::solve::{expected_under_start, stationary_certificate, value_iteration};

/// Default cap on the number of policies evaluated by enumeration.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 10_000_000;

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMethod {
    AggregatedValueIteration,
    ExhaustiveEnumeration,
}

/// Observation-to-action map; `actions[o]` is the action for observation `o`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReactivePolicy {
    pub actions: Vec<usize>,
}

impl ReactivePolicy {
    /// `(observation symbol, action label)` pairs in observation order.
    pub fn describe<T: Scalar>(
        &self,
        mdp: &TabularMdp<T>,
        proj: &ObservationProjection,
    ) -> Vec<(Vec<i64>, String)> {
        self.actions
            .iter()
            .enumerate()
            .map(|(o, &a)| (proj.symbol(o).to_vec(), mdp.actions()[a].clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactiveOutcome<T> {
    pub value: T,
    pub policy: ReactivePolicy,
    pub method: SearchMethod,
}

/// Best reactive return, choosing the exact route automatically.
pub fn best_reactive_return<T: Scalar>(
    mdp: &TabularMdp<T>,
    proj: &ObservationProjection,
    budget: u128,
) -> Result<ReactiveOutcome<T>> {
    if let Some(outcome) = certified_aggregation(mdp, proj) {
        return Ok(outcome);
    }
    enumerate_reactive(mdp, proj, budget)
}

/// Observations that some state reachable within the horizon maps to.
fn relevant_observations<T: Scalar>(mdp: &TabularMdp<T>, proj: &ObservationProjection) -> Vec<bool> {
    let mut relevant = vec![false; proj.n_observations()];
    for (s, reachable) in mdp.reachable().into_iter().enumerate() {
        if reachable {
            relevant[proj.observation_of(s)] = true;
        }
    }
    relevant
}

/// Value iteration on the lumped MDP, without any stationarity check.
///
/// Returns `None` when the projection is not Markov-consistent. The value is
/// the optimum over time-dependent observation policies; it equals the best
/// reactive return whenever a stationary optimum exists.
pub fn aggregated_return<T: Scalar>(mdp: &TabularMdp<T>, proj: &ObservationProjection) -> Option<T> {
    let lumped = proj.aggregate(mdp)?;
    let values = value_iteration(&lumped);
    Some(expected_under_start(&lumped, values.stage(lumped.horizon())))
}

fn certified_aggregation<T: Scalar>(
    mdp: &TabularMdp<T>,
    proj: &ObservationProjection,
) -> Option<ReactiveOutcome<T>> {
    let lumped = proj.aggregate(mdp)?;
    let values = value_iteration(&lumped);
    let relevant = relevant_observations(mdp, proj);
    let actions = stationary_certificate(&lumped, &values, &relevant)?;
    Some(ReactiveOutcome {
        value: expected_under_start(&lumped, values.stage(lumped.horizon())),
        policy: ReactivePolicy { actions },
        method: SearchMethod::AggregatedValueIteration,
    })
}

/// Number of policies enumeration would evaluate, or `None` on overflow.
pub fn enumeration_size<T: Scalar>(mdp: &TabularMdp<T>, proj: &ObservationProjection) -> Option<u128> {
    let k = relevant_observations(mdp, proj).iter().filter(|&&r| r).count();
    (mdp.n_actions() as u128).checked_pow(u32::try_from(k).ok()?)
}

/// Exhaustive search over reactive policies.
///
/// Policies are indexed lexicographically over the relevant observations
/// (lowest observation index is the most significant digit); among equal
/// returns the lowest index wins, independent of thread scheduling.
pub fn enumerate_reactive<T: Scalar>(
    mdp: &TabularMdp<T>,
    proj: &ObservationProjection,
    budget: u128,
) -> Result<ReactiveOutcome<T>> {
    let relevant = relevant_observations(mdp, proj);
    let digits: Vec<usize> = (0..relevant.len()).filter(|&o| relevant[o]).collect();
    let n_actions = mdp.n_actions() as u64;
    let total = enumeration_size(mdp, proj);
    match total {
        Some(t) if t <= budget => {}
        _ => {
            return Err(AnalyzerError::BudgetExceeded {
                policies: total.unwrap_or(u128::MAX),
                budget,
            })
        }
    }
    // Within budget implies it fits in u64.
    let total = total.expect("checked above") as u64;

    let evaluator = ForwardEvaluator::new(mdp, proj);
    let n_chunks = total.div_ceil(CHUNK);
    let (value, index) = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let first = chunk * CHUNK;
            let last = (first + CHUNK).min(total);
            let mut policy = vec![0usize; proj.n_observations()];
            decode(first, n_actions, &digits, &mut policy);
            let mut scratch = evaluator.scratch();
            let mut best = (evaluator.evaluate(&policy, &mut scratch), first);
            for index in first + 1..last {
                increment(n_actions as usize, &digits, &mut policy);
                let v = evaluator.evaluate(&policy, &mut scratch);
                if v > best.0 {
                    best = (v, index);
                }
            }
            best
        })
        .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
        .expect("at least one policy");

    let mut actions = vec![0usize; proj.n_observations()];
    decode(index, n_actions, &digits, &mut actions);
    Ok(ReactiveOutcome {
        value,
        policy: ReactivePolicy { actions },
        method: SearchMethod::ExhaustiveEnumeration,
    })
}

fn decode(mut index: u64, base: u64, digits: &[usize], policy: &mut [usize]) {
    for &o in digits.iter().rev() {
        policy[o] = (index % base) as usize;
        index /= base;
    }
}

fn increment(base: usize, digits: &[usize], policy: &mut [usize]) {
    for &o in digits.iter().rev() {
        policy[o] += 1;
        if policy[o] < base {
            return;
        }
        policy[o] = 0;
    }
}

/// Exact return of a reactive policy.
pub fn evaluate_reactive<T: Scalar>(
    mdp: &TabularMdp<T>,
    proj: &ObservationProjection,
    policy: &ReactivePolicy,
) -> T {
    let evaluator = ForwardEvaluator::new(mdp, proj);
    evaluator.evaluate(&policy.actions, &mut evaluator.scratch())
}

/// Propagates the state distribution forward for `horizon` steps and sums
/// discounted expected rewards. Terminal states are dropped from the support
/// since they only self-loop with zero reward.
struct ForwardEvaluator<'a, T> {
    mdp: &'a TabularMdp<T>,
    observation_of: Vec<usize>,
    initial: Vec<(usize, T)>,
}

struct Scratch<T> {
    mass: Vec<T>,
    support: Vec<usize>,
    next_mass: Vec<T>,
    next_support: Vec<usize>,
}

impl<'a, T: Scalar> ForwardEvaluator<'a, T> {
    fn new(mdp: &'a TabularMdp<T>, proj: &ObservationProjection) -> Self {
        let initial = mdp
            .start()
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > T::zero())
            .map(|(s, &p)| (s, p))
            .collect();
        Self {
            mdp,
            observation_of: (0..mdp.n_states()).map(|s| proj.observation_of(s)).collect(),
            initial,
        }
    }

    fn scratch(&self) -> Scratch<T> {
        let n = self.mdp.n_states();
        Scratch {
            mass: vec![T::zero(); n],
            support: Vec::with_capacity(n),
            next_mass: vec![T::zero(); n],
            next_support: Vec::with_capacity(n),
        }
    }

    fn evaluate(&self, policy: &[usize], scratch: &mut Scratch<T>) -> T {
        let mdp = self.mdp;
        let Scratch { mass, support, next_mass, next_support } = scratch;
        support.clear();
        for &(s, p) in &self.initial {
            if !mdp.is_terminal(s) {
                mass[s] = p;
                support.push(s);
            }
        }
        let gamma = mdp.gamma();
        let mut discount = T::one();
        let mut total = T::zero();
        for _ in 0..mdp.horizon() {
            if support.is_empty() {
                break;
            }
            let mut step = T::zero();
            next_support.clear();
            for &s in support.iter() {
                let p = mass[s];
                mass[s] = T::zero();
                let a = policy[self.observation_of[s]];
                step += p * mdp.reward(s, a);
                for &(t, q) in mdp.row(s, a) {
                    if mdp.is_terminal(t) {
                        continue;
                    }
                    if next_mass[t] == T::zero() {
                        next_support.push(t);
                    }
                    next_mass[t] += p * q;
                }
            }
            total += discount * step;
            discount *= gamma;
            std::mem::swap(mass, next_mass);
            std::mem::swap(support, next_support);
        }
        for &s in support.iter() {
            mass[s] = T::zero();
        }
        total
    }
}
