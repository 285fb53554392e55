//! Finite-horizon dynamic programming.

use crate::mdp::TabularMdp;
use crate::scalar::Scalar;

/// Optimal values for every number of remaining decisions.
///
/// `stage(k)[s]` is the best expected discounted return obtainable from state
/// `s` with `k` decisions left; `stage(0)` is identically zero.
#[derive(Debug, Clone)]
pub struct StageValues<T> {
    stages: Vec<Vec<T>>,
}

impl<T: Scalar> StageValues<T> {
    pub fn stage(&self, remaining: usize) -> &[T] {
        &self.stages[remaining]
    }

    pub fn horizon(&self) -> usize {
        self.stages.len() - 1
    }
}

/// One-step lookahead value of taking `a` in `s` given next-stage values.
pub fn q_value<T: Scalar>(mdp: &TabularMdp<T>, s: usize, a: usize, next: &[T]) -> T {
    let future: T = mdp.row(s, a).iter().map(|&(t, p)| p * next[t]).sum();
    mdp.reward(s, a) + mdp.gamma() * future
}

/// Backward induction over `mdp.horizon()` stages.
pub fn value_iteration<T: Scalar>(mdp: &TabularMdp<T>) -> StageValues<T> {
    let n = mdp.n_states();
    let mut stages = Vec::with_capacity(mdp.horizon() + 1);
    stages.push(vec![T::zero(); n]);
    for k in 1..=mdp.horizon() {
        let next = &stages[k - 1];
        let current = (0..n)
            .map(|s| {
                (0..mdp.n_actions())
                    .map(|a| q_value(mdp, s, a, next))
                    .fold(T::neg_infinity(), T::max)
            })
            .collect();
        stages.push(current);
    }
    StageValues { stages }
}

/// Expected discounted return of the optimal (possibly time-dependent)
/// policy over the full horizon, from the start distribution.
pub fn optimal_return<T: Scalar>(mdp: &TabularMdp<T>) -> T {
    let values = value_iteration(mdp);
    expected_under_start(mdp, values.stage(mdp.horizon()))
}

pub(crate) fn expected_under_start<T: Scalar>(mdp: &TabularMdp<T>, values: &[T]) -> T {
    mdp.start()
        .iter()
        .zip(values)
        .filter(|(p, _)| **p > T::zero())
        .map(|(&p, &v)| p * v)
        .sum()
}

/// Exact return of a stationary state-feedback policy (`policy[s]` is the
/// action taken in state `s`) by backward recursion.
pub fn evaluate_stationary<T: Scalar>(mdp: &TabularMdp<T>, policy: &[usize]) -> T {
    debug_assert_eq!(policy.len(), mdp.n_states());
    let n = mdp.n_states();
    let mut values = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    for _ in 0..mdp.horizon() {
        for s in 0..n {
            next[s] = q_value(mdp, s, policy[s], &values);
        }
        std::mem::swap(&mut values, &mut next);
    }
    expected_under_start(mdp, &values)
}

/// Looks for one action per state that is optimal at every stage.
///
/// Finite-horizon optimal behaviour can depend on the number of remaining
/// steps. When some stationary policy picks an optimal action at every stage
/// in every relevant state, it attains the value-iteration optimum and is
/// returned (lowest action index among the candidates). Otherwise `None`.
/// States with `relevant[s] == false` are left at action 0.
pub fn stationary_certificate<T: Scalar>(
    mdp: &TabularMdp<T>,
    values: &StageValues<T>,
    relevant: &[bool],
) -> Option<Vec<usize>> {
    let n_actions = mdp.n_actions();
    let mut policy = vec![0; mdp.n_states()];
    for s in (0..mdp.n_states()).filter(|&s| relevant[s]) {
        let mut candidates = vec![true; n_actions];
        for k in 1..=values.horizon() {
            let next = values.stage(k - 1);
            let q: Vec<T> = (0..n_actions).map(|a| q_value(mdp, s, a, next)).collect();
            let best = q.iter().copied().fold(T::neg_infinity(), T::max);
            let slack = T::return_slack(best);
            for a in 0..n_actions {
                if q[a] < best - slack {
                    candidates[a] = false;
                }
            }
        }
        policy[s] = candidates.iter().position(|&c| c)?;
    }
    Some(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::MdpParts;

    fn chain(rewards: Vec<f64>, gamma: f64, horizon: usize) -> TabularMdp<f64> {
        // Two states; action 0 stays, action 1 switches.
        TabularMdp::new(MdpParts {
            states: vec!["a".into(), "b".into()],
            actions: vec!["stay".into(), "switch".into()],
            attributes: vec![],
            attribute_values: vec![vec![], vec![]],
            transitions: vec![
                vec![(0, 1.0)],
                vec![(1, 1.0)],
                vec![(1, 1.0)],
                vec![(0, 1.0)],
            ],
            rewards,
            start: vec![1.0, 0.0],
            terminal: vec![false, false],
            gamma,
            horizon,
        })
        .unwrap()
    }

    #[test]
    fn single_state_geometric_sum() {
        let mdp = TabularMdp::new(MdpParts {
            states: vec!["s".into()],
            actions: vec!["stay".into()],
            attributes: vec![],
            attribute_values: vec![vec![]],
            transitions: vec![vec![(0, 1.0)]],
            rewards: vec![1.0],
            start: vec![1.0],
            terminal: vec![false],
            gamma: 0.5,
            horizon: 3,
        })
        .unwrap();
        assert_eq!(optimal_return(&mdp), 1.75);
        assert_eq!(evaluate_stationary(&mdp, &[0]), 1.75);
    }

    #[test]
    fn all_zero_rewards_give_zero() {
        let mdp = chain(vec![0.0; 4], 0.9, 5);
        assert_eq!(optimal_return(&mdp), 0.0);
    }

    #[test]
    fn certificate_found_when_one_action_dominates() {
        // Staying in `b` pays 1; from `a` switch once then stay.
        let mdp = chain(vec![0.0, 0.0, 1.0, 0.0], 0.9, 6);
        let values = value_iteration(&mdp);
        let policy = stationary_certificate(&mdp, &values, &[true, true]).unwrap();
        assert_eq!(policy, vec![1, 0]);
        let stationary = evaluate_stationary(&mdp, &policy);
        assert!((stationary - optimal_return(&mdp)).abs() < 1e-12);
    }

    #[test]
    fn certificate_absent_when_optimum_is_time_dependent() {
        // In `a`: staying pays 1 now; switching pays 0 but `b` pays 3 per
        // step. Far from the horizon switching wins, at the last step staying
        // wins, so no single action is optimal at every stage.
        let mdp = chain(vec![1.0, 0.0, 3.0, 0.0], 0.9, 4);
        let values = value_iteration(&mdp);
        assert!(stationary_certificate(&mdp, &values, &[true, true]).is_none());
    }
}
