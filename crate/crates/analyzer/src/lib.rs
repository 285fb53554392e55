//! Exact sufficiency and necessity analysis of observation and action
//! representations on small explicit MDPs.
//!
//! The analyzer answers, for a fixed reward and dynamics: can an agent that
//! only sees some attributes of the state (or only has some of the actions)
//! still act near-optimally? Optimal returns come from finite-horizon value
//! iteration; the best reactive (memoryless, deterministic) policy comes from
//! either value iteration on a Markov-consistent aggregation or exhaustive
//! enumeration.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix `f64`.

pub mod document;
pub mod error;
pub mod keylock;
pub mod mdp;
pub mod projection;
pub mod reactive;
pub mod scalar;
pub mod solve;
pub mod verdict;

pub use document::MdpDocument;
pub use error::{AnalyzerError, Result};
pub use keylock::KeyLockLayout;
pub use mdp::MdpParts;
pub use projection::ObservationProjection;
pub use reactive::{
    aggregated_return, best_reactive_return, enumerate_reactive, evaluate_reactive, ReactivePolicy,
    SearchMethod, DEFAULT_ENUMERATION_BUDGET,
};
pub use scalar::Scalar;
pub use solve::{evaluate_stationary, optimal_return, value_iteration};
pub use verdict::{
    action_indices, is_necessary_action, is_necessary_observation, is_sufficient, is_sufficient_action,
    Criterion,
};

/// Double precision MDP.
pub type TabularMdp = mdp::TabularMdp<f64>;
/// Single precision MDP.
pub type TabularMdpF32 = mdp::TabularMdp<f32>;
pub type ReactiveOutcome = reactive::ReactiveOutcome<f64>;
pub type SufficiencyVerdict = verdict::SufficiencyVerdict<f64>;
pub type ObservationNecessity = verdict::ObservationNecessity<f64>;
pub type ActionVerdict = verdict::ActionVerdict<f64>;
pub type ActionNecessity = verdict::ActionNecessity<f64>;
