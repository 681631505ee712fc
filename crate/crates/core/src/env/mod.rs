//! Benchmark MDP constructors.
//!
//! Finite-horizon instances are time-indexed: every state belongs to one
//! stage, transitions only move forward, and the final layer is absorbing
//! with zero reward. They use `γ = 0.999`.

pub mod cartpole;
mod lock;
mod random;
mod rare;

pub use lock::{build_combination_lock_mdp, CombinationLockConfig};
pub use random::{random_filter, random_mdp, random_policy, RandomInstance};
pub use rare::{build_rare_transition_mdp, RareTransitionConfig};

/// Discount used by the time-indexed instances.
pub const FINITE_HORIZON_GAMMA: f64 = 0.999;
