use serde::{Deserialize, Serialize};

use super::FINITE_HORIZON_GAMMA;
use crate::mdp::{MdpBuilder, Policy, RewardDist, TabularMdp};
use crate::{Error, Result};

/// Two-step instance with a rare, high-paying branch.
///
/// From the start state, action 1 leads to the green state (reward
/// `reward_green`), while action 0 leads to a common state (reward
/// `reward_common`) or, with probability `rare_prob`, to a rare state paying
/// `reward_high`. The canonical constants keep action 1 optimal, yet a single
/// visit to the rare state inflates the empirical value of action 0 whenever
/// action 0 has been tried fewer than about 65 times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RareTransitionConfig {
    pub rare_prob: f64,
    pub horizon: usize,
    pub reward_high: f64,
    pub reward_green: f64,
    pub reward_common: f64,
    /// Behavior distribution over the two actions at the start state;
    /// every other state uses the uniform distribution.
    pub behavior_action_probs: [f64; 2],
}

impl Default for RareTransitionConfig {
    fn default() -> Self {
        Self {
            rare_prob: 0.01,
            horizon: 2,
            reward_high: 10.0,
            reward_green: 1.0,
            reward_common: 0.86,
            behavior_action_probs: [0.35, 0.65],
        }
    }
}

pub const RARE_START: usize = 0;
pub const RARE_GREEN: usize = 1;
pub const RARE_COMMON: usize = 2;
pub const RARE_STATE: usize = 3;
pub const RARE_END: usize = 4;

impl RareTransitionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.rare_prob) {
            return bad(format!("rare_prob must lie in [0, 1), got {}", self.rare_prob));
        }
        if self.horizon != 2 {
            return bad(format!("the rare-transition instance has horizon 2, got {}", self.horizon));
        }
        for (name, r) in [
            ("reward_high", self.reward_high),
            ("reward_green", self.reward_green),
            ("reward_common", self.reward_common),
        ] {
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("{name} must be finite and nonnegative, got {r}"));
            }
        }
        let [p0, p1] = self.behavior_action_probs;
        if p0 < 0.0 || p1 < 0.0 || (p0 + p1 - 1.0).abs() > 1e-12 {
            return bad("behavior_action_probs must be a distribution".into());
        }
        Ok(())
    }
}

/// Builds the instance and its behavior policy.
pub fn build_rare_transition_mdp(cfg: &RareTransitionConfig) -> Result<(TabularMdp, Policy)> {
    cfg.validate()?;
    let mut b = MdpBuilder::new(5, 2, FINITE_HORIZON_GAMMA);
    b.initial_state(RARE_START);
    b.goto(RARE_START, 1, RARE_GREEN);
    let p = cfg.rare_prob;
    b.transition(RARE_START, 0, vec![(RARE_COMMON, 1.0 - p), (RARE_STATE, p)]);
    for (s, r) in [
        (RARE_GREEN, cfg.reward_green),
        (RARE_COMMON, cfg.reward_common),
        (RARE_STATE, cfg.reward_high),
    ] {
        for a in 0..2 {
            b.goto(s, a, RARE_END);
            b.reward(s, a, RewardDist::Point(r));
        }
    }
    b.terminal(RARE_END);
    let mdp = b.build()?;
    let mut rows = vec![vec![0.5, 0.5]; 5];
    rows[RARE_START] = cfg.behavior_action_probs.to_vec();
    Ok((mdp, Policy::stochastic(rows, 2)?))
}
