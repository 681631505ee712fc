use serde::{Deserialize, Serialize};

use super::FINITE_HORIZON_GAMMA;
use crate::mdp::{MdpBuilder, Policy, RewardDist, TabularMdp};
use crate::{Error, Result};

/// Time-indexed combination lock.
///
/// Lock states `G_0 … G_{H−1}` form the only rewarded path: the correct arm
/// at `G_h` advances (or slips to the dead state with `slip_prob`), and the
/// correct arm at `G_{H−1}` enters the goal paying `reward_good`. A wrong
/// arm ends the episode, except that with probability `jackpot_prob` it
/// lands in a side state `J_{h+1}` paying `jackpot_reward` once. The
/// canonical constants make `jackpot_prob · jackpot_reward` half the path
/// value, so side states are never optimal but look optimal when a handful
/// of lucky visits inflate their empirical frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CombinationLockConfig {
    pub horizon: usize,
    pub num_arms: usize,
    pub slip_prob: f64,
    pub reward_good: f64,
    /// Correct arm per stage; empty selects `(h + 1) mod num_arms`.
    #[serde(default)]
    pub combination: Vec<usize>,
    pub jackpot_prob: f64,
    pub jackpot_reward: f64,
    /// Behavior probability of the correct arm at lock states; the remainder
    /// is split evenly over the wrong arms. Side states use the uniform
    /// distribution.
    pub behavior_correct_prob: f64,
}

impl Default for CombinationLockConfig {
    fn default() -> Self {
        Self {
            horizon: 10,
            num_arms: 2,
            slip_prob: 0.0,
            reward_good: 1.0,
            combination: Vec::new(),
            jackpot_prob: 0.01,
            jackpot_reward: 50.0,
            behavior_correct_prob: 0.75,
        }
    }
}

impl CombinationLockConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.num_arms < 2 {
            return bad(format!("num_arms must be at least 2, got {}", self.num_arms));
        }
        for (name, p) in [
            ("slip_prob", self.slip_prob),
            ("jackpot_prob", self.jackpot_prob),
            ("behavior_correct_prob", self.behavior_correct_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        for (name, r) in [("reward_good", self.reward_good), ("jackpot_reward", self.jackpot_reward)] {
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("{name} must be finite and nonnegative, got {r}"));
            }
        }
        if !self.combination.is_empty() {
            if self.combination.len() != self.horizon {
                return bad("combination length must equal horizon".into());
            }
            if self.combination.iter().any(|&a| a >= self.num_arms) {
                return bad("combination arm out of range".into());
            }
        }
        Ok(())
    }

    pub fn correct_arm(&self, h: usize) -> usize {
        if self.combination.is_empty() {
            (h + 1) % self.num_arms
        } else {
            self.combination[h]
        }
    }

    pub fn num_states(&self) -> usize {
        2 * self.horizon + 2
    }

    pub fn lock_state(&self, h: usize) -> usize {
        h
    }

    /// Side state reached from `G_{h−1}`, for `h` in `1..=horizon`.
    pub fn side_state(&self, h: usize) -> usize {
        self.horizon + h - 1
    }

    pub fn goal_state(&self) -> usize {
        2 * self.horizon
    }

    pub fn dead_state(&self) -> usize {
        2 * self.horizon + 1
    }
}

/// Builds the lock and its behavior policy.
pub fn build_combination_lock_mdp(cfg: &CombinationLockConfig) -> Result<(TabularMdp, Policy)> {
    cfg.validate()?;
    let (h_max, na) = (cfg.horizon, cfg.num_arms);
    let (goal, dead) = (cfg.goal_state(), cfg.dead_state());
    let mut b = MdpBuilder::new(cfg.num_states(), na, FINITE_HORIZON_GAMMA);
    b.initial_state(cfg.lock_state(0));
    b.r_max(cfg.reward_good.max(cfg.jackpot_reward));
    for h in 0..h_max {
        let g = cfg.lock_state(h);
        let correct = cfg.correct_arm(h);
        for a in 0..na {
            if a == correct {
                if h + 1 == h_max {
                    b.goto(g, a, goal);
                    b.reward(g, a, RewardDist::Point(cfg.reward_good));
                } else {
                    let next = cfg.lock_state(h + 1);
                    b.transition(g, a, vec![(next, 1.0 - cfg.slip_prob), (dead, cfg.slip_prob)]);
                }
            } else {
                let side = cfg.side_state(h + 1);
                b.transition(g, a, vec![(side, cfg.jackpot_prob), (dead, 1.0 - cfg.jackpot_prob)]);
            }
        }
        let side = cfg.side_state(h + 1);
        for a in 0..na {
            b.goto(side, a, dead);
            b.reward(side, a, RewardDist::Point(cfg.jackpot_reward));
        }
    }
    b.terminal(goal);
    b.terminal(dead);
    let mdp = b.build()?;

    let wrong = (1.0 - cfg.behavior_correct_prob) / (na - 1) as f64;
    let mut rows = vec![vec![1.0 / na as f64; na]; cfg.num_states()];
    for h in 0..h_max {
        let row = &mut rows[cfg.lock_state(h)];
        row.iter_mut().for_each(|p| *p = wrong);
        row[cfg.correct_arm(h)] = cfg.behavior_correct_prob;
    }
    Ok((mdp, Policy::stochastic(rows, na)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{exact_value_iteration, policy_value};

    fn deterministic() -> CombinationLockConfig {
        CombinationLockConfig { jackpot_prob: 0.0, ..Default::default() }
    }

    #[test]
    fn optimal_value_is_discounted_good_reward() {
        for cfg in [deterministic(), CombinationLockConfig::default()] {
            let (mdp, _) = build_combination_lock_mdp(&cfg).unwrap();
            let (_, pi) = exact_value_iteration(&mdp, 1e-13).unwrap();
            let v = policy_value(&mdp, &pi, 1e-13).unwrap();
            assert!((v - FINITE_HORIZON_GAMMA.powi(9)).abs() < 1e-9, "{v}");
            for h in 0..10 {
                assert_eq!(pi.action(h), Some(cfg.correct_arm(h)));
            }
        }
    }

    #[test]
    fn uniform_behavior_reaches_goal_with_two_to_minus_ten() {
        let cfg = CombinationLockConfig {
            behavior_correct_prob: 0.5,
            reward_good: 1.0,
            jackpot_reward: 0.0,
            ..deterministic()
        };
        let (mdp, mu) = build_combination_lock_mdp(&cfg).unwrap();
        // undiscounted reach probability via γ-free reward accounting
        let v = policy_value(&mdp, &mu, 1e-13).unwrap();
        let reach = v / FINITE_HORIZON_GAMMA.powi(9);
        assert!((reach - 2f64.powi(-10)).abs() < 1e-12);
    }

    #[test]
    fn default_combination_alternates() {
        let cfg = CombinationLockConfig::default();
        let arms: Vec<_> = (0..4).map(|h| cfg.correct_arm(h)).collect();
        assert_eq!(arms, vec![1, 0, 1, 0]);
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            CombinationLockConfig { num_arms: 1, ..Default::default() },
            CombinationLockConfig { horizon: 0, ..Default::default() },
            CombinationLockConfig { combination: vec![0; 3], ..Default::default() },
            CombinationLockConfig { slip_prob: 2.0, ..Default::default() },
        ] {
            assert!(build_combination_lock_mdp(&cfg).is_err());
        }
    }
}
