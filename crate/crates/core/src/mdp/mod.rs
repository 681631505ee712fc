//! Finite discounted MDPs and their exact solution.

mod io;
mod occupancy;
mod policy;
mod qtable;
mod sim;
mod solve;

pub use io::{read_mdp, write_mdp};
pub use occupancy::{occupancy, state_marginals, OccupancyMeasure};
pub use policy::Policy;
pub use qtable::QTable;
pub use sim::{rollout, sample_episode, Transition};
pub use solve::{
    bellman_eval, bellman_opt, exact_policy_evaluation, exact_value_iteration, greedy_policy,
    policy_value, state_values, MAX_SWEEPS,
};

use rand::Rng as _;

use crate::rng::Rng;
use crate::{Error, Result};

/// Row sums and the initial distribution must be within this of 1.
pub const PROB_TOL: f64 = 1e-12;

/// Per-pair reward distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardDist {
    Point(f64),
    /// `value` with probability `prob`, otherwise 0.
    Bernoulli { value: f64, prob: f64 },
}

impl RewardDist {
    pub fn mean(&self) -> f64 {
        match *self {
            RewardDist::Point(v) => v,
            RewardDist::Bernoulli { value, prob } => value * prob,
        }
    }

    /// Largest value in the support.
    pub fn max_value(&self) -> f64 {
        match *self {
            RewardDist::Point(v) => v,
            RewardDist::Bernoulli { value, prob } if prob > 0.0 => value.max(0.0),
            RewardDist::Bernoulli { .. } => 0.0,
        }
    }

    fn min_value(&self) -> f64 {
        match *self {
            RewardDist::Point(v) => v,
            RewardDist::Bernoulli { value, prob } if prob < 1.0 => value.min(0.0),
            RewardDist::Bernoulli { value, .. } => value,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            RewardDist::Point(v) => v,
            RewardDist::Bernoulli { value, prob } => {
                if rng.random::<f64>() < prob {
                    value
                } else {
                    0.0
                }
            }
        }
    }
}

/// A finite MDP `(S, A, P, R, γ, ρ)`.
///
/// Transition rows are stored sparsely as `(next_state, probability)` pairs
/// sorted by state. Terminal states are absorbing with zero reward; episode
/// simulation stops on entering one.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    transitions: Vec<Vec<(usize, f64)>>,
    rewards: Vec<RewardDist>,
    reward_mean: Vec<f64>,
    gamma: f64,
    initial: Vec<f64>,
    r_max: f64,
    terminal: Vec<bool>,
}

impl TabularMdp {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    #[inline]
    pub fn pair(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn next(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[self.pair(s, a)]
    }

    pub fn reward(&self, s: usize, a: usize) -> &RewardDist {
        &self.rewards[self.pair(s, a)]
    }

    #[inline]
    pub fn reward_mean(&self, s: usize, a: usize) -> f64 {
        self.reward_mean[self.pair(s, a)]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// `r_max / (1 - γ)`.
    pub fn v_max(&self) -> f64 {
        self.r_max / (1.0 - self.gamma)
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.terminal.iter().enumerate().filter(|(_, t)| **t).map(|(s, _)| s)
    }

    /// Same dynamics under a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self { gamma, ..self.clone() })
    }

    /// Same dynamics from a different initial distribution.
    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        check_distribution(&initial, self.num_states, "initial distribution")?;
        Ok(Self { initial, ..self.clone() })
    }

    /// Relabels states: old state `s` becomes `perm[s]`.
    pub fn permute_states(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_states;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidMdp("state relabeling is not a permutation".into()));
        }
        let mut b = MdpBuilder::new(n, self.num_actions, self.gamma);
        for s in 0..n {
            for a in 0..self.num_actions {
                let row: Vec<_> = self.next(s, a).iter().map(|&(t, p)| (perm[t], p)).collect();
                b.transition(perm[s], a, row);
                b.reward(perm[s], a, *self.reward(s, a));
            }
            if self.terminal[s] {
                b.terminal(perm[s]);
            }
        }
        let mut init = vec![0.0; n];
        for s in 0..n {
            init[perm[s]] = self.initial[s];
        }
        b.initial(init).r_max(self.r_max).build()
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidMdp(format!("gamma {gamma} outside [0, 1)")));
    }
    Ok(())
}

fn check_distribution(p: &[f64], len: usize, what: &str) -> Result<()> {
    if p.len() != len {
        return Err(Error::InvalidMdp(format!("{what} has length {} (expected {len})", p.len())));
    }
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidMdp(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidMdp(format!("{what} sums to {total}")));
    }
    Ok(())
}

/// Incremental construction of a [`TabularMdp`]; [`MdpBuilder::build`]
/// validates every invariant.
#[derive(Debug, Clone)]
pub struct MdpBuilder {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    transitions: Vec<Option<Vec<(usize, f64)>>>,
    rewards: Vec<RewardDist>,
    initial: Option<Vec<f64>>,
    r_max: Option<f64>,
    terminal: Vec<bool>,
}

impl MdpBuilder {
    pub fn new(num_states: usize, num_actions: usize, gamma: f64) -> Self {
        let pairs = num_states * num_actions;
        Self {
            num_states,
            num_actions,
            gamma,
            transitions: vec![None; pairs],
            rewards: vec![RewardDist::Point(0.0); pairs],
            initial: None,
            r_max: None,
            terminal: vec![false; num_states],
        }
    }

    pub fn transition(&mut self, s: usize, a: usize, row: Vec<(usize, f64)>) -> &mut Self {
        let idx = s * self.num_actions + a;
        if idx < self.transitions.len() {
            self.transitions[idx] = Some(row);
        }
        self
    }

    /// Deterministic transition.
    pub fn goto(&mut self, s: usize, a: usize, next: usize) -> &mut Self {
        self.transition(s, a, vec![(next, 1.0)])
    }

    pub fn reward(&mut self, s: usize, a: usize, r: RewardDist) -> &mut Self {
        let idx = s * self.num_actions + a;
        if idx < self.rewards.len() {
            self.rewards[idx] = r;
        }
        self
    }

    /// Marks `s` terminal: self-loop under every action with zero reward.
    pub fn terminal(&mut self, s: usize) -> &mut Self {
        for a in 0..self.num_actions {
            self.goto(s, a, s);
            self.reward(s, a, RewardDist::Point(0.0));
        }
        if s < self.terminal.len() {
            self.terminal[s] = true;
        }
        self
    }

    pub fn initial(&mut self, p: Vec<f64>) -> &mut Self {
        self.initial = Some(p);
        self
    }

    pub fn initial_state(&mut self, s: usize) -> &mut Self {
        let mut p = vec![0.0; self.num_states];
        if s < p.len() {
            p[s] = 1.0;
        }
        self.initial(p)
    }

    /// Reward bound. Defaults to the largest reward in any support.
    pub fn r_max(&mut self, r_max: f64) -> &mut Self {
        self.r_max = Some(r_max);
        self
    }

    pub(crate) fn is_marked_terminal(&self, s: usize) -> bool {
        self.terminal.get(s).copied().unwrap_or(false)
    }

    pub fn build(&self) -> Result<TabularMdp> {
        let (ns, na) = (self.num_states, self.num_actions);
        if ns == 0 || na == 0 {
            return Err(Error::InvalidMdp("need at least one state and one action".into()));
        }
        check_gamma(self.gamma)?;
        let mut transitions = Vec::with_capacity(ns * na);
        for (idx, row) in self.transitions.iter().enumerate() {
            let (s, a) = (idx / na, idx % na);
            let row = row
                .as_ref()
                .ok_or_else(|| Error::InvalidMdp(format!("no transition row for ({s}, {a})")))?;
            let mut dense: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            let mut sorted = row.clone();
            sorted.sort_by_key(|&(t, _)| t);
            for (t, p) in sorted {
                if t >= ns {
                    return Err(Error::InvalidMdp(format!("({s}, {a}) leads to state {t} >= {ns}")));
                }
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::InvalidMdp(format!("({s}, {a}) has probability {p}")));
                }
                match dense.last_mut() {
                    Some(last) if last.0 == t => last.1 += p,
                    _ => dense.push((t, p)),
                }
            }
            dense.retain(|&(_, p)| p > 0.0);
            let total: f64 = dense.iter().map(|&(_, p)| p).sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidMdp(format!("row ({s}, {a}) sums to {total}")));
            }
            transitions.push(dense);
        }
        let initial = self
            .initial
            .clone()
            .ok_or_else(|| Error::InvalidMdp("initial distribution not set".into()))?;
        check_distribution(&initial, ns, "initial distribution")?;

        let support_max = self.rewards.iter().map(RewardDist::max_value).fold(0.0, f64::max);
        let r_max = self.r_max.unwrap_or(support_max);
        if !(r_max >= 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidMdp(format!("r_max {r_max} must be finite and >= 0")));
        }
        for (idx, r) in self.rewards.iter().enumerate() {
            let ok = match *r {
                RewardDist::Point(v) => v.is_finite(),
                RewardDist::Bernoulli { value, prob } => {
                    value.is_finite() && (0.0..=1.0).contains(&prob)
                }
            };
            if !ok || r.min_value() < 0.0 || r.max_value() > r_max {
                return Err(Error::InvalidMdp(format!(
                    "reward {r:?} at ({}, {}) outside [0, {r_max}]",
                    idx / na,
                    idx % na
                )));
            }
        }
        for s in (0..ns).filter(|&s| self.terminal[s]) {
            for a in 0..na {
                let idx = s * na + a;
                if transitions[idx] != [(s, 1.0)] || self.rewards[idx].max_value() != 0.0 {
                    return Err(Error::InvalidMdp(format!(
                        "terminal state {s} must self-loop with zero reward"
                    )));
                }
            }
        }
        let reward_mean = self.rewards.iter().map(RewardDist::mean).collect();
        Ok(TabularMdp {
            num_states: ns,
            num_actions: na,
            transitions,
            rewards: self.rewards.clone(),
            reward_mean,
            gamma: self.gamma,
            initial,
            r_max,
            terminal: self.terminal.clone(),
        })
    }
}
