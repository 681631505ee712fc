use crate::mdp::PROB_TOL;
use crate::rng::{sample_dense, Rng};
use crate::{Error, Result};

/// A stationary policy, either a state-to-action table or a table of action
/// distributions (row-major `S × A`).
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Deterministic { actions: Vec<usize>, num_actions: usize },
    Stochastic { probs: Vec<f64>, num_actions: usize },
}

impl Policy {
    pub fn deterministic(actions: Vec<usize>, num_actions: usize) -> Result<Self> {
        if let Some((s, &a)) = actions.iter().enumerate().find(|(_, &a)| a >= num_actions) {
            return Err(Error::InvalidPolicy(format!("action {a} at state {s} out of range")));
        }
        Ok(Policy::Deterministic { actions, num_actions })
    }

    pub fn stochastic(rows: Vec<Vec<f64>>, num_actions: usize) -> Result<Self> {
        let mut probs = Vec::with_capacity(rows.len() * num_actions);
        for (s, row) in rows.into_iter().enumerate() {
            if row.len() != num_actions {
                return Err(Error::InvalidPolicy(format!("row {s} has {} entries", row.len())));
            }
            probs.extend(row);
        }
        Self::from_table(probs, num_actions)
    }

    /// Row-major `S × A` probability table.
    pub fn from_table(probs: Vec<f64>, num_actions: usize) -> Result<Self> {
        if num_actions == 0 || probs.len() % num_actions != 0 {
            return Err(Error::InvalidPolicy("table length is not a multiple of |A|".into()));
        }
        for (s, row) in probs.chunks(num_actions).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidPolicy(format!("row {s} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidPolicy(format!("row {s} sums to {total}")));
            }
        }
        Ok(Policy::Stochastic { probs, num_actions })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Policy::Stochastic { probs: vec![p; num_states * num_actions], num_actions }
    }

    pub fn num_states(&self) -> usize {
        match self {
            Policy::Deterministic { actions, .. } => actions.len(),
            Policy::Stochastic { probs, num_actions } => probs.len() / num_actions,
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            Policy::Deterministic { num_actions, .. } | Policy::Stochastic { num_actions, .. } => {
                *num_actions
            }
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Policy::Deterministic { .. })
    }

    /// The chosen action of a deterministic policy.
    pub fn action(&self, s: usize) -> Option<usize> {
        match self {
            Policy::Deterministic { actions, .. } => Some(actions[s]),
            Policy::Stochastic { .. } => None,
        }
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        match self {
            Policy::Deterministic { actions, .. } => {
                if actions[s] == a {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::Stochastic { probs, num_actions } => probs[s * num_actions + a],
        }
    }

    /// `Σ_a π(a|s) g(a)`, touching only actions with positive mass.
    #[inline]
    pub fn expect(&self, s: usize, mut g: impl FnMut(usize) -> f64) -> f64 {
        match self {
            Policy::Deterministic { actions, .. } => g(actions[s]),
            Policy::Stochastic { probs, num_actions } => {
                let row = &probs[s * num_actions..(s + 1) * num_actions];
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(a, &p)| p * g(a))
                    .sum()
            }
        }
    }

    pub fn row(&self, s: usize) -> Vec<f64> {
        (0..self.num_actions()).map(|a| self.prob(s, a)).collect()
    }

    /// Row-major `S × A` probability table.
    pub fn to_table(&self) -> Vec<f64> {
        (0..self.num_states()).flat_map(|s| self.row(s)).collect()
    }

    pub fn sample(&self, s: usize, rng: &mut Rng) -> usize {
        match self {
            Policy::Deterministic { actions, .. } => actions[s],
            Policy::Stochastic { probs, num_actions } => {
                sample_dense(rng, &probs[s * num_actions..(s + 1) * num_actions])
            }
        }
    }

    /// Pads each row with `extra` zero-probability actions.
    pub fn lift(&self, extra: usize) -> Policy {
        let na = self.num_actions();
        match self {
            Policy::Deterministic { actions, .. } => {
                Policy::Deterministic { actions: actions.clone(), num_actions: na + extra }
            }
            Policy::Stochastic { .. } => {
                let mut probs = Vec::with_capacity(self.num_states() * (na + extra));
                for s in 0..self.num_states() {
                    probs.extend(self.row(s));
                    probs.extend(std::iter::repeat_n(0.0, extra));
                }
                Policy::Stochastic { probs, num_actions: na + extra }
            }
        }
    }

    /// ε-greedy mixture of a deterministic choice per state with the uniform
    /// distribution.
    pub fn epsilon_greedy(greedy: &[usize], num_actions: usize, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidPolicy(format!("epsilon {epsilon} outside [0, 1]")));
        }
        let base = epsilon / num_actions as f64;
        let mut probs = vec![base; greedy.len() * num_actions];
        for (s, &a) in greedy.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::InvalidPolicy(format!("action {a} out of range")));
            }
            probs[s * num_actions + a] += 1.0 - epsilon;
        }
        Ok(Policy::Stochastic { probs, num_actions })
    }
}
