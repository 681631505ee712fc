use super::solve::check_tol;
use super::{Policy, TabularMdp};
use crate::{Error, Result};

/// Discounted state-action occupancy
/// `η^π(s,a) = (1−γ) Σ_h γ^h Pr[s_h = s, a_h = a]`, truncated and renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    num_states: usize,
    num_actions: usize,
    eta: Vec<f64>,
    horizon_truncation: usize,
}

impl OccupancyMeasure {
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.eta[s * self.num_actions + a]
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Row-major `S × A` masses.
    pub fn table(&self) -> &[f64] {
        &self.eta
    }

    pub fn horizon_truncation(&self) -> usize {
        self.horizon_truncation
    }

    pub fn total(&self) -> f64 {
        self.eta.iter().sum()
    }

    pub fn state_mass(&self, s: usize) -> f64 {
        self.eta[s * self.num_actions..(s + 1) * self.num_actions].iter().sum()
    }

    /// `E_{(s,a)∼η}[g(s,a)]`.
    pub fn expect(&self, mut g: impl FnMut(usize, usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let m = self.get(s, a);
                if m > 0.0 {
                    acc += m * g(s, a);
                }
            }
        }
        acc
    }
}

fn step_marginal(mdp: &TabularMdp, pi: &Policy, d: &[f64]) -> Vec<f64> {
    let mut next = vec![0.0; mdp.num_states()];
    for (s, &ds) in d.iter().enumerate() {
        if ds == 0.0 {
            continue;
        }
        for a in 0..mdp.num_actions() {
            let w = ds * pi.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for &(t, p) in mdp.next(s, a) {
                next[t] += w * p;
            }
        }
    }
    next
}

/// State marginals `η^π_h(s) = Pr[s_h = s]` for `h = 0..=horizon`.
pub fn state_marginals(mdp: &TabularMdp, pi: &Policy, horizon: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(mdp.initial().to_vec());
    for h in 0..horizon {
        let next = step_marginal(mdp, pi, &out[h]);
        out.push(next);
    }
    out
}

/// Forward recursion truncated at the first `H` with `γ^H · max(V_max, 1) ≤ tol`.
pub fn occupancy(mdp: &TabularMdp, pi: &Policy, tol: f64) -> Result<OccupancyMeasure> {
    check_tol(tol)?;
    if pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions() {
        return Err(Error::InvalidPolicy("policy shape does not match MDP".into()));
    }
    let (ns, na, g) = (mdp.num_states(), mdp.num_actions(), mdp.gamma());
    let scale = mdp.v_max().max(1.0);
    let horizon = if g == 0.0 {
        1
    } else {
        ((tol / scale).ln() / g.ln()).ceil().max(1.0) as usize
    };
    let mut eta = vec![0.0; ns * na];
    let mut d = mdp.initial().to_vec();
    let mut weight = 1.0 - g;
    for _ in 0..horizon {
        for s in 0..ns {
            if d[s] == 0.0 {
                continue;
            }
            for a in 0..na {
                eta[s * na + a] += weight * d[s] * pi.prob(s, a);
            }
        }
        d = step_marginal(mdp, pi, &d);
        weight *= g;
    }
    let total: f64 = eta.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NumericFailure { iteration: horizon });
    }
    eta.iter_mut().for_each(|x| *x /= total);
    Ok(OccupancyMeasure { num_states: ns, num_actions: na, eta, horizon_truncation: horizon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{MdpBuilder, RewardDist};

    #[test]
    fn single_absorbing_state_gets_all_mass() {
        let m = MdpBuilder::new(1, 1, 0.9).terminal(0).initial_state(0).r_max(1.0).build().unwrap();
        let occ = occupancy(&m, &Policy::uniform(1, 1), 1e-10).unwrap();
        assert!((occ.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_discount_is_initial_times_policy() {
        let m = MdpBuilder::new(2, 2, 0.0)
            .goto(0, 0, 1)
            .goto(0, 1, 1)
            .goto(1, 0, 0)
            .goto(1, 1, 0)
            .reward(0, 0, RewardDist::Point(1.0))
            .initial(vec![0.3, 0.7])
            .build()
            .unwrap();
        let pi = Policy::stochastic(vec![vec![0.2, 0.8], vec![1.0, 0.0]], 2).unwrap();
        let occ = occupancy(&m, &pi, 1e-9).unwrap();
        assert!((occ.get(0, 0) - 0.06).abs() < 1e-15);
        assert!((occ.get(0, 1) - 0.24).abs() < 1e-15);
        assert!((occ.get(1, 0) - 0.7).abs() < 1e-15);
        assert_eq!(occ.get(1, 1), 0.0);
    }

    #[test]
    fn deterministic_chain_leaves_unreachable_states_empty() {
        // 0 -> 1 -> 2 (terminal); state 3 unreachable
        let m = MdpBuilder::new(4, 1, 0.9)
            .goto(0, 0, 1)
            .goto(1, 0, 2)
            .goto(3, 0, 0)
            .reward(0, 0, RewardDist::Point(1.0))
            .terminal(2)
            .initial_state(0)
            .build()
            .unwrap();
        let occ = occupancy(&m, &Policy::uniform(4, 1), 1e-10).unwrap();
        assert_eq!(occ.get(3, 0), 0.0);
        assert!((occ.total() - 1.0).abs() < 1e-9);
        assert!((occ.get(0, 0) - 0.1).abs() < 1e-9);
        let marg = state_marginals(&m, &Policy::uniform(4, 1), 3);
        assert_eq!(marg[2], vec![0.0, 0.0, 1.0, 0.0]);
    }
}
